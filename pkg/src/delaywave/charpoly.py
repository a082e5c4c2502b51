"""Exponential polynomials and their roots.

An exponential polynomial is a finite sum ``sum_k c_k z**p_k * exp(s_k z)``.
Every characteristic function used in this package has that shape, e.g. the
characteristic function of ``D x'' - a x'(t+r) - b x(t+r)``::

    P(z) = D z**2 - a z exp(r z) - b exp(r z)

Root counting is done with the argument principle on rectangles; individual
real roots are followed in the delay parameter by Newton continuation.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import (
    BoundaryRoot,
    DomainError,
    NewtonDivergence,
    NonIntegerWinding,
    StripEscape,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ExpPolyTerm:
    coeff: float
    power: int
    shift: float = 0.0

    def __post_init__(self):
        if not math.isfinite(self.coeff):
            raise ValueError("coefficient must be finite")
        if self.power < 0:
            raise ValueError("power must be a nonnegative integer")


@dataclass(frozen=True)
class ExponentialPolynomial:
    terms: tuple[ExpPolyTerm, ...]

    def __post_init__(self):
        if not self.terms:
            raise ValueError("an exponential polynomial needs at least one term")
        object.__setattr__(self, "terms", tuple(self.terms))

    @classmethod
    def from_tuples(cls, triples: Sequence[tuple[float, int, float]]):
        return cls(tuple(ExpPolyTerm(c, p, s) for c, p, s in triples))

    def __call__(self, z):
        return eval(self, z)

    def derivative(self) -> "ExponentialPolynomial":
        out = []
        for t in self.terms:
            if t.power > 0:
                out.append(ExpPolyTerm(t.coeff * t.power, t.power - 1, t.shift))
            if t.shift != 0.0:
                out.append(ExpPolyTerm(t.coeff * t.shift, t.power, t.shift))
        if not out:
            out.append(ExpPolyTerm(0.0, 0, 0.0))
        return ExponentialPolynomial(tuple(out))

    def scale(self, z):
        """Sum of absolute term magnitudes at `z`; the natural size for residuals."""
        z = np.asarray(z, dtype=complex)
        total = np.zeros(z.shape)
        for t in self.terms:
            total = total + np.abs(t.coeff * z**t.power * np.exp(t.shift * z))
        return total

    def horner(self, z):
        """Evaluate by grouping terms per shift and running Horner on each group.

        Independent of :func:`eval`; used to cross-check it.
        """
        z = np.asarray(z, dtype=complex)
        groups: dict[float, dict[int, float]] = {}
        for t in self.terms:
            g = groups.setdefault(t.shift, {})
            g[t.power] = g.get(t.power, 0.0) + t.coeff
        total = np.zeros(z.shape, dtype=complex)
        for shift, coeffs in groups.items():
            acc = np.zeros(z.shape, dtype=complex)
            for p in range(max(coeffs), -1, -1):
                acc = acc * z + coeffs.get(p, 0.0)
            total = total + acc * np.exp(shift * z)
        return total


def eval(P: ExponentialPolynomial, z):
    """Evaluate ``P`` at complex `z` (scalar or array).

    Overflow saturates to ``inf`` and is logged rather than raised.
    """
    z = np.asarray(z, dtype=complex)
    with np.errstate(over="ignore", invalid="ignore"):
        total = np.zeros(z.shape, dtype=complex)
        for t in P.terms:
            total = total + t.coeff * z**t.power * np.exp(t.shift * z)
    if not np.all(np.isfinite(total)):
        logger.warning("exponential polynomial overflowed at %d point(s)",
                       int(np.count_nonzero(~np.isfinite(total))))
    return total[()] if total.ndim == 0 else total


def eval_d(P: ExponentialPolynomial, z):
    return eval(P.derivative(), z)


def char_poly(a: float, b: float, r: float, D: float = 1.0) -> ExponentialPolynomial:
    """``D z^2 - a z e^{rz} - b e^{rz}``."""
    return ExponentialPolynomial.from_tuples([(D, 2, 0.0), (-a, 1, r), (-b, 0, r)])


def wave_root_poly(c: float, q: float, r: float, r_extra: float = 0.0) -> ExponentialPolynomial:
    """``z^2 - c z e^{rz} + q e^{(r + r_extra) z}``.

    The characteristic functions behind the explicit upper/lower solutions of
    the Fisher and BZ wave equations all have this form.
    """
    return ExponentialPolynomial.from_tuples([(1.0, 2, 0.0), (-c, 1, r), (q, 0, r + r_extra)])


def _check_ab(a, b):
    if b <= 0 or a == 0:
        raise DomainError(f"requires a != 0 and b > 0 (got a={a}, b={b})")


def roots_nodelay(a: float, b: float, D: float = 1.0) -> tuple[float, float]:
    """Roots of ``D z^2 - a z - b``, returned as ``(positive, negative)``."""
    _check_ab(a, b)
    disc = math.sqrt(a * a + 4.0 * D * b)
    return (a + disc) / (2.0 * D), (a - disc) / (2.0 * D)


@dataclass(frozen=True)
class Rectangle:
    re_min: float
    re_max: float
    im_min: float
    im_max: float

    def __post_init__(self):
        if not (self.re_min < self.re_max and self.im_min < self.im_max):
            raise ValueError("degenerate rectangle")

    def edges(self):
        """Counter-clockwise (start, end) vertex pairs."""
        c = [complex(self.re_min, self.im_min), complex(self.re_max, self.im_min),
             complex(self.re_max, self.im_max), complex(self.re_min, self.im_max)]
        return [(c[i], c[(i + 1) % 4]) for i in range(4)]


@dataclass(frozen=True)
class RootPair:
    eta1: float
    eta2: float


def _edge_integral(P, dP, z0, z1, n):
    tau = np.linspace(0.0, 1.0, n + 1)
    z = z0 + (z1 - z0) * tau
    vals = eval(dP, z) / eval(P, z) * (z1 - z0)
    return np.trapezoid(vals, tau) if hasattr(np, "trapezoid") else np.trapz(vals, tau)


def winding_count(P: ExponentialPolynomial, rect: Rectangle, tol: float = 1e-9,
                  max_refine: int = 14) -> int:
    """Number of zeros of ``P`` inside `rect`, by the argument principle.

    Each edge is integrated with the trapezoid rule, doubling the node count
    until the contour integral moves by less than 1e-3.

    Raises
    ------
    BoundaryRoot
        If ``min |P|`` sampled on the boundary falls below ``tol * max |P|``.
    NonIntegerWinding
        If the unrounded count is farther than 0.25 from an integer.
    """
    dP = P.derivative()
    edges = rect.edges()
    mins, maxs = [], []
    for z0, z1 in edges:
        m = max(64, int(math.ceil(64 * abs(z1 - z0))))
        mag = np.abs(eval(P, z0 + (z1 - z0) * np.linspace(0.0, 1.0, m + 1)))
        mins.append(mag.min())
        maxs.append(mag.max())
    if min(mins) < tol * max(maxs):
        raise BoundaryRoot(f"|P| on the boundary of {rect} drops to {min(mins):.3e}")

    n = [max(64, int(math.ceil(64 * abs(z1 - z0)))) for z0, z1 in edges]
    prev = None
    for _ in range(max_refine):
        total = sum(_edge_integral(P, dP, z0, z1, k) for (z0, z1), k in zip(edges, n))
        wind = total / (2j * math.pi)
        if prev is not None and abs(wind - prev) < 1e-3:
            break
        prev = wind
        n = [2 * k for k in n]
    count = round(wind.real)
    if abs(wind - count) > 0.25:
        raise NonIntegerWinding(f"winding integral {wind:.4f} is not near an integer")
    return int(count)


def imaginary_axis_margin(a: float, b: float, r: float, xi_max: float,
                          D: float = 1.0, n: int | None = None) -> float:
    """Sup over the imaginary axis of ``|alpha(i xi)| / |beta(i xi)|``.

    ``beta(z) = D z^2 - a z - b`` is the undelayed characteristic function and
    ``alpha(z) = (b + a z)(1 - e^{rz})`` the delay perturbation, so a value
    below 1 excludes roots of ``alpha + beta`` on the imaginary axis (Rouche).
    ``|xi| <= xi_max`` is sampled on a grid; beyond it the bound
    ``2 sqrt(b^2 + a^2 xi^2) / (D xi^2 + b)`` is used.
    """
    if b <= 0:
        raise DomainError(f"requires b > 0 (got b={b})")
    if xi_max <= 0:
        raise ValueError("xi_max must be positive")
    if n is None:
        n = int(max(20001, 400 * xi_max * max(1.0, abs(r))))
    xi = np.linspace(0.0, xi_max, n)  # the ratio is even in xi
    num = 2.0 * np.sqrt(b * b + (a * xi) ** 2) * np.abs(np.sin(r * xi / 2.0))
    den = np.sqrt((D * xi**2 + b) ** 2 + (a * xi) ** 2)
    sampled = float(np.max(num / den))
    if r == 0.0:
        return sampled
    tail_xi = xi_max * np.logspace(0.0, 12.0, 2000)
    tail = float(np.max(2.0 * np.sqrt(b * b + (a * tail_xi) ** 2) / (D * tail_xi**2 + b)))
    return max(sampled, tail)


def _newton(P, dP, x, tol, maxiter=50):
    for _ in range(maxiter):
        val = complex(eval(P, x))
        scale = float(P.scale(x))
        if abs(val) <= tol * max(scale, 1.0):
            return x
        step = val / complex(eval(dP, x))
        x_new = x - step.real
        if not math.isfinite(x_new):
            break
        if abs(x_new - x) <= 4e-16 * max(1.0, abs(x)):
            return x_new
        x = x_new
    val = complex(eval(P, x))
    if abs(val) <= 1e3 * tol * max(float(P.scale(x)), 1.0):
        return x
    raise NewtonDivergence(f"Newton did not converge in {maxiter} iterations (last iterate {x})")


def continue_root(family: Callable[[float], ExponentialPolynomial], lambda_start: float,
                  r_target: float, steps: int = 16, strip: tuple[float, float] | None = None,
                  tol: float = 1e-12) -> float:
    """Follow a real root of ``family(r)`` from ``r = 0`` to `r_target`.

    Newton's method in real arithmetic is restarted from the previous root at
    each of `steps` equal increments; a failing increment is halved (up to 30
    times) before giving up.

    Raises
    ------
    NewtonDivergence
        If an increment cannot be completed.
    StripEscape
        If the root leaves ``strip = (re_lo, re_hi)``.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    P0 = family(0.0)
    lam = float(lambda_start)
    if abs(complex(eval(P0, lam))) > 1e-8 * max(float(P0.scale(lam)), 1.0):
        raise DomainError(f"lambda_start={lambda_start} is not a root at r=0")
    if r_target == 0.0:
        return lam
    r, h = 0.0, r_target / steps
    halvings = 0
    while (r_target - r) * math.copysign(1.0, r_target) > 1e-15 * max(1.0, abs(r_target)):
        r_next = r + h
        if (r_target - r_next) * math.copysign(1.0, r_target) < 0:
            r_next = r_target
        P = family(r_next)
        try:
            lam_next = _newton(P, P.derivative(), lam, tol)
        except NewtonDivergence:
            halvings += 1
            if halvings > 30:
                raise
            h /= 2.0
            continue
        if strip is not None and not (strip[0] <= lam_next <= strip[1]):
            raise StripEscape(f"root {lam_next} left strip {strip} at r={r_next}")
        lam, r = lam_next, r_next
    resid = complex(eval(family(r_target), lam))
    assert abs(resid.imag) <= 1e-12 * max(1.0, abs(resid.real)), "root lost realness"
    return lam


def root_slope_limit(a: float, b: float) -> float:
    """``lim_{r -> 0+} d eta1/dr = lambda1 (a lambda1 + b) / sqrt(a^2 + 4b)`` (> 0)."""
    lam1, _ = roots_nodelay(a, b)
    return lam1 * (a * lam1 + b) / math.sqrt(a * a + 4.0 * b)
