"""Green function of ``D x'' - a x'(t+r) - b x(t+r) = f``.

Three evaluation routes are provided:

* ``green_nodelay``: closed form for ``r = 0``;
* ``green_residue``: ``exp(eta2 t) / P'(eta2)`` for ``t > 0``, exact because
  ``eta2`` is the only characteristic root in the left half-plane when r >= 0;
* ``green_quadrature``: the inverse Fourier integral taken along a vertical
  line ``Re z = s`` inside the pole-free strip, valid for every t.

For ``t < 0`` and ``r > 0`` the right half-plane holds ``eta1`` plus a chain of
roots whose real parts start at a large real root ``lam_far`` (roughly
``log(lam_far / a) / r``).  Once ``|t| > 40 / lam_far`` the chain is below
double precision and ``G(t) = -exp(eta1 t) / P'(eta1)``.
"""
from __future__ import annotations

import csv
import functools
import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, optimize

from . import charpoly
from .charpoly import RootPair
from .errors import (
    DegenerateRoot,
    DomainError,
    MissingCertificate,
    PoleOnContour,
    TruncationFailure,
)

logger = logging.getLogger(__name__)

QUAD_EPSABS = 1e-12


@dataclass(frozen=True)
class OperatorParams:
    """Coefficients of ``x -> D x'' - a x'(. + r) - b x(. + r)``."""

    a: float
    b: float
    r: float = 0.0
    D: float = 1.0

    def __post_init__(self):
        if self.a == 0 or self.b <= 0:
            raise DomainError(f"requires a != 0 and b > 0 (got a={self.a}, b={self.b})")
        if self.r < 0:
            raise DomainError(f"requires r >= 0 (got r={self.r})")
        if self.D <= 0:
            raise DomainError(f"requires D > 0 (got D={self.D})")

    @property
    def poly(self):
        return charpoly.char_poly(self.a, self.b, self.r, self.D)

    def P(self, z):
        z = np.asarray(z, dtype=complex)
        return self.D * z * z - (self.a * z + self.b) * np.exp(self.r * z)

    def dP(self, z):
        z = np.asarray(z, dtype=complex)
        e = np.exp(self.r * z)
        return 2.0 * self.D * z - self.a * e - (self.a * z + self.b) * self.r * e


@functools.lru_cache(maxsize=256)
def hyperbolicity_margin(params: OperatorParams, xi_max: float = 200.0) -> float:
    return charpoly.imaginary_axis_margin(params.a, params.b, params.r, xi_max, D=params.D)


def require_hyperbolic(params: OperatorParams) -> float:
    m = hyperbolicity_margin(params)
    if not m < 1.0:
        raise MissingCertificate(
            f"hyperbolicity not certified: imaginary-axis ratio {m:.4f} >= 1 for {params}")
    return m


def green_nodelay(a, b, xi, D: float = 1.0):
    """Closed-form Green function of ``D x'' - a x' - b x``; negative everywhere."""
    lam1, lam2 = charpoly.roots_nodelay(a, b, D)
    xi = np.asarray(xi, dtype=float)
    # D scales the leading coefficient, so the jump in x' is 1/D
    out = np.where(xi < 0, np.exp(lam1 * np.minimum(xi, 0.0)),
                   np.exp(lam2 * np.maximum(xi, 0.0))) / (D * (lam2 - lam1))
    return out[()] if out.ndim == 0 else out


@functools.lru_cache(maxsize=256)
def principal_roots(params: OperatorParams) -> RootPair:
    """The real roots ``eta1 > 0 > eta2`` continued from the undelayed roots."""
    require_hyperbolic(params)
    lam1, lam2 = charpoly.roots_nodelay(params.a, params.b, params.D)

    def family(r):
        return charpoly.char_poly(params.a, params.b, r, params.D)

    eta1 = charpoly.continue_root(family, lam1, params.r, strip=(0.0, 2.0 * lam1 + 1.0))
    eta2 = charpoly.continue_root(family, lam2, params.r, strip=(2.0 * lam2, 0.0))
    return RootPair(eta1, eta2)


@functools.lru_cache(maxsize=256)
def far_root(params: OperatorParams) -> float | None:
    """Smallest real root of P beyond eta1 (None if there is none)."""
    if params.r == 0.0:
        return None
    eta1 = principal_roots(params).eta1
    f = lambda x: params.P(x).real
    lo = eta1 * 1.01 + 1e-6
    step = max(1.0, eta1)
    x = lo
    with np.errstate(over="ignore"):
        while x < 1e6:
            nxt = x + step
            if np.sign(f(x)) != np.sign(f(nxt)) and math.isfinite(f(nxt)):
                return optimize.brentq(f, x, nxt, xtol=1e-12)
            x = nxt
            step *= 1.2
    return None


def _residue_guard(params, root):
    d = float(params.dP(root).real)
    if abs(d) <= 1e-8:
        raise DegenerateRoot(f"|P'({root})| = {abs(d):.2e} is too small")
    return d


def green_residue(params: OperatorParams, t):
    """``exp(eta2 t) / P'(eta2)`` for ``t > 0`` (scalar or array)."""
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise ValueError("the residue formula applies to t > 0 only")
    eta2 = principal_roots(params).eta2
    out = np.exp(eta2 * t) / _residue_guard(params, eta2)
    return out[()] if out.ndim == 0 else out


def green_left_exponential(params: OperatorParams, t):
    """``-exp(eta1 t) / P'(eta1)``: the t < 0 Green function away from t = 0."""
    eta1 = principal_roots(params).eta1
    t = np.asarray(t, dtype=float)
    out = -np.exp(eta1 * t) / _residue_guard(params, eta1)
    return out[()] if out.ndim == 0 else out


def default_sigma(params: OperatorParams, t: float) -> float:
    eta = principal_roots(params)
    return 0.9 * eta.eta1 if t <= 0 else 0.5 * abs(eta.eta2)


@functools.lru_cache(maxsize=1024)
def _check_contour(params: OperatorParams, s: float) -> None:
    eta = principal_roots(params)
    if not (eta.eta2 < s < eta.eta1):
        raise PoleOnContour(f"line Re z = {s} is outside the strip ({eta.eta2}, {eta.eta1})")
    xi = np.concatenate([np.linspace(0.0, 50.0, 20001), np.geomspace(50.0, 1e6, 4000)])
    if np.min(np.abs(params.P(s + 1j * xi))) < 1e-10:
        raise PoleOnContour(f"|P| nearly vanishes on the line Re z = {s}")


HEAD_LENGTH = 20.0


def _asymptotic_terms(params: OperatorParams):
    """Leading terms ``coeff * e^{shift z} / z^n`` of 1/P for large |z|.

    From ``1/P = sum_k (a z + b)^k e^{k r z} / (D^{k+1} z^{2k+2})`` truncated at
    order ``z^-4``; the remainder decays like ``|z|^-5`` on vertical lines.
    """
    a, b, r, D = params.a, params.b, params.r, params.D
    return [(1.0 / D, 0.0, 2), (a / D**2, r, 3), (b / D**2, r, 4), (a * a / D**3, 2.0 * r, 4)]


def _asymptotic_inverse(params: OperatorParams, t: float, s: float) -> float:
    """Exact inverse transform of the asymptotic terms along ``Re z = s``.

    ``(1/2 pi i) int e^{z tau} z^{-n} dz`` is ``tau^{n-1}/(n-1)!`` for ``tau > 0``
    when ``s > 0`` and ``-tau^{n-1}/(n-1)!`` for ``tau < 0`` when ``s < 0``.
    """
    total = 0.0
    for coeff, shift, n in _asymptotic_terms(params):
        tau = t + shift
        if (s > 0 and tau > 0) or (s < 0 and tau < 0):
            total += math.copysign(1.0, s) * coeff * tau ** (n - 1) / math.factorial(n - 1)
    return total


def _remainder(params: OperatorParams, s: float):
    terms = _asymptotic_terms(params)

    def h(x):
        z = s + 1j * x
        out = 1.0 / params.P(z)
        for coeff, shift, n in terms:
            out = out - coeff * np.exp(shift * z) / z**n
        return out

    return h


def _weighted(f, weight, w, head=HEAD_LENGTH):
    """``int_0^inf f(x) weight(w x) dx`` (weight 'cos' or 'sin'), with error estimate.

    The head ``[0, head]`` carries nearly all the mass and goes to the
    finite-interval oscillatory rule; the ``1/x^2`` tail goes to the
    semi-infinite Fourier rule, whose cycle extrapolation stands in for an
    explicit frequency cut-off.
    """
    kw = dict(weight=weight, wvar=w, epsabs=QUAD_EPSABS)
    v0, e0 = integrate.quad(f, 0.0, head, epsrel=1e-12, limit=max(200, int(head * w)), **kw)
    v1, e1 = integrate.quad(f, head, np.inf, limlst=200, **kw)
    return v0 + v1, e0 + e1


def _fourier_half_line(fre, fim, t, head=HEAD_LENGTH):
    """``int_0^inf Re[e^{i xi t} h(xi)] d xi`` given Re h and Im h."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        if t == 0.0:
            return integrate.quad(fre, 0.0, np.inf, epsabs=QUAD_EPSABS, epsrel=1e-12, limit=500)
        w = abs(t)
        c, ec = _weighted(fre, "cos", w, head)
        s, es = _weighted(fim, "sin", w, head)
    return c - math.copysign(1.0, t) * s, ec + es


def green_quadrature(params: OperatorParams, t: float, sigma: float | None = None,
                     atol: float = 1e-8) -> float:
    """Green function by contour-shifted Fourier quadrature.

    Evaluates ``(1/2 pi) int e^{(s + i xi) t} / P(s + i xi) d xi`` with
    ``s = +sigma`` for ``t <= 0`` and ``s = -sigma`` for ``t > 0``.  The four
    leading large-|z| terms of ``1/P`` are inverted in closed form; what is
    left decays like ``xi^-5`` and is integrated over ``xi >= 0`` only (the
    integrand is conjugate-symmetric) with QUADPACK's Fourier-weighted rules,
    whose cycle extrapolation replaces an explicit frequency cut-off.

    Raises
    ------
    PoleOnContour
        If the shifted line leaves the pole-free strip or ``|P|`` dips below
        1e-10 on it.
    TruncationFailure
        If the quadrature error estimate exceeds `atol`.
    """
    t = float(t)
    if sigma is None:
        sigma = default_sigma(params, t)
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    s = sigma if t <= 0 else -sigma
    _check_contour(params, s)

    h = _remainder(params, s)

    def fre(x):
        return h(x).real

    def fim(x):
        return h(x).imag

    scale = math.exp(s * t) / math.pi
    val, err = _fourier_half_line(fre, fim, t)
    if err * scale > atol:
        # near t = -k r the delayed phases e^{i xi (t + k r)} hardly oscillate and
        # QUADPACK's tail estimate turns pessimistic; judge by a longer head instead
        val2, _ = _fourier_half_line(fre, fim, t, head=10.0 * HEAD_LENGTH)
        err = abs(val2 - val)
        val = val2
    if err * scale > atol:
        raise TruncationFailure(f"quadrature error estimate {err * scale:.2e} at t={t}")
    return scale * val + _asymptotic_inverse(params, t, s)


def quadrature_imag_residual(params: OperatorParams, t: float, sigma: float | None = None) -> float:
    """Imaginary part of the full-line Fourier integral; zero up to rounding.

    The negative half-line is integrated with its own integrand evaluations,
    so the cancellation actually tests the conjugate symmetry of ``1/P``.
    """
    t = float(t)
    if sigma is None:
        sigma = default_sigma(params, t)
    s = sigma if t <= 0 else -sigma
    _check_contour(params, s)
    # Im[e^{i xi t} h(xi)] = sin(xi t) Re h + cos(xi t) Im h
    pos_re = lambda x: (1.0 / params.P(s + 1j * x)).real
    pos_im = lambda x: (1.0 / params.P(s + 1j * x)).imag
    neg_re = lambda x: (1.0 / params.P(s - 1j * x)).real
    neg_im = lambda x: (1.0 / params.P(s - 1j * x)).imag
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        if t == 0.0:
            a = integrate.quad(pos_im, 0, np.inf, epsabs=QUAD_EPSABS, limit=500)[0]
            b = integrate.quad(neg_im, 0, np.inf, epsabs=QUAD_EPSABS, limit=500)[0]
            total = a + b
        else:
            w = abs(t)
            sg = math.copysign(1.0, t)
            total = (sg * _weighted(pos_re, "sin", w)[0] + _weighted(pos_im, "cos", w)[0]
                     - sg * _weighted(neg_re, "sin", w)[0] + _weighted(neg_im, "cos", w)[0])
    return abs(math.exp(s * t) * total / (2.0 * math.pi))


def quadrature_band(params: OperatorParams) -> float:
    """Width of the ``t < 0`` band where the root chain still matters."""
    lam_far = far_root(params)
    if lam_far is None:
        return math.inf if params.r > 0 else 0.0
    return 40.0 / lam_far


def green(params: OperatorParams, t, hybrid: bool = True):
    """Green function at arbitrary t (scalar or array).

    ``t > 0`` uses the residue; ``t <= 0`` the quadrature, except that with
    `hybrid` the left exponential is used beyond :func:`quadrature_band`.
    """
    require_hyperbolic(params)
    t = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.empty_like(t)
    pos = t > 0
    if np.any(pos):
        out[pos] = green_residue(params, t[pos])
    band = quadrature_band(params) if hybrid else math.inf
    if params.r == 0.0 and hybrid:
        neg = ~pos
        out[neg] = green_nodelay(params.a, params.b, t[neg], params.D)
        return out
    far = (~pos) & (t < -band)
    if np.any(far):
        out[far] = green_left_exponential(params, t[far])
    for i in np.flatnonzero((~pos) & ~far):
        out[i] = green_quadrature(params, t[i])
    return out


@dataclass
class GreenTable:
    params: OperatorParams
    t: np.ndarray
    values: np.ndarray
    eta: RootPair
    negativity_certified: bool
    envelope: tuple[float, float]  # (K0, alpha) with |G| <= K0 exp(-alpha |t|)
    violations: list = field(default_factory=list)

    def to_csv(self, path, header_comment: str | None = None):
        with open(path, "w", newline="") as fh:
            if header_comment:
                fh.write(f"# {header_comment}\n")
            w = csv.writer(fh)
            w.writerow(["t", "G"])
            for ti, gi in zip(self.t, self.values):
                w.writerow([f"{ti:.10g}", f"{gi:.16e}"])


def fit_envelope(t, values, eta: RootPair):
    """Fit decay rates on each side; returns ``(K0, alpha)``."""
    t = np.asarray(t)
    g = np.abs(np.asarray(values))
    rates = []
    for mask in (t >= 1.0, t <= -1.0):
        sel = mask & (g > 1e-280)
        if np.count_nonzero(sel) >= 2:
            slope = np.polyfit(np.abs(t[sel]), np.log(g[sel]), 1)[0]
            rates.append(-slope)
    alpha = min(rates) if rates else min(eta.eta1, abs(eta.eta2))
    K0 = float(np.max(g * np.exp(alpha * np.abs(t))))
    return K0, float(alpha)


def green_table(params: OperatorParams, t_min: float, t_max: float, dt: float,
                hybrid: bool = False) -> GreenTable:
    """Tabulate G on ``t_min + k dt`` and certify its sign.

    Every ``t <= 0`` sample is computed by quadrature unless `hybrid` is set.
    A positive sample does not raise; it leaves ``negativity_certified``
    unset and is listed in ``violations``.
    """
    require_hyperbolic(params)
    n = int(round((t_max - t_min) / dt)) + 1
    t = t_min + dt * np.arange(n)
    t[np.abs(t) < 1e-12 * dt] = 0.0
    values = green(params, t, hybrid=hybrid)
    eta = principal_roots(params)
    bad = np.flatnonzero(values >= 0)
    violations = [(float(t[i]), float(values[i])) for i in bad]
    if violations:
        logger.warning("NegativityViolation: G(%g) = %g", *violations[0])
    return GreenTable(params, t, values, eta, not violations,
                      fit_envelope(t, values, eta), violations)
