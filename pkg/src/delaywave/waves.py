"""Monotone iteration for traveling waves of delayed reaction-diffusion systems.

With ``u(x, t) = phi(x + c t)`` the wave profile solves

    D phi''(t) - c phi'(t + r1) + f_c(phi_{t + r1}) = 0,

where ``f_c`` reads the profile at offsets ``0`` and ``-r2`` from its argument.
Writing ``L = D d^2 - c d(. + r1) - beta (. + r1)`` and
``H(phi)(t) = f_c(phi_{t + r1}) + beta phi(t + r1)``, waves are fixed points of
``F(phi) = -L^{-1} H(phi)``.  Starting from an upper solution, the iterates
``F^n(upper)`` decrease monotonically to a wave.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import NoConvergence, OrderingViolation, RangeViolation
from .green import OperatorParams
from .perron import (GridFunction, apply_green, check_shift_resolution, derivatives,
                     shift_values)

logger = logging.getLogger(__name__)

RANGE_SLACK = 1e-9
ORDER_SLACK = 1e-9

# reaction(cur, lag) -> per-component rates, where cur[i] = phi_i(s) and
# lag[i] = phi_i(s - r2) are arrays; s = t + r1 in the wave equation.
Reaction = Callable[[Sequence[np.ndarray], Sequence[np.ndarray]], tuple]


@dataclass(frozen=True)
class Model:
    name: str
    c: float
    r1: float
    r2: float
    D: tuple
    K: tuple
    beta: tuple
    reaction: Reaction = field(compare=False)
    params: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.c <= 0:
            raise ValueError("wave speed c must be positive")
        if self.r1 < 0 or self.r2 < 0:
            raise ValueError("r1 and r2 must be nonnegative")
        if not (len(self.D) == len(self.K) == len(self.beta)) or self.m not in (1, 2):
            raise ValueError("D, K, beta must have one entry per component (1 or 2)")
        if min(self.D) <= 0 or min(self.K) <= 0 or min(self.beta) <= 0:
            raise ValueError("D, K and beta must be positive")

    @property
    def m(self) -> int:
        return len(self.K)

    def operator(self, i: int) -> OperatorParams:
        return OperatorParams(a=self.c, b=self.beta[i], r=self.r1, D=self.D[i])

    def rates(self, cur, lag) -> tuple:
        cur = [np.asarray(v, dtype=float) for v in cur]
        lag = [np.asarray(v, dtype=float) for v in lag]
        return tuple(np.asarray(v, dtype=float) for v in self.reaction(cur, lag))


@dataclass
class Profile:
    components: tuple

    def __post_init__(self):
        self.components = tuple(self.components)
        first = self.components[0]
        for g in self.components[1:]:
            if g.n != first.n or g.dt != first.dt or g.t0 != first.t0:
                raise ValueError("profile components must share one grid")

    @classmethod
    def from_callables(cls, fns, t_min, t_max, dt, limits=None):
        comps = []
        for i, fn in enumerate(fns):
            lo, hi = (None, None) if limits is None else limits[i]
            comps.append(GridFunction.from_callable(fn, t_min, t_max, dt, lo, hi))
        return cls(tuple(comps))

    @property
    def m(self) -> int:
        return len(self.components)

    @property
    def t(self) -> np.ndarray:
        return self.components[0].t

    @property
    def dt(self) -> float:
        return self.components[0].dt

    def __getitem__(self, i) -> GridFunction:
        return self.components[i]

    def shifted(self, h: float) -> "Profile":
        return Profile(tuple(g.shifted(h) for g in self.components))

    def distance(self, other: "Profile") -> float:
        """Sup-norm distance over the window plus the largest limit difference."""
        d = 0.0
        for g, h in zip(self.components, other.components):
            d = max(d, float(np.max(np.abs(g.values - h.values))) + max(
                abs(g.left_limit - h.left_limit), abs(g.right_limit - h.right_limit)))
        return d

    def to_csv(self, path):
        cols = [self.t] + [g.values for g in self.components]
        header = ",".join(["t"] + [f"phi_{i + 1}" for i in range(self.m)])
        np.savetxt(path, np.column_stack(cols), delimiter=",", header=header,
                   comments="", fmt="%.16e")

    def to_json(self) -> str:
        return json.dumps({"schema": "delaywave.profile/1",
                           "components": [json.loads(g.to_json()) for g in self.components]})

    @classmethod
    def from_json(cls, text: str) -> "Profile":
        d = json.loads(text)
        return cls(tuple(GridFunction.from_json(json.dumps(c)) for c in d["components"]))


def _check_range(model: Model, phi: Profile):
    for i, g in enumerate(phi.components):
        lo = min(g.values.min(), g.left_limit, g.right_limit)
        hi = max(g.values.max(), g.left_limit, g.right_limit)
        if lo < -RANGE_SLACK or hi > model.K[i] + RANGE_SLACK:
            raise RangeViolation(f"component {i + 1} spans [{lo:.3e}, {hi:.3e}], "
                                 f"outside [0, {model.K[i]}]")


def _stencil(model: Model, phi: Profile):
    """Values at ``t + r1`` and ``t + r1 - r2`` per component, and the limit stencils."""
    check_shift_resolution(model.r1, phi.dt)
    check_shift_resolution(abs(model.r1 - model.r2), phi.dt)
    cur, lag = [], []
    for g in phi.components:
        cur.append(shift_values(g.values, g.dt, model.r1, g.left_limit, g.right_limit))
        lag.append(shift_values(g.values, g.dt, model.r1 - model.r2, g.left_limit, g.right_limit))
    return cur, lag


def H_op(model: Model, phi: Profile) -> tuple:
    """``f_c(phi_{t+r1}) + beta phi(t+r1)`` per component.

    Raises
    ------
    RangeViolation
        If `phi` leaves ``[0, K]`` by more than 1e-9.
    """
    _check_range(model, phi)
    cur, lag = _stencil(model, phi)
    rates = model.rates(cur, lag)
    left = model.rates([[g.left_limit] for g in phi], [[g.left_limit] for g in phi])
    right = model.rates([[g.right_limit] for g in phi], [[g.right_limit] for g in phi])
    out = []
    for i, g in enumerate(phi.components):
        b = model.beta[i]
        out.append(g.like(rates[i] + b * cur[i],
                          float(left[i][0]) + b * g.left_limit,
                          float(right[i][0]) + b * g.right_limit))
    return tuple(out)


def F_op(model: Model, phi: Profile) -> Profile:
    """``-L^{-1} H(phi)``, one bounded-solution solve per component."""
    comps = []
    for i, h in enumerate(H_op(model, phi)):
        x = apply_green(model.operator(i), h, left_tail="exponential")
        comps.append(x.like(-x.values, -x.left_limit, -x.right_limit))
    return Profile(tuple(comps))


def wave_expression(model: Model, phi: Profile):
    """``D phi'' - c phi'(t+r1) + f_c(phi_{t+r1})`` per component, with the valid-entry mask."""
    cur, lag = _stencil(model, phi)
    rates = model.rates(cur, lag)
    exprs = []
    for i, g in enumerate(phi.components):
        d1, d2 = derivatives(g)
        d1s = shift_values(d1, g.dt, model.r1, 0.0, 0.0)
        exprs.append(model.D[i] * d2 - model.c * d1s + rates[i])
    n = phi.t.size
    reach = int(math.ceil(max(model.r1, model.r1 - model.r2, 0.0) / phi.dt - 1e-9)) + 2
    back = int(math.ceil(max(model.r2 - model.r1, 0.0) / phi.dt - 1e-9)) + 2
    mask = np.zeros(n, dtype=bool)
    mask[back:n - reach] = True
    return exprs, mask


@dataclass
class VerificationReport:
    kind: str
    passed: bool
    tol: float
    max_violation: float
    location: float | None
    component: int | None
    excluded: int
    violations: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "passed": self.passed, "tol": self.tol,
                "max_violation": self.max_violation, "location": self.location,
                "component": self.component, "excluded_points": self.excluded,
                "violations": self.violations}


KINK_HALF_WIDTH = 2  # grid steps excluded on each side of a kink


def kink_mask(model: Model, t: np.ndarray, dt: float, kinks: Sequence[float]) -> np.ndarray:
    """Grid points whose finite-difference stencil may straddle a kink.

    A kink at ``k`` spoils ``phi''`` near ``t = k`` and ``phi'(t + r1)`` near
    ``t = k - r1``.
    """
    bad = np.zeros(t.size, dtype=bool)
    for k in kinks:
        for centre in (k, k - model.r1):
            bad |= np.abs(t - centre) <= KINK_HALF_WIDTH * dt + 1e-12
    return bad


@dataclass(frozen=True)
class Candidate:
    """A closed-form profile: value, first and second derivative per component.

    `kinks` lists the points where the second derivative (or the first) jumps.
    """

    value: tuple
    d1: tuple
    d2: tuple
    limits: tuple
    kinks: tuple = ()

    @property
    def m(self) -> int:
        return len(self.value)

    def profile(self, t_min: float = -60.0, t_max: float = 60.0, dt: float = 0.01) -> Profile:
        return Profile.from_callables(self.value, t_min, t_max, dt, self.limits)

    def expression(self, model: Model, t: np.ndarray) -> list:
        cur = [f(t + model.r1) for f in self.value]
        lag = [f(t + model.r1 - model.r2) for f in self.value]
        rates = model.rates(cur, lag)
        return [model.D[i] * self.d2[i](t) - model.c * self.d1[i](t + model.r1) + rates[i]
                for i in range(self.m)]


DEFAULT_GRID = (-60.0, 60.0, 0.01)


def _verify(model, phi, kinks, tol, sign, kind, grid):
    if isinstance(phi, Candidate):
        kinks = tuple(kinks) + tuple(phi.kinks)
        prof = phi.profile(*grid)
        _check_range(model, prof)
        exprs = phi.expression(model, prof.t)
        mask = np.ones(prof.t.size, dtype=bool)
        phi = prof
    else:
        _check_range(model, phi)
        exprs, mask = wave_expression(model, phi)
    keep = mask & ~kink_mask(model, phi.t, phi.dt, kinks)
    worst, where, comp = -math.inf, None, None
    violations = []
    for i, e in enumerate(exprs):
        v = sign * e
        v = np.where(keep, v, -np.inf)
        j = int(np.argmax(v))
        if v[j] > worst:
            worst, where, comp = float(v[j]), float(phi.t[j]), i + 1
        for idx in np.flatnonzero(v > tol)[:20]:
            violations.append({"t": float(phi.t[idx]), "component": i + 1, "value": float(e[idx])})
    return VerificationReport(kind, worst <= tol, tol, worst, where, comp,
                              int(np.count_nonzero(~keep)), violations)


def verify_upper(model: Model, phi, kink_set: Sequence[float] = (), tol: float = 1e-8,
                 grid=DEFAULT_GRID) -> VerificationReport:
    """Check ``D phi'' - c phi'(t+r1) + f_c(phi_{t+r1}) <= tol`` off the kinks.

    A :class:`Profile` is differentiated by centered differences; a
    :class:`Candidate` supplies exact derivatives, sampled on `grid`
    ``(t_min, t_max, dt)``.  Points within two grid steps of a kink ``k`` or of
    ``k - r1`` are skipped.
    """
    return _verify(model, phi, kink_set, tol, 1.0, "upper", grid)


def verify_lower(model: Model, phi, kink_set: Sequence[float] = (), tol: float = 1e-8,
                 grid=DEFAULT_GRID) -> VerificationReport:
    """Mirror of :func:`verify_upper`: checks the expression is ``>= -tol``."""
    return _verify(model, phi, kink_set, tol, -1.0, "lower", grid)


@dataclass
class IterationReport:
    iterations: int
    deltas: list
    ordering_ok: bool
    final_residual: float
    limit_values: list

    def to_dict(self) -> dict:
        return {"iterations": self.iterations, "deltas": self.deltas,
                "ordering_ok": self.ordering_ok, "final_residual": self.final_residual,
                "limit_values": self.limit_values}


def _check_order(step, new, old, lower):
    t = new.t
    for i, (g, h, lo) in enumerate(zip(new.components, old.components, lower.components)):
        for name, gap in (("lower <= phi", lo.values - g.values),
                          ("phi_{n+1} <= phi_n", g.values - h.values),
                          ("nondecreasing", -np.diff(g.values))):
            j = int(np.argmax(gap))
            if gap[j] > ORDER_SLACK:
                raise OrderingViolation(
                    f"{name} fails by {gap[j]:.3e} in component {i + 1}", step, float(t[j]))


def iterate(model: Model, upper: Profile, lower: Profile, tol: float = 1e-6,
            max_iter: int = 200, progress: Callable[[int, float], None] | None = None):
    """Iterate ``phi <- F(phi)`` from `upper` until the step is below `tol`.

    Every step asserts ``lower <= phi_{n+1} <= phi_n`` and monotonicity in t.

    Returns
    -------
    (Profile, IterationReport)

    Raises
    ------
    OrderingViolation
        If the sandwich or monotonicity fails by more than 1e-9.
    NoConvergence
        If `max_iter` steps do not reach `tol`.
    """
    phi = upper
    deltas = []
    for n in range(1, max_iter + 1):
        new = F_op(model, phi)
        _check_order(n, new, phi, lower)
        delta = new.distance(phi)
        deltas.append(delta)
        if progress is not None:
            progress(n, delta)
        logger.debug("iteration %d: delta %.3e", n, delta)
        phi = new
        if delta <= tol:
            v = validate_wave(model, phi)
            limits = [(g.left_limit, g.right_limit) for g in phi.components]
            return phi, IterationReport(n, deltas, True, v.residual, limits)
    raise NoConvergence(f"no convergence in {max_iter} iterations (last delta {deltas[-1]:.3e})")


@dataclass
class WaveValidation:
    residual: float
    end_derivatives: list
    end_rates: list

    def to_dict(self) -> dict:
        return {"residual": self.residual, "end_derivatives": self.end_derivatives,
                "end_rates": self.end_rates}


def validate_wave(model: Model, phi: Profile) -> WaveValidation:
    """Residual of the wave equation, end slopes, and reaction rates at the limits."""
    exprs, mask = wave_expression(model, phi)
    res = max(float(np.max(np.abs(e[mask]))) for e in exprs)
    ends = []
    for g in phi.components:
        v = g.values
        ends.append((abs(v[1] - v[0]) / g.dt, abs(v[-1] - v[-2]) / g.dt))
    lo = model.rates([[g.left_limit] for g in phi], [[g.left_limit] for g in phi])
    hi = model.rates([[g.right_limit] for g in phi], [[g.right_limit] for g in phi])
    rates = [(abs(float(lo[i][0])), abs(float(hi[i][0]))) for i in range(model.m)]
    return WaveValidation(res, ends, rates)


def check_equilibria(model: Model, tol: float = 1e-12) -> bool:
    """H1: ``f(0) = f(K) = 0`` for constant profiles."""
    zero = model.rates([[0.0]] * model.m, [[0.0]] * model.m)
    K = model.rates([[k] for k in model.K], [[k] for k in model.K])
    return all(abs(float(z[0])) <= tol and abs(float(k[0])) <= tol for z, k in zip(zero, K))


def quasi_monotone_margin(model: Model, n: int = 1000, seed: int = 0) -> float:
    """H2 spot check on random ordered pairs; returns the smallest value of
    ``f(phi) - f(psi) + beta (phi(0) - psi(0))`` over pairs and components."""
    rng = np.random.default_rng(seed)
    K = np.asarray(model.K)[:, None]
    cur_hi, lag_hi = rng.random((model.m, n)) * K, rng.random((model.m, n)) * K
    cur_lo = cur_hi * rng.random((model.m, n))
    lag_lo = lag_hi * rng.random((model.m, n))
    f_hi = model.rates(list(cur_hi), list(lag_hi))
    f_lo = model.rates(list(cur_lo), list(lag_lo))
    return float(min(np.min(f_hi[i] - f_lo[i] + model.beta[i] * (cur_hi[i] - cur_lo[i]))
                     for i in range(model.m)))


def intermediate_equilibria(model: Model, spacing: float = 1e-2, tol: float = 1e-12) -> list:
    """Constant states strictly between 0 and K that look like equilibria.

    Samples interior constants at `spacing` (relative to K). For one component
    a sign change of ``f`` between samples also counts.
    """
    u = np.arange(spacing, 1.0 - spacing / 2, spacing)
    if model.m == 1:
        x = u * model.K[0]
        f = model.rates([x], [x])[0]
        hits = [float(v) for v in x[np.abs(f) <= tol]]
        s = np.sign(f)
        hits += [float(0.5 * (x[j] + x[j + 1])) for j in np.flatnonzero(s[:-1] * s[1:] < 0)]
        return hits
    grids = np.meshgrid(*(u * k for k in model.K), indexing="ij")
    cur = [g.ravel() for g in grids]
    rates = model.rates(cur, cur)
    worst = np.max(np.abs(np.vstack(rates)), axis=0)
    return [tuple(float(c[j]) for c in cur) for j in np.flatnonzero(worst <= tol)]
