"""Fisher-KPP and Belousov-Zhabotinskii models with delayed diffusion and reaction.

Each constructor returns the wave :class:`~delaywave.waves.Model` together with
explicit upper and lower solutions of its wave equation.  The delays enter as
``r1 = c tau1`` and ``r2 = c tau2``.  "Sufficiently small delay" conditions are
not checked symbolically; instead the candidates are verified on a grid and
the constructor fails with the first violated inequality.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.special import expit

from . import charpoly
from .errors import GuardViolation, RootOrderViolation
from .waves import DEFAULT_GRID, Candidate, Model, verify_lower, verify_upper


@dataclass(frozen=True)
class FisherParams:
    c: float
    tau1: float = 0.0
    tau2: float = 0.0
    theta: float = 0.5
    k: float = 2.0

    @property
    def r1(self) -> float:
        return self.c * self.tau1

    @property
    def r2(self) -> float:
        return self.c * self.tau2

    @property
    def mu(self) -> tuple[float, float]:
        """Roots ``mu1 < mu2`` of ``mu^2 - c mu + 1``."""
        d = math.sqrt(self.c**2 - 4.0)
        return (self.c - d) / 2.0, (self.c + d) / 2.0

    def check(self):
        if not self.c > 2:
            raise GuardViolation(f"requires c > 2 (c={self.c})")
        if not 0 < self.theta < 1:
            raise GuardViolation(f"requires 0 < theta < 1 (theta={self.theta})")
        if not self.k >= 2:
            raise GuardViolation(f"requires k >= 2 (k={self.k})")
        if self.tau1 < 0 or self.tau2 < 0:
            raise GuardViolation("requires tau1, tau2 >= 0")


@dataclass(frozen=True)
class BZParams:
    c: float
    b: float
    r: float
    tau1: float = 0.0
    tau2: float = 0.0
    k: float = 2.0

    @property
    def r1(self) -> float:
        return self.c * self.tau1

    @property
    def r2(self) -> float:
        return self.c * self.tau2

    @property
    def s(self) -> float:
        return 1.0 - self.r

    def check(self):
        if not self.b > 1:
            raise GuardViolation(f"requires b > 1 (b={self.b})")
        if not 0 < self.r <= 0.25:
            raise GuardViolation(f"requires 0 < r <= 1/4 (r={self.r})")
        if not self.c > 2 * math.sqrt(self.b):
            raise GuardViolation(f"requires c > 2 sqrt(b) (c={self.c}, b={self.b})")
        if not self.k >= 2:
            raise GuardViolation(f"requires k >= 2 (k={self.k})")
        if self.tau1 < 0 or self.tau2 < 0:
            raise GuardViolation("requires tau1, tau2 >= 0")


def continued_root(c: float, q: float, r1: float, r_extra: float = 0.0,
                   branch: str = "larger") -> float:
    """A real root of ``z^2 - c z e^{r1 z} + q e^{(r1 + r_extra) z}``.

    Followed from the undelayed root ``(c +/- sqrt(c^2 - 4q)) / 2`` (sign per
    `branch`) by scaling both delays together from zero.
    """
    d = math.sqrt(c * c - 4.0 * q)
    hi, lo = (c + d) / 2.0, (c - d) / 2.0
    if branch == "larger":
        start, strip = hi, ((hi + lo) / 2.0, 2.0 * hi)
    elif branch == "smaller":
        start, strip = lo, (lo / 2.0, (hi + lo) / 2.0)
    else:
        raise ValueError(f"branch must be 'larger' or 'smaller', not {branch!r}")
    if r1 == 0.0 and r_extra == 0.0:
        return start
    family = lambda s: charpoly.wave_root_poly(c, q, s * r1, s * r_extra)  # noqa: E731
    return charpoly.continue_root(family, start, 1.0, steps=16, strip=strip)


def fisher_upper_rate(params: FisherParams, upper_rate: str = "closed_form") -> float:
    """Decay rate of the logistic upper solution at ``-inf``.

    ``"closed_form"`` is ``mu1 = (c - sqrt(c^2 - 4)) / 2``.  ``"neutral"`` is
    the smaller real root of the delayed linearisation at 0,
    ``mu^2 - c mu e^{r1 mu} + e^{(r1 - r2) mu} = 0``, which equals ``mu1`` when
    both delays vanish.  With delays, the closed-form tail is strictly
    subcritical for that linearisation, so iterates started from it lose tail
    mass at a fixed rate and the front drifts instead of settling; the neutral
    tail does not have this problem.
    """
    if upper_rate == "closed_form":
        return params.mu[0]
    if upper_rate == "neutral":
        return continued_root(params.c, 1.0, params.r1, -params.r2, branch="smaller")
    raise ValueError(f"upper_rate must be 'closed_form' or 'neutral', not {upper_rate!r}")


def _fisher_reaction(cur, lag):
    return (lag[0] * (1.0 - cur[0]),)


def _logistic(mu, theta):
    def v(t):
        return expit(mu * np.asarray(t, dtype=float) - math.log(theta))

    def d1(t):
        p = v(t)
        return mu * p * (1.0 - p)

    def d2(t):
        p = v(t)
        return mu * mu * p * (1.0 - p) * (1.0 - 2.0 * p)

    return v, d1, d2


def _capped_exp(lam, height):
    """``height e^{lam t}`` for ``t <= 0`` and ``height`` afterwards."""
    def v(t):
        return height * np.exp(lam * np.minimum(t, 0.0))

    def d1(t):
        t = np.asarray(t, dtype=float)
        return np.where(t <= 0, lam * height * np.exp(lam * np.minimum(t, 0.0)), 0.0)

    def d2(t):
        t = np.asarray(t, dtype=float)
        return np.where(t <= 0, lam * lam * height * np.exp(lam * np.minimum(t, 0.0)), 0.0)

    return v, d1, d2


def _two_sided(lam):
    """``e^{lam t}/2`` for ``t <= 0`` and ``1 - e^{-lam t}/2`` afterwards."""
    def v(t):
        t = np.asarray(t, dtype=float)
        e = 0.5 * np.exp(-lam * np.abs(t))
        return np.where(t <= 0, e, 1.0 - e)

    def d1(t):
        return lam * 0.5 * np.exp(-lam * np.abs(np.asarray(t, dtype=float)))

    def d2(t):
        t = np.asarray(t, dtype=float)
        e = lam * lam * 0.5 * np.exp(-lam * np.abs(t))
        return np.where(t <= 0, e, -e)

    return v, d1, d2


def _zero(t):
    return np.zeros_like(np.asarray(t, dtype=float))


def fisher_candidates(params: FisherParams, upper_rate: str = "closed_form"):
    """Model, upper and lower :class:`Candidate` for the delayed Fisher equation.

    See :func:`fisher_upper_rate` for `upper_rate`.
    """
    params.check()
    model = Model("fisher", params.c, params.r1, params.r2, (1.0,), (1.0,), (1.0,),
                  _fisher_reaction, asdict(params))
    mu1 = fisher_upper_rate(params, upper_rate)
    upper = Candidate(*(tuple([f]) for f in _logistic(mu1, params.theta)), limits=((0.0, 1.0),))
    lam = continued_root(params.c, 0.5, params.r1, -params.r2)
    lower = Candidate(*(tuple([f]) for f in _capped_exp(lam, 1.0 / params.k)),
                      limits=((0.0, 1.0 / params.k),), kinks=(0.0,))
    return model, upper, lower


def _bz_reaction(s, r, b):
    def reaction(cur, lag):
        u, v = cur
        return (u * (s - u + r * lag[1]), b * u * (1.0 - v))
    return reaction


def bz_roots(params: BZParams) -> dict:
    """``mu1 < lambda1 < lambda2``, continued in ``r1`` from their undelayed values."""
    c, r1 = params.c, params.r1
    roots = {"lambda1": continued_root(c, 1.0, r1),
             "mu1": continued_root(c, params.b, r1),
             "lambda2": continued_root(c, 0.5, r1)}
    if not roots["mu1"] < roots["lambda1"] < roots["lambda2"]:
        raise RootOrderViolation(f"expected mu1 < lambda1 < lambda2, got {roots}")
    return roots


def _exp_then_relax(A, nu, omega):
    """``A e^{nu t}`` up to the level ``v = omega / (nu + omega)``, then
    ``1 - (1 - v) e^{-omega (t - t_j)}``; the pieces join with matching slope."""
    v = omega / (nu + omega)
    tj = math.log(v / A) / nu

    def left(t, k):
        return nu**k * A * np.exp(nu * np.minimum(t, tj))

    def right(t, k):
        return -((-omega) ** k) * (1.0 - v) * np.exp(-omega * np.maximum(t - tj, 0.0))

    def make(k):
        def fn(t):
            t = np.asarray(t, dtype=float)
            return np.where(t <= tj, left(t, k), (1.0 if k == 0 else 0.0) + right(t, k))
        return fn

    return make(0), make(1), make(2), tj


def _relax_rate(c, q):
    """Twice the positive root of ``w^2 + c w - q``."""
    return -c + math.sqrt(c * c + 4.0 * q)


def bz_neutral_upper(params: BZParams, amplitude: float = 0.5) -> Candidate:
    """An upper solution whose leading edge decays at the pulled rate.

    Both components are :func:`_exp_then_relax` with rate ``nu``, the smaller
    root of ``nu^2 - c nu e^{r1 nu} + s e^{r1 nu} = 0`` (the linearisation of
    the first equation at 0), and amplitudes ``A`` and ``kappa A``.  In the
    exponential region the first inequality needs ``r kappa <= 1`` and the
    second ``kappa >= b / (c nu - nu^2)`` (delay factors included); ``kappa``
    is the geometric mean of the two bounds.

    Raises
    ------
    GuardViolation
        If the bounds on ``kappa`` are incompatible.
    """
    c, b, r, s, r1 = params.c, params.b, params.r, params.s, params.r1
    nu = continued_root(c, s, r1, branch="smaller")
    grow = math.exp(r1 * nu)
    k_min = b * grow / (c * nu * grow - nu * nu)
    k_max = 1.0 / (r * grow)
    if not k_min < k_max:
        raise GuardViolation(f"neutral upper needs b/(c nu - nu^2) < 1/r "
                             f"(got {k_min:.4f} >= {k_max:.4f})")
    kappa = math.sqrt(k_min * k_max)
    p1 = _exp_then_relax(amplitude, nu, _relax_rate(c, 1.0))
    p2 = _exp_then_relax(kappa * amplitude, nu, _relax_rate(c, b))
    return Candidate((p1[0], p2[0]), (p1[1], p2[1]), (p1[2], p2[2]),
                     limits=((0.0, 1.0), (0.0, 1.0)), kinks=(p1[3], p2[3]))


def bz_candidates(params: BZParams, upper: str = "two_sided"):
    """Model, upper and sub-solution :class:`Candidate` for the delayed BZ system.

    ``upper="two_sided"`` is the two-sided exponential quasi-upper solution built
    on ``lambda1`` and ``mu1``.  Its leading edge decays like ``e^{lambda1 t}``,
    much faster than the linearisation at 0 sustains, so iterates started
    from it slide to 0.  ``upper="neutral"`` is :func:`bz_neutral_upper`, from
    which the iteration settles on a wave.
    """
    params.check()
    model = Model("bz", params.c, params.r1, params.r2, (1.0, 1.0), (1.0, 1.0),
                  (2.0 - params.s, params.b), _bz_reaction(params.s, params.r, params.b),
                  asdict(params))
    roots = bz_roots(params)
    if upper == "two_sided":
        u1, u2 = _two_sided(roots["lambda1"]), _two_sided(roots["mu1"])
        up = Candidate(tuple(f for f in (u1[0], u2[0])), (u1[1], u2[1]), (u1[2], u2[2]),
                       limits=((0.0, 1.0), (0.0, 1.0)), kinks=(0.0,))
    elif upper == "neutral":
        up = bz_neutral_upper(params)
    else:
        raise ValueError(f"upper must be 'two_sided' or 'neutral', not {upper!r}")
    low = _capped_exp(roots["lambda2"], 1.0 / (2.0 * params.k))
    lower = Candidate((low[0], _zero), (low[1], _zero), (low[2], _zero),
                      limits=((0.0, 1.0 / (2.0 * params.k)), (0.0, 0.0)), kinks=(0.0,))
    return model, up, lower


def _certify(model, upper, lower, grid, tol):
    up = verify_upper(model, upper, tol=tol, grid=grid)
    if not up.passed:
        raise GuardViolation(f"upper-solution inequality fails by {up.max_violation:.3e} "
                             f"at t={up.location} (component {up.component})")
    lo = verify_lower(model, lower, tol=tol, grid=grid)
    if not lo.passed:
        raise GuardViolation(f"lower-solution inequality fails by {lo.max_violation:.3e} "
                             f"at t={lo.location} (component {lo.component})")
    U, L = upper.profile(*grid), lower.profile(*grid)
    for i in range(model.m):
        gap = float(np.max(L[i].values - U[i].values))
        if gap > 1e-12:
            raise GuardViolation(f"lower <= upper fails by {gap:.3e} in component {i + 1}")


def fisher(params: FisherParams, grid=DEFAULT_GRID, verify: bool = True, tol: float = 1e-8,
           upper_rate: str = "closed_form"):
    """Fisher model with sampled upper and lower solutions.

    Returns
    -------
    (Model, Profile, Profile)

    Raises
    ------
    GuardViolation
        Naming the failed parameter inequality or candidate inequality.
    """
    model, upper, lower = fisher_candidates(params, upper_rate)
    if verify:
        _certify(model, upper, lower, grid, tol)
    return model, upper.profile(*grid), lower.profile(*grid)


def bz(params: BZParams, grid=DEFAULT_GRID, verify: bool = True, tol: float = 1e-8,
       upper: str = "two_sided"):
    """BZ model with sampled quasi-upper and sub-solutions; see :func:`fisher`.

    Raises
    ------
    GuardViolation, RootOrderViolation
    """
    model, upper, lower = bz_candidates(params, upper)
    if verify:
        _certify(model, upper, lower, grid, tol)
    return model, upper.profile(*grid), lower.profile(*grid)


_BUILDERS = {"fisher": (FisherParams, fisher_candidates), "bz": (BZParams, bz_candidates)}


def model_to_json(model: Model) -> str:
    return json.dumps({"schema": "delaywave.model/1", "reaction": model.name,
                       "components": model.m, "c": model.c, "r1": model.r1, "r2": model.r2,
                       "D": list(model.D), "K": list(model.K), "beta": list(model.beta),
                       "params": model.params}, indent=2, sort_keys=True)


def params_from_dict(name: str, d: dict):
    if name not in _BUILDERS:
        raise ValueError(f"unknown model {name!r}; choose from {sorted(_BUILDERS)}")
    cls = _BUILDERS[name][0]
    return cls(**{k: float(v) for k, v in d.items()})


def model_from_json(text: str):
    """Rebuild ``(Model, upper Candidate, lower Candidate)`` from :func:`model_to_json`."""
    d = json.loads(text)
    params = params_from_dict(d["reaction"], d["params"])
    return _BUILDERS[d["reaction"]][1](params)
