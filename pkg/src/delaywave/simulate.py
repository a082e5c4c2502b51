"""Method-of-lines simulation of the delayed reaction-diffusion system.

Each component obeys

    u_i,t(x, t) = D_i u_i,xx(x, t - tau1) + f_i(u(x, t), u(x, t - tau2))

with the reaction of a :class:`~delaywave.waves.Model` (``f_i(cur, lag)``).
A wave ``u(x, t) = phi(x + c t)`` of the model is a solution, with
``tau_j = r_j / c``; its level sets move left at speed ``c``.

Time stepping is classical RK4. Delayed values at the stage times come from
cubic interpolation in a buffer of past states stored at the step spacing.
Boundaries are zero-flux.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CFLViolation, HistoryUnderflow, NoFront, NumericalError, RangeViolation
from .waves import Model, Profile

CFL_FACTOR = 0.4
STENCIL = 4
RANGE_SLACK = 1e-6


class BlowUp(NumericalError):
    """The numerical solution left the finite range."""


def delays(model: Model) -> tuple[float, float]:
    """``(tau1, tau2)`` in PDE time: ``r_j / c``."""
    if model.c <= 0:
        raise ValueError("the model speed must be positive")
    return model.r1 / model.c, model.r2 / model.c


@dataclass
class PDEState:
    """Solution on a uniform grid plus past states at the step spacing.

    ``history[j]`` holds the state at ``t - j * dtime``; ``history[0]`` is the
    current state.
    """

    x: np.ndarray
    t: float
    dtime: float
    history: np.ndarray

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.history = np.asarray(self.history, dtype=float)
        if self.history.ndim != 3 or self.history.shape[2] != self.x.size:
            raise ValueError("history must have shape (depth, m, nx)")
        if not np.all(np.isfinite(self.history[0])):
            raise BlowUp(f"non-finite values at t={self.t:g}")

    @property
    def u(self) -> np.ndarray:
        return self.history[0]

    @property
    def dx(self) -> float:
        return float(self.x[1] - self.x[0])

    @property
    def m(self) -> int:
        return self.history.shape[1]

    @property
    def depth(self) -> int:
        return self.history.shape[0]

    def at(self, s: float) -> np.ndarray:
        """State at a past time ``s <= t`` by cubic interpolation in time."""
        p = (self.t - s) / self.dtime
        if p < -1e-9:
            raise HistoryUnderflow(f"state at t={s:g} lies after the current time {self.t:g}")
        p = max(p, 0.0)
        if p > self.depth - 1 + 1e-9:
            raise HistoryUnderflow(f"history reaches back {self.depth - 1} steps; "
                                   f"t={s:g} needs {p:.3f}")
        j = int(round(p))
        if abs(p - j) < 1e-9:
            return self.history[j]
        i = min(max(int(math.floor(p)) - 1, 0), self.depth - STENCIL)
        u = p - i
        w = (-(u - 1) * (u - 2) * (u - 3) / 6.0,
             u * (u - 2) * (u - 3) / 2.0,
             -u * (u - 1) * (u - 3) / 2.0,
             u * (u - 1) * (u - 2) / 6.0)
        h = self.history
        return w[0] * h[i] + w[1] * h[i + 1] + w[2] * h[i + 2] + w[3] * h[i + 3]


def required_depth(model: Model, dtime: float) -> int:
    tau = max(delays(model))
    return int(math.ceil(tau / dtime - 1e-9)) + STENCIL


def initial_state(model: Model, x, past, dtime: float, t: float = 0.0) -> PDEState:
    """State at time `t` with history ``past(x, s)`` for ``s <= t``.

    ``past(x, s)`` returns an array of shape ``(m, nx)``.
    """
    x = np.asarray(x, dtype=float)
    depth = required_depth(model, dtime)
    hist = np.stack([np.asarray(past(x, t - j * dtime), dtype=float).reshape(model.m, x.size)
                     for j in range(depth)])
    return PDEState(x, t, dtime, hist)


def profile_state(model: Model, profile: Profile, x, dtime: float, history: str = "wave") -> PDEState:
    """Start from ``u(x, 0) = phi(x)``.

    ``history="wave"`` fills the past with the travelling wave ``phi(x + c s)``;
    ``"constant"`` repeats the initial state.
    """
    if history not in ("wave", "constant"):
        raise ValueError(f"unknown history mode {history!r}")
    c = model.c if history == "wave" else 0.0

    def past(xx, s):
        return np.stack([comp(xx + c * s) for comp in profile.components])

    return initial_state(model, x, past, dtime)


def _laplacian(u: np.ndarray, dx: float) -> np.ndarray:
    """Second difference along the last axis with reflecting ends."""
    out = np.empty_like(u)
    out[..., 1:-1] = u[..., 2:] - 2.0 * u[..., 1:-1] + u[..., :-2]
    out[..., 0] = 2.0 * (u[..., 1] - u[..., 0])
    out[..., -1] = 2.0 * (u[..., -2] - u[..., -1])
    return out / dx**2


def check_step(model: Model, dx: float, dtime: float):
    """Guards for the explicit scheme.

    Raises CFLViolation if ``dtime > 0.4 dx^2 / max D`` or if the delayed
    Laplacian is unstable on this grid (``4 D tau1 / dx^2 >= pi / 2``), and
    HistoryUnderflow if a positive delay is shorter than the step.
    """
    dmax = max(model.D)
    if dtime > CFL_FACTOR * dx**2 / dmax * (1 + 1e-12):
        raise CFLViolation(f"dtime={dtime:g} > 0.4 dx^2 / max D = {CFL_FACTOR * dx**2 / dmax:g}")
    tau1, tau2 = delays(model)
    # u' = -k u(t - tau) is stable only for k tau < pi/2; k = 4 D / dx^2 is the top mode
    if tau1 > 0 and 4.0 * dmax * tau1 / dx**2 >= math.pi / 2:
        raise CFLViolation(f"delayed diffusion unstable: need dx > sqrt(8 D tau1 / pi) = "
                           f"{math.sqrt(8 * dmax * tau1 / math.pi):.4g} (dx={dx:g})")
    for tau in (tau1, tau2):
        if 0 < tau < dtime * (1 - 1e-12):
            raise HistoryUnderflow(f"delay {tau:g} is shorter than the step {dtime:g}")


def _rhs(model: Model, state: PDEState, s: float, u: np.ndarray, dx: float) -> np.ndarray:
    tau1, tau2 = delays(model)
    diff = u if tau1 == 0 else state.at(s - tau1)
    lag = u if tau2 == 0 else state.at(s - tau2)
    lap = _laplacian(diff, dx)
    rates = model.rates(tuple(u), tuple(lag))
    return np.stack([model.D[i] * lap[i] + np.asarray(rates[i]) for i in range(model.m)])


def step(model: Model, state: PDEState, dtime: float) -> PDEState:
    """One RK4 step; delayed values are interpolated from the history.

    Stage times ``t + dtime/2`` and ``t + dtime`` need history at
    ``stage - tau``, which must not lie past ``t``.
    """
    if abs(dtime - state.dtime) > 1e-12 * state.dtime:
        raise ValueError("dtime must equal the history spacing of the state")
    dx = state.dx
    check_step(model, dx, dtime)
    if state.depth < required_depth(model, dtime):
        raise HistoryUnderflow(f"history depth {state.depth} < {required_depth(model, dtime)}")
    t, u = state.t, state.u
    k1 = _rhs(model, state, t, u, dx)
    k2 = _rhs(model, state, t + 0.5 * dtime, u + 0.5 * dtime * k1, dx)
    k3 = _rhs(model, state, t + 0.5 * dtime, u + 0.5 * dtime * k2, dx)
    k4 = _rhs(model, state, t + dtime, u + dtime * k3, dx)
    new = u + dtime / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    hist = np.concatenate([new[None], state.history[:-1]])
    return PDEState(state.x, t + dtime, dtime, hist)


def front_position(model: Model, u: np.ndarray, x: np.ndarray) -> float:
    """Leftmost upward crossing of ``K_1 / 2`` by the first component (NaN if none)."""
    level = 0.5 * model.K[0]
    v = u[0] - level
    idx = np.nonzero((v[:-1] < 0) & (v[1:] >= 0))[0]
    if idx.size == 0:
        idx = np.nonzero((v[:-1] >= 0) & (v[1:] < 0))[0]
        if idx.size == 0:
            return math.nan
    i = idx[0]
    return float(x[i] - v[i] * (x[i + 1] - x[i]) / (v[i + 1] - v[i]))


@dataclass
class Trajectory:
    """Output-interval records of a run.

    `times` and `fronts` hold the crossing of ``K_1 / 2`` (NaN when absent);
    `snapshots` are ``(t, u)`` pairs kept every `snapshot_every` records.
    """

    times: np.ndarray
    fronts: np.ndarray
    final: PDEState
    snapshots: list = field(default_factory=list)
    min_value: float = math.nan
    max_value: float = math.nan

    def to_csv(self, path, x_stride: int = 1):
        """Long-format CSV with columns ``t, x, u_1[, u_2]``."""
        m = self.final.m
        rows = []
        x = self.final.x[::x_stride]
        for t, u in self.snapshots:
            rows.append(np.column_stack([np.full(x.size, t), x] + [u[i, ::x_stride] for i in range(m)]))
        header = ",".join(["t", "x"] + [f"u_{i + 1}" for i in range(m)])
        data = np.vstack(rows) if rows else np.empty((0, m + 2))
        np.savetxt(path, data, delimiter=",", header=header, comments="", fmt="%.10e")


def validation_grid(model: Model, T: float, dx: float = 0.2, half_width: float = 80.0) -> np.ndarray:
    """``[-half_width - c T, half_width]`` at spacing `dx`: room for a left-moving front."""
    left = -half_width - model.c * T
    n = int(round((half_width - left) / dx)) + 1
    return left + dx * np.arange(n)


def default_dtime(model: Model, dx: float, output_interval: float) -> float:
    """Largest step within the guards that divides `output_interval`."""
    cap = CFL_FACTOR * dx**2 / max(model.D)
    pos = [tau for tau in delays(model) if tau > 0]
    if pos:
        cap = min(cap, min(pos))
    return output_interval / math.ceil(output_interval / cap - 1e-9)


def run(model: Model, init, T: float, dx: float = 0.2, dtime: float | None = None,
        x=None, history: str = "wave", output_interval: float = 0.1,
        snapshot_every: int = 0) -> Trajectory:
    """Integrate to time `T`, recording the front every `output_interval`.

    Parameters
    ----------
    init : Profile or PDEState
        A profile is placed at ``u(x, 0) = phi(x)`` on `x` (default
        :func:`validation_grid`) with history per `history`.
    snapshot_every : int
        Keep the full state every that many records (0: first and last only).

    Raises
    ------
    RangeViolation
        If a profile initial datum leaves ``[0, K]``.
    BlowUp
        If the solution becomes non-finite.
    """
    if T < 0:
        raise ValueError("T must be non-negative")
    if isinstance(init, PDEState):
        state = init
        dtime = state.dtime
    else:
        if x is None:
            x = validation_grid(model, T, dx)
        x = np.asarray(x, dtype=float)
        dx = float(x[1] - x[0])
        dtime = default_dtime(model, dx, output_interval) if dtime is None else dtime
        state = profile_state(model, init, x, dtime, history)
        for i in range(model.m):
            lo, hi = state.u[i].min(), state.u[i].max()
            if lo < -RANGE_SLACK or hi > model.K[i] + RANGE_SLACK:
                raise RangeViolation(f"initial component {i + 1} outside [0, K]: [{lo:g}, {hi:g}]")
    check_step(model, state.dx, dtime)
    per = max(1, int(round(output_interval / dtime)))
    nsteps = int(round(T / dtime))
    times, fronts, snaps = [state.t], [front_position(model, state.u, state.x)], [(state.t, state.u.copy())]
    lo, hi = float(state.u.min()), float(state.u.max())
    for k in range(1, nsteps + 1):
        state = step(model, state, dtime)
        lo, hi = min(lo, float(state.u.min())), max(hi, float(state.u.max()))
        if k % per == 0 or k == nsteps:
            times.append(state.t)
            fronts.append(front_position(model, state.u, state.x))
            rec = len(times) - 1
            if k == nsteps or (snapshot_every and rec % snapshot_every == 0):
                snaps.append((state.t, state.u.copy()))
    return Trajectory(np.array(times), np.array(fronts), state, snaps, lo, hi)


def wave_speed_estimate(summary) -> float:
    """Least-squares slope of the front position against time.

    `summary` is a :class:`Trajectory` or a ``(times, positions)`` pair. The
    slope is signed: a wave ``phi(x + c t)`` gives ``-c``.

    Raises
    ------
    NoFront
        If fewer than two records have a crossing.
    """
    if isinstance(summary, Trajectory):
        t, pos = summary.times, summary.fronts
    else:
        t, pos = (np.asarray(a, dtype=float) for a in summary)
    ok = np.isfinite(pos)
    if ok.sum() < 2:
        raise NoFront("fewer than two K/2 crossings recorded")
    if np.ptp(t[ok]) == 0:
        raise NoFront("crossings recorded at a single time")
    return float(np.polyfit(t[ok], pos[ok], 1)[0])
