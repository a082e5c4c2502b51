"""Bounded solutions of ``D x'' - a x'(t+r) - b x(t+r) = f`` by Green convolution.

Functions live on uniform grids with declared constant limits at both ends.
The convolution ``x = G * f`` is a direct trapezoid sum over the stored window plus
the exact contribution of the constant tails outside it, taken from the
running integral of the tabulated kernel.
"""
from __future__ import annotations

import functools
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import green as _green
from .errors import GridTooCoarse, MissingCertificate
from .green import OperatorParams


@dataclass
class GridFunction:
    t0: float
    dt: float
    values: np.ndarray
    left_limit: float = 0.0
    right_limit: float = 0.0
    tail_tol: float = field(default=math.inf)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("grid values must be finite")
        if not math.isfinite(self.tail_tol):
            self.tail_tol = max(abs(self.values[0] - self.left_limit),
                                abs(self.values[-1] - self.right_limit))

    @classmethod
    def from_callable(cls, fn, t_min, t_max, dt, left_limit=None, right_limit=None):
        n = int(round((t_max - t_min) / dt)) + 1
        t = t_min + dt * np.arange(n)
        v = np.asarray(fn(t), dtype=float) * np.ones(n)
        return cls(t_min, dt, v,
                   float(v[0]) if left_limit is None else left_limit,
                   float(v[-1]) if right_limit is None else right_limit)

    @property
    def n(self) -> int:
        return self.values.size

    @property
    def t(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.n)

    def like(self, values, left_limit=None, right_limit=None) -> "GridFunction":
        return GridFunction(self.t0, self.dt, values,
                            self.left_limit if left_limit is None else left_limit,
                            self.right_limit if right_limit is None else right_limit)

    def __call__(self, x):
        return sample(self.values, self.t0, self.dt, x, self.left_limit, self.right_limit)

    def shifted(self, h: float) -> "GridFunction":
        """Samples of ``t -> self(t + h)`` on the same grid."""
        return self.like(shift_values(self.values, self.dt, h, self.left_limit, self.right_limit))

    def to_csv(self, path, column="value"):
        np.savetxt(path, np.column_stack([self.t, self.values]), delimiter=",",
                   header=f"t,{column}", comments="", fmt="%.16e")

    def to_json(self) -> str:
        return json.dumps({"schema": "delaywave.gridfunction/1", "t0": self.t0, "dt": self.dt,
                           "left_limit": self.left_limit, "right_limit": self.right_limit,
                           "tail_tol": self.tail_tol, "values": self.values.tolist()})

    @classmethod
    def from_json(cls, text: str) -> "GridFunction":
        d = json.loads(text)
        return cls(d["t0"], d["dt"], np.array(d["values"]), d["left_limit"],
                   d["right_limit"], d.get("tail_tol", math.inf))


def _grid_multiple(h, dt):
    k = h / dt
    return abs(k - round(k)) < 1e-9, int(round(k))


def sample(values, t0, dt, x, left, right):
    """Cubic (4-point Lagrange) interpolation; the declared limits pad both ends."""
    x = np.asarray(x, dtype=float)
    pad = 3
    ext = np.concatenate([np.full(pad, left), values, np.full(pad, right)])
    p = (x - t0) / dt + pad
    i = np.clip(np.floor(p).astype(int), 1, ext.size - 3)
    u = p - i
    w0 = -u * (u - 1) * (u - 2) / 6.0
    w1 = (u + 1) * (u - 1) * (u - 2) / 2.0
    w2 = -(u + 1) * u * (u - 2) / 2.0
    w3 = (u + 1) * u * (u - 1) / 6.0
    out = w0 * ext[i - 1] + w1 * ext[i] + w2 * ext[i + 1] + w3 * ext[i + 2]
    out = np.where(p < 1, left, out)
    out = np.where(p > ext.size - 2, right, out)
    return out[()] if out.ndim == 0 else out


def shift_values(values, dt, h, left, right):
    """Values of ``t -> v(t + h)`` on the grid of `values`.

    Grid-multiple shifts are pure index shifts (exact); others interpolate.
    """
    exact, k = _grid_multiple(h, dt)
    if exact:
        if k == 0:
            return values.copy()
        out = np.empty_like(values)
        if k > 0:
            out[:-k] = values[k:]
            out[-k:] = right
        else:
            out[-k:] = values[:k]
            out[:-k] = left
        return out
    return sample(values, 0.0, dt, dt * np.arange(values.size) + h, left, right)


@dataclass(frozen=True)
class Kernel:
    """Green function on the lags ``k dt``, ``|k| < n``, plus its running integral.

    `cumulative` is the trapezoid running integral (with the analytic left
    tail) and `trap_total` its full-line value.  Because ``G'`` jumps by
    ``1/D`` at lag 0, the trapezoid rule misses ``int G = -1/b`` by
    ``kink_defect``, of order ``dt^2 / (12 D)``; adding ``kink_defect * f(t)``
    restores the integral for constants exactly and raises the order for
    smooth forcings.
    """

    params: OperatorParams
    dt: float
    n: int
    g: np.ndarray
    cumulative: np.ndarray
    trap_total: float

    @property
    def kink_defect(self) -> float:
        return -1.0 / self.params.b - self.trap_total


@functools.lru_cache(maxsize=32)
def kernel(params: OperatorParams, dt: float, n: int) -> Kernel:
    _green.require_hyperbolic(params)
    lags = dt * np.arange(-(n - 1), n)
    lags[n - 1] = 0.0
    g = _green.green(params, lags, hybrid=True)
    if np.any(g >= 0):
        bad = lags[np.argmax(g >= 0)]
        raise MissingCertificate(f"Green function not negative at t={bad:g} for {params}")
    band = _green.quadrature_band(params)
    if lags[0] >= -band:
        raise MissingCertificate("grid window is shorter than the quadrature band")
    eta = _green.principal_roots(params)
    head = float(_green.green_left_exponential(params, lags[0])) / eta.eta1
    cum = head + np.concatenate([[0.0], np.cumsum(0.5 * dt * (g[1:] + g[:-1]))])
    # beyond the last lag G is the exact residue exponential
    tail = -float(_green.green_residue(params, lags[-1])) / eta.eta2
    return Kernel(params, dt, n, g, cum, float(cum[-1] + tail))


TAIL_FIT_POINTS = 10


def left_tail_rate(f: GridFunction) -> float | None:
    """Exponential rate ``nu > 0`` with ``f - left_limit ~ e^{nu t}`` at the window start.

    Fitted from the first `TAIL_FIT_POINTS` samples; None when the samples do
    not decay monotonically towards the limit.
    """
    k = min(TAIL_FIT_POINTS, f.n - 1)
    d0 = f.values[0] - f.left_limit
    dk = f.values[k] - f.left_limit
    if d0 == 0 or dk == 0 or (d0 > 0) != (dk > 0) or abs(dk) <= abs(d0):
        return None
    return math.log(dk / d0) / (k * f.dt)


def apply_green(params: OperatorParams, f: GridFunction, left_tail: str = "constant") -> GridFunction:
    """The bounded solution ``x = G * f`` on the grid of `f`.

    The integral is a trapezoid sum over the whole line, with `f` continued
    by its limits outside the window (those parts come from the running
    integral of the kernel), plus the kink correction described in
    :class:`Kernel`.  Output limits are ``-left_limit / b`` and
    ``-right_limit / b``.

    With ``left_tail="exponential"``, `f` is continued below the window by
    ``L + (f(t_0) - L) e^{nu (t - t_0)}`` with `nu` from :func:`left_tail_rate`.
    For ``t`` in the window the lags involved are positive, where ``G`` is the
    residue exponential, so the trapezoid sum over this continuation is a
    geometric series.

    Raises
    ------
    MissingCertificate
        If hyperbolicity or negativity of G cannot be certified.
    """
    if left_tail not in ("constant", "exponential"):
        raise ValueError(f"unknown left_tail mode {left_tail!r}")
    n = f.n
    K = kernel(params, float(f.dt), n)
    w = f.values.copy()
    w[0] *= 0.5
    w[-1] *= 0.5
    # direct summation: G < 0 and typical forcings have one sign, so every
    # sample keeps full relative accuracy (an FFT would not, deep in the tails)
    x = np.convolve(w, K.g)[n - 1:2 * n - 1] * f.dt
    # s past the window end: lag t_i - s runs below t_i - t_end (index i)
    x += f.right_limit * K.cumulative[:n]
    # s before the window start: lag runs above t_i - t_start (index i + n - 1)
    x += f.left_limit * (K.trap_total - K.cumulative[n - 1:])
    x += K.kink_defect * f.values
    nu = left_tail_rate(f) if left_tail == "exponential" else None
    if nu is not None:
        # trapezoid nodes below t_0 see G(u + j dt) = G(u) e^{eta2 j dt}: a geometric sum
        eta2 = _green.principal_roots(params).eta2
        q = math.exp((eta2 - nu) * f.dt)
        u = np.maximum(f.t - f.t0, 1e-300)
        x += (f.values[0] - f.left_limit) * f.dt * _green.green_residue(params, u) \
            * (1.0 + q) / (2.0 * (1.0 - q))
    return f.like(x, -f.left_limit / params.b, -f.right_limit / params.b)


def derivatives(x: GridFunction):
    """Centered first and second differences (interior entries; ends copied)."""
    v, dt = x.values, x.dt
    d1 = np.empty_like(v)
    d2 = np.empty_like(v)
    d1[1:-1] = (v[2:] - v[:-2]) / (2 * dt)
    d2[1:-1] = (v[2:] - 2 * v[1:-1] + v[:-2]) / dt**2
    d1[0], d1[-1] = d1[1], d1[-2]
    d2[0], d2[-1] = d2[1], d2[-2]
    return d1, d2


def check_shift_resolution(r: float, dt: float):
    exact, _ = _grid_multiple(r, dt)
    if r > 0 and not exact and dt > r / 2:
        raise GridTooCoarse(f"dt={dt} > r/2={r / 2} and r is not a grid multiple")


def operator_values(params: OperatorParams, x: GridFunction) -> tuple[np.ndarray, np.ndarray]:
    """``D x'' - a x'(t+r) - b x(t+r)`` and the mask of trustworthy entries."""
    check_shift_resolution(params.r, x.dt)
    d1, d2 = derivatives(x)
    d1s = shift_values(d1, x.dt, params.r, 0.0, 0.0)
    xs = shift_values(x.values, x.dt, params.r, x.left_limit, x.right_limit)
    lx = params.D * d2 - params.a * d1s - params.b * xs
    ok = np.zeros(x.n, dtype=bool)
    reach = int(math.ceil(params.r / x.dt - 1e-9)) + 2
    ok[2:x.n - 2 - reach] = True
    return lx, ok


def residual(params: OperatorParams, x: GridFunction, f: GridFunction) -> float:
    """Sup over the interior of ``|D x'' - a x'(t+r) - b x(t+r) - f|``."""
    lx, ok = operator_values(params, x)
    return float(np.max(np.abs(lx - f.values)[ok]))
