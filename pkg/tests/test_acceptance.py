"""Acceptance criteria 1-12 at their stated tolerances.

Each test records one PASS/FAIL line, echoed at the end of the pytest run
(and printed directly when the file is run as a script).
"""
import math
import time

import numpy as np
import pytest

from delaywave import charpoly, green, models, perron, simulate, waves
from delaywave.green import OperatorParams
from delaywave.perron import GridFunction

from conftest import ACCEPTANCE_LINES, FISHER


def record(n, ok, detail):
    line = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES[n] = line
    print(line)
    assert ok, line


NEG_SETS = [(2.5, 1.0), (3.0, 2.0)]


def test_c01_closed_form_green():
    p = OperatorParams(1.0, 2.0, 0.0)
    t = np.linspace(-10, 10, 200)
    start = time.perf_counter()
    q = np.array([green.green_quadrature(p, ti) for ti in t])
    elapsed = time.perf_counter() - start
    err = float(np.max(np.abs(q - green.green_nodelay(1.0, 2.0, t))))
    record(1, err <= 1e-8 and elapsed < 10,
           f"max |quadrature - closed form| = {err:.2e} (<= 1e-8), {elapsed:.1f} s (< 10 s)")


def test_c02_negativity():
    worst, spot = -math.inf, 0.0
    for a, b in NEG_SETS:
        for r in (0.0, 0.005, 0.01, 0.02):
            p = OperatorParams(a, b, r)
            tab = green.green_table(p, -30, 30, 0.01, hybrid=True)
            assert tab.t.size == 6001
            worst = max(worst, float(tab.values.max()))
            # the tabulated closed-form pieces agree with quadrature
            for ti in (-25.0, -3.0, -0.5, 0.5, 3.0):
                i = int(round((ti + 30) / 0.01))
                spot = max(spot, abs(tab.values[i] - green.green_quadrature(p, tab.t[i])))
    record(2, worst < 0 and spot < 1e-8,
           f"max G over 8 tables of 6001 samples = {worst:.3e} (< 0); "
           f"spot checks vs quadrature {spot:.1e}")


def test_c03_residue_vs_quadrature():
    worst = 0.0
    for a, b, r in [(1.0, 2.0, 0.01), (3.0, 2.0, 0.1), (2.5, 1.0, 0.02)]:
        p = OperatorParams(a, b, r)
        for t in np.linspace(0.25, 10, 40):
            q = green.green_quadrature(p, t)
            worst = max(worst, abs(green.green_residue(p, t) - q) / abs(q))
    record(3, worst <= 1e-6, f"max relative error = {worst:.2e} (<= 1e-6)")


def test_c04_hyperbolicity():
    worst = 0.0
    for a, b in NEG_SETS:
        for r in (0.0, 0.005, 0.01, 0.02, 0.05, 0.1):
            worst = max(worst, charpoly.imaginary_axis_margin(a, b, r, 200.0))
    record(4, worst < 1, f"max imaginary-axis ratio = {worst:.4f} (< 1)")


def test_c05_strip_counts():
    counts = []
    for a, b in [(1.0, 2.0)] + NEG_SETS:
        lam1, lam2 = charpoly.roots_nodelay(a, b)
        for r in (0.01, 0.05):
            P = charpoly.char_poly(a, b, r)
            counts.append(charpoly.winding_count(P, charpoly.Rectangle(0, 2 * lam1, -50, 50)))
            counts.append(charpoly.winding_count(P, charpoly.Rectangle(2 * lam2, 0, -50, 50)))
    ok = all(isinstance(c, int) and c == 1 for c in counts)
    record(5, ok, f"winding counts {counts} (all exactly 1)")


def _cosine_case(dt):
    p = OperatorParams(1.0, 2.0, 0.01)
    # x = Re(e^{it} / P(i)) solves the equation with f = cos t exactly
    amp = 1.0 / complex(p.P(1j))
    f = GridFunction.from_callable(np.cos, -60, 60, dt)
    x = perron.apply_green(p, f)
    t = f.t
    inner = np.abs(t) <= 20  # window-edge effects are below e^{-40} here
    exact = (amp * np.exp(1j * t)).real
    return perron.residual(p, x, f), float(np.max(np.abs(x.values - exact)[inner]))


def test_c06_perron():
    p = OperatorParams(1.0, 2.0, 0.01)
    one = GridFunction.from_callable(lambda t: np.ones_like(t), -60, 60, 0.01, 1.0, 1.0)
    const_err = float(np.max(np.abs(perron.apply_green(p, one).values + 0.5)))
    r1, e1 = _cosine_case(0.01)
    r2, e2 = _cosine_case(0.005)
    slope = math.log2(r1 / r2)
    ok = const_err <= 1e-8 and r1 <= 1e-4 and r2 <= 2.5e-5 and slope >= 1.8
    record(6, ok, f"const error {const_err:.1e}; residual {r1:.2e} (dt=0.01), {r2:.2e} "
                  f"(dt=0.005), slope {slope:.2f}; solution error {e1:.1e}")


def test_c07_monotone_operator():
    p = OperatorParams(1.0, 2.0, 0.01)
    rng = np.random.default_rng(7)
    t = np.arange(-30, 30 + 1e-9, 0.01)
    worst = -math.inf
    for _ in range(20):
        # smooth random f plus a nonnegative bump gives g >= f
        coef = rng.normal(size=(3, 2))
        f = sum(c[0] * np.sin((k + 1) * 0.3 * t + c[1]) for k, c in enumerate(coef))
        g = f + rng.uniform(0, 1) * np.exp(-((t - rng.uniform(-20, 20)) / rng.uniform(0.5, 5)) ** 2)
        F = perron.apply_green(p, GridFunction(t[0], 0.01, f, f[0], f[-1]))
        Gv = perron.apply_green(p, GridFunction(t[0], 0.01, g, g[0], g[-1]))
        worst = max(worst, float(np.max(Gv.values - F.values)))
    record(7, worst <= 1e-10, f"max of apply_green(g) - apply_green(f) = {worst:.2e} (<= 1e-10)")


def test_c08_fisher_candidates():
    params = models.FisherParams(c=2.5, theta=0.5, k=2, tau1=0.004, tau2=0.004)
    model, upper, lower = models.fisher_candidates(params)
    up = waves.verify_upper(model, upper, tol=1e-8)
    lo = waves.verify_lower(model, lower, kink_set=lower.kinks, tol=1e-8)
    half = waves.Profile.from_callables([lambda t: np.full_like(t, 0.5)], -60, 60, 0.01)
    ctrl = waves.verify_upper(model, half, tol=1e-8)
    ok = up.passed and lo.passed and not ctrl.passed
    record(8, ok, f"upper max violation {up.max_violation:.1e}, lower {lo.max_violation:.1e}; "
                  f"constant-1/2 control fails by {ctrl.max_violation:.2f}")


def test_c09_fisher_wave():
    start = time.perf_counter()
    model, upper, lower = models.fisher(FISHER, upper_rate="neutral")
    phi, rep = waves.iterate(model, upper, lower, tol=1e-6, max_iter=200)
    elapsed = time.perf_counter() - start
    v = phi[0].values
    mind = float(np.min(np.diff(v)))
    res = waves.validate_wave(model, phi).residual
    lims = (phi[0].left_limit, phi[0].right_limit)
    ok = (rep.iterations <= 200 and rep.deltas[-1] <= 1e-6 and mind >= -1e-9
          and abs(lims[0]) <= 1e-3 and abs(lims[1] - 1) <= 1e-3 and res <= 1e-4 and elapsed < 300)
    record(9, ok, f"{rep.iterations} iterations from the neutral-rate upper solution, "
                  f"delta {rep.deltas[-1]:.1e}, min diff {mind:.1e}, limits {lims}, "
                  f"residual {res:.1e}, {elapsed:.0f} s")


def test_c10_bz_wave():
    params = models.BZParams(c=3.0, b=2.0, r=0.25, k=2, tau1=0.01 / 3, tau2=0.01 / 3)
    model, up_c, lo_c = models.bz_candidates(params, upper="two_sided")
    up = waves.verify_upper(model, up_c, kink_set=up_c.kinks)
    lo = waves.verify_lower(model, lo_c, kink_set=lo_c.kinks)
    model, upper, lower = models.bz(params, upper="neutral")
    phi, rep = waves.iterate(model, upper, lower, tol=1e-6)
    vals = np.concatenate([g.values for g in phi.components])
    in_range = vals.min() >= -1e-9 and vals.max() <= 1 + 1e-9
    mono = min(float(np.min(np.diff(g.values))) for g in phi.components) >= -1e-9
    res = waves.validate_wave(model, phi).residual
    ok = up.passed and lo.passed and in_range and mono and res <= 1e-3
    record(10, ok, f"quasi-upper {up.max_violation:.1e}, sub {lo.max_violation:.1e} off kinks; "
                   f"{rep.iterations} iterations from the neutral upper solution, "
                   f"range [{vals.min():.1e}, {vals.max():.6f}], residual {res:.1e}")


def test_c11_pde_cross_validation(fisher_wave):
    model, _, _, phi, _ = fisher_wave
    T = 5.0
    traj = simulate.run(model, phi, T)
    speed = -simulate.wave_speed_estimate(traj)
    x = traj.final.x
    dist = float(np.max(np.abs(traj.final.u[0] - phi[0](x + model.c * T))))
    ok = abs(speed - model.c) <= 0.05 * model.c and dist <= 5e-2
    record(11, ok, f"speed {speed:.5f} vs c = {model.c} (front moves left); "
                   f"sup distance to shifted profile {dist:.1e} (dx = {traj.final.dx:.2f})")


def test_c12_translation_equivariance(fisher_wave):
    model, upper, _, phi, _ = fisher_wave
    dt = phi.dt
    F = waves.F_op(model, phi)
    inner = np.abs(phi.t) <= 50
    grid_err = 0.0
    for k in (1, 5, -30):
        d = np.abs(waves.F_op(model, phi.shifted(k * dt))[0].values - F.shifted(k * dt)[0].values)
        grid_err = max(grid_err, float(np.max(d[inner])))
    d = np.abs(waves.F_op(model, phi.shifted(0.5 * dt))[0].values - F.shifted(0.5 * dt)[0].values)
    off = float(np.max(d))
    record(12, grid_err <= 1e-13 and off <= 1e-6,
           f"grid shifts {grid_err:.1e} (rounding, away from window edges); h = dt/2: {off:.1e} (<= 1e-6)")


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
