"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

These are full-size reproductions of the reference studies (grids up to 81
points, ~3e5 explicit steps), so the module takes tens of minutes.  Run it
with `pytest tests/test_acceptance.py -v -s`.  Worker processes are used
for independent runs; set FPSP2D_WORKERS to control parallelism.
"""

import math

import numpy as np
import pytest

from fpsp2d.diagnostics import entropy_flux_identity_check, relative_entropy
from fpsp2d.flux import (CoefficientBuilder, assemble_fluxes,
                         chang_cooper_delta, exact_interface_coefficients)
from fpsp2d.grid import DensityField, QuadratureRule, parse_rule
from fpsp2d.model import builtin_test1, builtin_test2
from fpsp2d.stepper import (SchemeConfig, TimeStepPolicy, cfl_explicit,
                            cfl_semi_implicit, run, step_explicit,
                            step_semi_implicit)
from fpsp2d.studies import RunSetup, batch_convergence, entropy_study, execute

RULES = ("nc2", "nc4", "nc6", "gauss8")
GRIDS = (21, 41, 81)


def report(criterion, ok, detail):
    print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {criterion}: {detail}")


def in_band(value, center, width):
    return value is not None and abs(value - center) <= width


# ---------------------------------------------------------------- fixtures

@pytest.fixture(scope="module")
def table1_data():
    bases = [RunSetup(kind="test1", rho=0.1, d=12.5, quadrature=q,
                      integrator=integ, dt_policy="table1")
             for integ in ("euler", "rk4") for q in RULES]
    outcomes = batch_convergence(bases, GRIDS, (20.0,))
    return {(b.integrator, b.quadrature): o for b, o in zip(bases, outcomes)}


@pytest.fixture(scope="module")
def table2_data():
    bases = [RunSetup(kind="test1", rho=0.1, d=12.5, quadrature=q,
                      integrator="si1", dt_policy="fig1") for q in RULES]
    out_r01 = batch_convergence(bases, GRIDS, (20.0,))
    bases9 = [RunSetup(kind="test1", rho=0.9, d=12.5, quadrature=q,
                       integrator="si1", dt_policy="fig1") for q in RULES]
    out_r09 = batch_convergence(bases9, GRIDS, (50.0,))
    return ({b.quadrature: o for b, o in zip(bases, out_r01)},
            {b.quadrature: o for b, o in zip(bases9, out_r09)})


@pytest.fixture(scope="module")
def fig1_data():
    setups = [RunSetup(kind="test1", rho=0.9, d=12.5, points=81, quadrature=q,
                       integrator="si1", dt_policy="fig1", t_final=80.0,
                       observer_stride=400) for q in ("gauss8", "nc6", "nc2")]
    from fpsp2d.studies import run_many
    results = run_many(setups)
    return {s.quadrature: r for s, r in zip(setups, results)}


@pytest.fixture(scope="module")
def entropy_data():
    base = RunSetup(kind="test1", rho=0.9, d=12.5, quadrature="gauss8",
                    integrator="si1", dt_policy="fig1", t_final=10.0)
    return entropy_study(base, (10, 20))


@pytest.fixture(scope="module")
def test2_data():
    bases = []
    for integ, policy in (("euler", "table1"), ("rk4", "table1"),
                          ("si1", "fig1"), ("si2", "fig1")):
        bases.extend(RunSetup(kind="test2", rho=0.1, quadrature=q,
                              integrator=integ, dt_policy=policy)
                     for q in RULES)
    outcomes = batch_convergence(bases, GRIDS, (20.0,))
    return {(b.integrator, b.quadrature): o for b, o in zip(bases, outcomes)}


# ---------------------------------------------------------------- criteria

def test_criterion_01_table1_explicit_orders(table1_data):
    targets = {"nc2": (1.9662, 0.3), "nc4": (3.9708, 0.3),
               "nc6": (7.477, 0.8), "gauss8": (8.145, 0.8)}
    cells = []
    ok = True
    for integ in ("euler", "rk4"):
        for q in RULES:
            order = table1_data[(integ, q)].rows[0].order
            center, width = targets[q]
            good = in_band(order, center, width)
            ok &= good
            cells.append(f"{integ}/{q}={order:.4f}{'' if good else '!'}")
    report(1, ok, "Table-1 orders at T=20 (target +/- tol): " + ", ".join(cells))
    assert ok, "observed orders outside the Table-1 bands: " + ", ".join(cells)


def test_criterion_02_table2_semi_implicit_orders(table2_data):
    r01, r09 = table2_data
    targets_01 = {"nc2": (1.9662, 0.3), "nc4": (3.9708, 0.3),
                  "nc6": (7.4769, 0.8), "gauss8": (7.9144, 0.8)}
    targets_09 = {"nc2": (1.9621, 0.8), "nc4": (3.9800, 0.8),
                  "nc6": (6.2146, 0.8), "gauss8": (7.8973, 0.8)}
    cells = []
    ok = True
    for q in RULES:
        order = r01[q].rows[0].order
        good = in_band(order, *targets_01[q])
        ok &= good
        cells.append(f"rho0.1/{q}={order:.4f}{'' if good else '!'}")
    for q in RULES:
        order = r09[q].rows[0].order
        good = in_band(order, *targets_09[q])
        ok &= good
        cells.append(f"rho0.9/{q}={order:.4f}{'' if good else '!'}")
    report(2, ok, "Table-2 semi-implicit orders: " + ", ".join(cells))
    assert ok, "observed orders outside the Table-2 bands: " + ", ".join(cells)


def test_criterion_03_fig1_error_decay(fig1_data):
    details = []
    ok = True
    finals = {}
    for q in ("gauss8", "nc6", "nc2"):
        errors = np.array(fig1_data[q].report.rel_L1_error)
        times = np.array(fig1_data[q].report.times)
        finals[q] = errors[-1]
        # monotone nonincreasing after the initial transient (t >= 5),
        # with round-off slack at the plateau
        tail = errors[times >= 5.0]
        mono = bool(np.all(tail[1:] <= tail[:-1] * (1 + 1e-3) + 1e-14))
        ok &= mono
        details.append(f"{q}: final={errors[-1]:.3e} monotone={mono}")
    ok &= finals["gauss8"] <= 1e-11 and finals["nc6"] <= 1e-11
    ok &= finals["nc2"] > 1e-6
    report(3, ok, "; ".join(details))
    assert ok, details


def test_criterion_04_entropy_decay(entropy_data):
    details = []
    ok = True
    for points, rows in entropy_data.items():
        h = [r.H_delta for r in rows]
        increases = sum(1 for a, b in zip(h, h[1:]) if b > a + 1e-12)
        nonneg_i = all(r.I_delta >= 0.0 for r in rows)
        ok &= increases == 0 and nonneg_i
        details.append(f"N={points}: steps={len(h) - 1}, entropy increases={increases}, "
                       f"I>=0={nonneg_i}")
    report(4, ok, "; ".join(details))
    assert ok, details


def test_criterion_05_test2_orders_bounded(test2_data):
    cells = []
    ok = True
    for (integ, q), outcome in test2_data.items():
        order = outcome.rows[0].order
        good = order is not None and 1.8 <= order <= 4.5
        ok &= good
        cells.append(f"{integ}/{q}={order:.4f}{'' if good else '!'}")
    report(5, ok, "Test-2 successive-refinement orders at T=20: " + ", ".join(cells))
    assert ok, cells


def test_criterion_06_steady_state_preservation():
    # (a) exact weights on arbitrary positive fields
    rng = np.random.default_rng(202)
    from fpsp2d.grid import Grid2D
    grid = Grid2D(-1.0, 1.0, 16)
    worst = 0.0
    for _ in range(20):
        v = np.exp(rng.normal(scale=1.5, size=(17, 17)))
        f = DensityField(grid, v)
        fl = assemble_fluxes(f, exact_interface_coefficients(f))
        worst = max(worst, max(np.abs(fl.fx).max(), np.abs(fl.fy).max()) / v.max())
    exact_ok = worst <= 1e-13

    # (b) quadrature-weight residual decays at the design order on Test 1
    orders = {}
    residuals = {}
    for q in RULES:
        rule = parse_rule(q)
        res = []
        for n in (16, 32, 64):
            p = builtin_test1(rho=0.9, d=12.5, N=n)
            co = CoefficientBuilder(p, rule).build(p.f0.values)
            fl = assemble_fluxes(p.f_inf, co)
            res.append(max(np.abs(fl.fx).max(), np.abs(fl.fy).max()))
        residuals[q] = res
        orders[q] = (math.log2(res[0] / res[1]) + math.log2(res[1] / res[2])) / 2.0
    bands_ok = (abs(orders["nc2"] - 2) <= 0.5 and abs(orders["nc4"] - 4) <= 0.5
                and abs(orders["nc6"] - 6) <= 0.5)
    gauss_ok = orders["gauss8"] >= 7.0
    ok = exact_ok and bands_ok and gauss_ok
    report(6, ok,
           f"exact-weight residual {worst:.2e} (<=1e-13); quadrature residual orders "
           + ", ".join(f"{q}={orders[q]:.2f}" for q in RULES)
           + f"; gauss8 residuals {[f'{r:.1e}' for r in residuals['gauss8']]}")
    assert ok, (worst, orders)


def test_criterion_07_positivity_random_fields():
    p = builtin_test1(rho=0.9, d=12.5, N=16)
    builder = CoefficientBuilder(p, QuadratureRule.GAUSS_LEGENDRE_8)
    coeffs = builder.build(None)
    dt_e = cfl_explicit(coeffs, p.grid.dw)
    dt_si = cfl_semi_implicit(coeffs, p.grid.dw)
    rng = np.random.default_rng(7)
    negatives = 0
    for trial in range(200):
        v = rng.random((17, 17)) * rng.integers(0, 2, size=(17, 17))
        ve = v.copy()
        vs = v.copy()
        for _ in range(100):
            ve = step_explicit(ve, p, QuadratureRule.GAUSS_LEGENDRE_8, dt_e,
                               "euler", builder=builder)
        for _ in range(100):
            vs = step_semi_implicit(vs, p, QuadratureRule.GAUSS_LEGENDRE_8, dt_si,
                                    order=1, builder=builder)
        negatives += int(ve.min() < 0.0) + int(vs.min() < 0.0)
    ok = negatives == 0
    report(7, ok, f"200 random fields x 100 steps (euler + semi-implicit): "
                  f"{negatives} runs with negative entries")
    assert ok


def test_criterion_08_mass_conservation(table1_data, table2_data, test2_data,
                                        fig1_data):
    drifts = []
    for label, data in (("table1", table1_data), ("test2", test2_data)):
        for key, outcome in data.items():
            drifts.extend((f"{label}/{key}", s.mass_drift) for s in outcome.runs)
    for block in table2_data:
        for q, outcome in block.items():
            drifts.extend((f"si1/{q}", s.mass_drift) for s in outcome.runs)
    for q, res in fig1_data.items():
        m = res.report.mass
        drifts.append((f"fig1/{q}", abs(m[-1] - m[0]) / abs(m[0])))
    worst_label, worst = max(drifts, key=lambda kv: kv[1])
    ok = worst <= 1e-10
    report(8, ok, f"{len(drifts)} runs; worst relative mass drift "
                  f"{worst:.2e} ({worst_label})")
    assert ok


def test_criterion_09_weight_function_properties():
    rng = np.random.default_rng(99)
    lam = rng.uniform(-700.0, 700.0, size=100_000)
    d = chang_cooper_delta(lam)
    inside = bool(np.all((d > 0.0) & (d < 1.0)))
    at_zero = chang_cooper_delta(0.0) == 0.5
    reflect = bool(np.all(np.abs(chang_cooper_delta(-lam) - (1.0 - d)) <= 2e-13))
    from fpsp2d.flux import _SERIES_CUTOFF
    switch = max(abs(chang_cooper_delta(s) - (1.0 / s - 1.0 / np.expm1(s)))
                 for s in (_SERIES_CUTOFF, -_SERIES_CUTOFF))
    switch_ok = switch <= 1e-12
    ok = inside and at_zero and reflect and switch_ok
    report(9, ok, f"1e5 samples in [-700,700]: in (0,1)={inside}, delta(0)=1/2={at_zero}, "
                  f"reflection={reflect}, series/closed gap {switch:.2e}")
    assert ok


def test_criterion_10_chang_cooper_reduction():
    from fpsp2d.grid import nodes_and_weights
    p = builtin_test1(sigma1=1.0, sigma2=1.0, rho=0.0, d=5.0, N=16)
    rule = QuadratureRule.GAUSS_LEGENDRE_8
    rng = np.random.default_rng(3)
    d = p.diffusion
    drift = p.drift
    grid = p.grid
    nodes, mids, dw = grid.nodes(), grid.midpoints(), grid.dw

    def bx(x, y):
        return (-(d.dx_d11(x, y) + d.dy_d21(x, y))
                - (d.d11(x, y) * drift.grad_phi[0](x, y)
                   + d.d12(x, y) * drift.grad_phi[1](x, y)))

    def cc_flux_1d(row, y):
        out = np.zeros(grid.N)
        for i in range(grid.N):
            lam = sum(w * (bx(x, y) + d.dx_d11(x, y)) / d.d11(x, y)
                      for x, w in nodes_and_weights(rule, nodes[i], nodes[i + 1]))
            delt = chang_cooper_delta(lam)
            dmid = d.d11(mids[i], y)
            ftilde = (1 - delt) * row[i + 1] + delt * row[i]
            out[i] = dmid / dw * lam * ftilde + dmid * (row[i + 1] - row[i]) / dw
        return out

    builder = CoefficientBuilder(p, rule)
    worst = 0.0
    for _ in range(5):
        v = rng.random((17, 17)) + 0.2
        fl = assemble_fluxes(v, builder.build(v))
        scale = max(np.abs(fl.fx).max(), np.abs(fl.fy).max())
        for j in range(17):
            ref = cc_flux_1d(v[:, j], nodes[j])
            worst = max(worst, np.abs(fl.fx[1:-1, j] - ref).max() / scale)
        for i in range(17):
            ref = cc_flux_1d(v[i, :], nodes[i])
            worst = max(worst, np.abs(fl.fy[i, 1:-1] - ref).max() / scale)
    ok = worst <= 1e-13
    report(10, ok, f"diagonal-diffusion fluxes vs independent 1D Chang-Cooper: "
                   f"max relative deviation {worst:.2e}")
    assert ok


def test_criterion_11_entropy_flux_identity_and_balance():
    # (a) logarithmic-mean flux form agrees with assembled fluxes
    p = builtin_test1(rho=0.7, d=6.0, N=8)
    b = CoefficientBuilder(p, QuadratureRule.GAUSS_LEGENDRE_8)
    co = exact_interface_coefficients(p.f_inf, b.Dcal_x, b.Dcal_y)
    rng = np.random.default_rng(17)
    worst = 0.0
    for _ in range(10):
        f = DensityField(p.grid, rng.random((9, 9)) + 0.05)
        scale = f.values.max() / p.grid.dw
        worst = max(worst, entropy_flux_identity_check(f, p.f_inf, co) / scale)
    identity_ok = worst <= 1e-12

    # (b) |finite-difference dH/dt + I| = O(dt) over the first 100 steps,
    # with the constant estimated from a dt-halving pair
    problem = builtin_test1(rho=0.5, d=12.5, N=32)
    scheme = SchemeConfig("euler", QuadratureRule.GAUSS_LEGENDRE_8)

    def mismatch(dt):
        policy = TimeStepPolicy(mode="fixed", dt=dt, T_final=100 * dt)
        res = run(problem, scheme, policy, observer_stride=1)
        rep = res.report
        worst_gap = 0.0
        for k in range(1, len(rep.times)):
            fd = (rep.entropy[k] - rep.entropy[k - 1]) / (rep.times[k] - rep.times[k - 1])
            i_mid = rep.dissipation[k - 1]
            worst_gap = max(worst_gap, abs(fd + i_mid))
        return worst_gap

    builder = CoefficientBuilder(problem, QuadratureRule.GAUSS_LEGENDRE_8)
    dt0 = 0.5 * cfl_explicit(builder.build(None), problem.grid.dw)
    m1, m2 = mismatch(dt0), mismatch(dt0 / 2)
    c_est = m2 / (dt0 / 2)
    balance_ok = m1 <= 1.5 * c_est * dt0  # first-order scaling with slack
    ok = identity_ok and balance_ok
    report(11, ok, f"flux identity deviation {worst:.2e} (<=1e-12); "
                   f"entropy balance |dH/dt + I|: {m1:.3e} at dt, {m2:.3e} at dt/2 "
                   f"(ratio {m1 / m2:.2f}, first-order bound ok={balance_ok})")
    assert ok, (worst, m1, m2)
