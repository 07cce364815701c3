import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import quad

from fpsp2d.errors import NotPositiveDefiniteError
from fpsp2d.flux import (CoefficientBuilder, assemble_fluxes,
                         chang_cooper_delta, compute_lambda, divergence,
                         effective_diffusions, exact_interface_coefficients)
from fpsp2d.grid import DensityField, Grid2D, QuadratureRule, nodes_and_weights
from fpsp2d.model import (DiffusionSpec, LinearDrift, ProblemSpec,
                          builtin_test1, builtin_test2)

GAUSS = QuadratureRule.GAUSS_LEGENDRE_8
MID = QuadratureRule.MIDPOINT


def constant_diffusion(d11=1.0, d12=0.0, d22=1.0):
    zero = lambda x, y: 0.0 * x * y
    return DiffusionSpec(
        d11=lambda x, y: d11 + 0.0 * x * y,
        d12=lambda x, y: d12 + 0.0 * x * y,
        d22=lambda x, y: d22 + 0.0 * x * y,
        dx_d11=zero, dy_d21=zero, dx_d12=zero, dy_d22=zero)


def uniform_problem(grid, diffusion, drift):
    f0 = DensityField(grid, np.ones((grid.N + 1, grid.N + 1))).normalized()
    return ProblemSpec(grid, diffusion, drift, f0)


class TestEffectiveDiffusions:
    def test_diagonal_case_reduces_to_entries(self):
        p = builtin_test1(rho=0.0, N=8)
        dx, dy = effective_diffusions(p.diffusion, p.grid)
        mid = p.grid.midpoints()
        nod = p.grid.nodes()
        assert np.allclose(dx, p.diffusion.d11(mid[:, None], nod[None, :]))
        assert np.allclose(dy, p.diffusion.d22(nod[:, None], mid[None, :]))

    def test_schur_value_at_origin(self):
        # D11 - D12^2/D22 = 1/2 - (0.9/4)^2/(1/2) = 0.39875 at w = 0
        p = builtin_test1(rho=0.9, N=8)
        d11, d12, d22 = p.diffusion.entries(0.0, 0.0)
        assert d11 - d12 ** 2 / d22 == pytest.approx(0.39875, abs=1e-15)
        dx, _ = effective_diffusions(p.diffusion, p.grid)
        # interface next to the origin row: interpolate the formula directly
        mid = p.grid.midpoints()
        j0 = p.grid.N // 2
        a, b, c = p.diffusion.entries(mid[3], p.grid.nodes()[j0])
        assert dx[3, j0] == pytest.approx(a - b * b / c, rel=1e-14)

    def test_axis_swap_symmetry(self):
        p = builtin_test1(sigma1=1.0, sigma2=1.0, rho=0.7, N=8)
        dx, dy = effective_diffusions(p.diffusion, p.grid)
        assert np.allclose(dx, dy.T)

    def test_positivity_enforced(self):
        # rho close to 2 makes the Schur complement negative for this family
        diff = DiffusionSpec(
            d11=lambda x, y: 1.0 + 0 * x * y,
            d12=lambda x, y: 1.5 + 0 * x * y,
            d22=lambda x, y: 1.0 + 0 * x * y)
        with pytest.raises(NotPositiveDefiniteError):
            effective_diffusions(diff, Grid2D(-1, 1, 4))


class TestComputeLambda:
    def test_zero_drift_constant_diffusion(self):
        grid = Grid2D(-1, 1, 6)
        p = uniform_problem(grid, constant_diffusion(1.0, 0.0, 2.0),
                            LinearDrift(lambda x, y: 0 * x * y, lambda x, y: 0 * x * y))
        lx, ly = compute_lambda(p, p.f0, GAUSS)
        assert np.allclose(lx, 0.0) and np.allclose(ly, 0.0)

    def test_midpoint_exact_for_affine_drift_constant_diffusion(self):
        grid = Grid2D(-1, 1, 5)
        drift = LinearDrift(lambda x, y: 0.3 + 1.2 * x - 0.5 * y,
                            lambda x, y: -0.2 + 0.4 * x + 1.0 * y)
        p = uniform_problem(grid, constant_diffusion(2.0, 0.5, 1.0), drift)
        lm_x, lm_y = compute_lambda(p, p.f0, MID)
        lg_x, lg_y = compute_lambda(p, p.f0, GAUSS)
        assert np.allclose(lm_x, lg_x, atol=1e-14)
        assert np.allclose(lm_y, lg_y, atol=1e-14)

    @staticmethod
    def _lambda_error_vs_adaptive(rule, n):
        # diagonal-diffusion problem: lambda_x = int (B^x + dx D11)/D11 dx
        p = builtin_test1(sigma1=1.0, sigma2=1.0, rho=0.0, d=3.0, N=n)
        lx, _ = compute_lambda(p, p.f0, rule)
        d = p.diffusion
        drift = p.drift
        nodes = p.grid.nodes()
        j = n // 2
        y = nodes[j]

        def integrand(x):
            bx = (-(d.dx_d11(x, y) + d.dy_d21(x, y))
                  - (d.d11(x, y) * drift.grad_phi[0](x, y)
                     + d.d12(x, y) * drift.grad_phi[1](x, y)))
            return (bx + d.dx_d11(x, y) + d.dy_d21(x, y)) / d.d11(x, y)

        worst = 0.0
        for i in range(n):
            ref, _ = quad(integrand, nodes[i], nodes[i + 1], epsabs=1e-14, epsrel=1e-13)
            worst = max(worst, abs(lx[i, j] - ref))
        return worst

    @pytest.mark.parametrize("rule,cell_order", [
        (QuadratureRule.OPEN_NEWTON_COTES_2, 3.0),
        (QuadratureRule.OPEN_NEWTON_COTES_4, 5.0),
        (QuadratureRule.OPEN_NEWTON_COTES_6, 7.0),
    ])
    def test_against_adaptive_quadrature_oracle(self, rule, cell_order):
        # per-cell error of a degree-d rule decays like h^(d+2)
        e8 = self._lambda_error_vs_adaptive(rule, 8)
        e16 = self._lambda_error_vs_adaptive(rule, 16)
        assert math.log2(e8 / e16) == pytest.approx(cell_order, abs=0.8)

    def test_gauss8_matches_adaptive_to_roundoff(self):
        assert self._lambda_error_vs_adaptive(GAUSS, 8) <= 1e-13

    def test_identity_G_equals_Dcal_lambda_over_dw(self):
        p = builtin_test2(rho=0.5, N=10)
        b = CoefficientBuilder(p, GAUSS)
        co = b.build(p.f0.values)
        assert np.array_equal(co.G_x, co.Dcal_x / p.grid.dw * co.lambda_x)
        assert np.array_equal(co.G_y, co.Dcal_y / p.grid.dw * co.lambda_y)

    def test_delta_in_open_interval(self):
        p = builtin_test2(rho=0.9, N=10)
        co = CoefficientBuilder(p, GAUSS).build(p.f0.values)
        for arr in (co.delta_x, co.delta_y):
            assert np.all(arr > 0.0) and np.all(arr < 1.0)


class TestAssembleAndDivergence:
    def test_zero_drift_pure_central_diffusion(self):
        grid = Grid2D(0, 1, 4)
        p = uniform_problem(grid, constant_diffusion(1.0, 0.0, 1.0),
                            LinearDrift(lambda x, y: 0 * x * y, lambda x, y: 0 * x * y))
        co = CoefficientBuilder(p, MID).build(p.f0.values)
        rng = np.random.default_rng(0)
        v = rng.random((5, 5))
        fl = assemble_fluxes(v, co)
        expect = (v[1:, :] - v[:-1, :]) / grid.dw
        assert np.allclose(fl.fx[1:-1, :], expect)
        assert np.allclose(fl.fx[0], 0) and np.allclose(fl.fx[-1], 0)

    def test_boundary_ghosts_zero(self):
        p = builtin_test2(N=6)
        co = CoefficientBuilder(p, GAUSS).build(p.f0.values)
        fl = assemble_fluxes(p.f0, co)
        assert np.all(fl.fx[0] == 0) and np.all(fl.fx[-1] == 0)
        assert np.all(fl.fy[:, 0] == 0) and np.all(fl.fy[:, -1] == 0)

    def test_divergence_single_flux_stencil(self):
        grid = Grid2D(0, 1, 3)
        from fpsp2d.flux import FluxField
        fx = np.zeros((5, 4))
        fy = np.zeros((4, 5))
        fx[1, 0] = 1.0  # interface (1/2, 0)
        div = divergence(FluxField(grid, fx, fy))
        assert div[0, 0] == pytest.approx(1.0 / grid.dw)
        assert div[1, 0] == pytest.approx(-1.0 / grid.dw)
        assert np.count_nonzero(div) == 2

    def test_divergence_of_zero_flux(self):
        grid = Grid2D(0, 1, 3)
        from fpsp2d.flux import FluxField
        div = divergence(FluxField(grid, np.zeros((5, 4)), np.zeros((4, 5))))
        assert np.all(div == 0)

    @given(st.integers(min_value=0, max_value=2 ** 31 - 1))
    def test_mass_telescoping(self, seed):
        # dw^2 * sum of divergence vanishes for any admissible flux field
        grid = Grid2D(-1, 1, 7)
        rng = np.random.default_rng(seed)
        from fpsp2d.flux import FluxField
        fx = np.zeros((9, 8))
        fy = np.zeros((8, 9))
        fx[1:-1, :] = rng.normal(size=(7, 8))
        fy[:, 1:-1] = rng.normal(size=(8, 7))
        total = grid.dw ** 2 * divergence(FluxField(grid, fx, fy)).sum()
        assert abs(total) < 1e-13


class TestSteadyStatePreservation:
    def test_exact_weights_zero_flux_random_field(self):
        grid = Grid2D(-1, 1, 16)
        rng = np.random.default_rng(42)
        v = np.exp(rng.normal(scale=2.0, size=(17, 17)))
        f = DensityField(grid, v)
        co = exact_interface_coefficients(f)
        fl = assemble_fluxes(f, co)
        scale = v.max()
        assert np.abs(fl.fx).max() <= 1e-13 * scale
        assert np.abs(fl.fy).max() <= 1e-13 * scale

    def test_exact_weights_with_problem_diffusions(self):
        p = builtin_test1(rho=0.9, N=12)
        b = CoefficientBuilder(p, GAUSS)
        co = exact_interface_coefficients(p.f_inf, b.Dcal_x, b.Dcal_y)
        fl = assemble_fluxes(p.f_inf, co)
        scale = p.f_inf.values.max()
        assert max(np.abs(fl.fx).max(), np.abs(fl.fy).max()) <= 1e-13 * scale

    @pytest.mark.parametrize("rule,expected", [
        (QuadratureRule.OPEN_NEWTON_COTES_2, 2.0),
        (QuadratureRule.OPEN_NEWTON_COTES_4, 4.0),
        (QuadratureRule.OPEN_NEWTON_COTES_6, 6.0),
    ])
    def test_quadrature_residual_order(self, rule, expected):
        residuals = []
        for n in (16, 32):
            p = builtin_test1(rho=0.9, d=12.5, N=n)
            co = CoefficientBuilder(p, rule).build(p.f0.values)
            fl = assemble_fluxes(p.f_inf, co)
            residuals.append(max(np.abs(fl.fx).max(), np.abs(fl.fy).max()))
        order = math.log2(residuals[0] / residuals[1])
        assert order == pytest.approx(expected, abs=0.5)


class TestChangCooperReduction:
    """With a diagonal diffusion the 2D fluxes reduce to 1D Chang-Cooper."""

    @staticmethod
    def cc_1d_flux(values_row, y, diffusion, drift_bx, grid, rule):
        # independent 1D implementation: F = D lam/dw * ftilde + D (f_R - f_L)/dw
        dw = grid.dw
        nodes = grid.nodes()
        mids = grid.midpoints()
        out = np.zeros(grid.N)
        for i in range(grid.N):
            lam = 0.0
            for xq, wq in nodes_and_weights(rule, nodes[i], nodes[i + 1]):
                cx = drift_bx(xq, y) + diffusion.dx_d11(xq, y)
                lam += wq * cx / diffusion.d11(xq, y)
            dmid = diffusion.d11(mids[i], y)
            delt = chang_cooper_delta(lam)
            ftilde = (1 - delt) * values_row[i + 1] + delt * values_row[i]
            out[i] = (dmid / dw) * lam * ftilde + dmid * (values_row[i + 1] - values_row[i]) / dw
        return out

    def test_matches_independent_1d_implementation(self):
        p = builtin_test1(sigma1=1.0, sigma2=1.0, rho=0.0, d=5.0, N=16)
        rng = np.random.default_rng(9)
        v = rng.random((17, 17)) + 0.5
        rule = QuadratureRule.OPEN_NEWTON_COTES_4
        co = CoefficientBuilder(p, rule).build(v)
        fl = assemble_fluxes(v, co)
        d = p.diffusion
        drift = p.drift

        def bx(x, y):
            return (-(d.dx_d11(x, y) + d.dy_d21(x, y))
                    - (d.d11(x, y) * drift.grad_phi[0](x, y)
                       + d.d12(x, y) * drift.grad_phi[1](x, y)))

        nodes = p.grid.nodes()
        scale = np.abs(fl.fx).max()
        for j in (0, 3, 8, 16):
            ref = self.cc_1d_flux(v[:, j], nodes[j], d, bx, p.grid, rule)
            assert np.abs(fl.fx[1:-1, j] - ref).max() <= 1e-13 * max(scale, 1.0)
