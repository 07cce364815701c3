"""Interface coefficients and structure-preserving numerical fluxes.

For each x-interface (i+1/2, j) the scheme carries

    lambda = integral over [w_i, w_{i+1}] of (C^x - (D12/D22) C^y) / Dcal1,
    delta  = 1/lambda + 1/(1 - exp(lambda))        (in (0,1)),
    G      = (Dcal1 / dw) * lambda                 (effective drift),
    Dcal1  = D11 - D12*D21/D22                     (effective diffusion),

and the flux F = G * ((1-delta) f_R + delta f_L) + Dcal (f_R - f_L)/dw.
y-interfaces are symmetric.  Line integrals run along the grid line of the
interface at fixed complementary coordinate and are approximated with an
open quadrature rule, so nodes never touch the boundary.

Interfaces lying on a boundary edge (x-interfaces in the rows j = 0, N and
y-interfaces in the columns i = 0, N) are special: the transverse diagonal
entry (D22 resp. D11) vanishes there and the Schur ratio D12/D22 is 0/0.
On those interfaces the cross ratio is set to zero, which collapses the
coefficients to the one-dimensional drift-diffusion restricted to the edge
(effective diffusion D11, integrand C^x/D11).  This is the limit-consistent
closure: D12 vanishes on the boundary, and it keeps every structural
property (mass, positivity, exact steady-state preservation) intact.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DomainError, NotPositiveDefiniteError, NumericalEvaluationError
from .grid import DensityField, Grid2D, QuadratureRule, unit_rule
from .model import DiffusionSpec, NonlocalKernelDrift, ProblemSpec

_SERIES_CUTOFF = 1.0e-2


def chang_cooper_delta(lam):
    """Interface weight delta(lambda) = 1/lambda + 1/(1 - exp(lambda)).

    Evaluated through expm1 for large |lambda| (no overflow; approaches the
    upwind limits 0 and 1 smoothly) and through the Bernoulli series

        1/2 - lam/12 + lam^3/720 - lam^5/30240 + lam^7/1209600

    for |lambda| < 1e-2, where the closed form loses precision to
    cancellation.  Strictly inside (0, 1) for all finite lambda.
    """
    lam_arr = np.asarray(lam, dtype=float)
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        closed = 1.0 / lam_arr - 1.0 / np.expm1(lam_arr)
    lam2 = lam_arr * lam_arr
    series = 0.5 - lam_arr * (1.0 / 12.0 - lam2 * (1.0 / 720.0 - lam2 * (1.0 / 30240.0 - lam2 / 1209600.0)))
    out = np.where(np.abs(lam_arr) < _SERIES_CUTOFF, series, closed)
    if np.ndim(lam) == 0:
        return float(out)
    return out


def exp_ratio_alpha(lam):
    """alpha(lambda) = lambda / (exp(lambda) - 1) >= 0; alpha(0) = 1.

    Satisfies alpha(-lambda) = alpha(lambda) + lambda, which is how the
    upper-diagonal factor alpha * exp(lambda) is formed without overflow.
    """
    lam_arr = np.asarray(lam, dtype=float)
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        e = np.expm1(lam_arr)
        ratio = lam_arr / np.where(e == 0.0, 1.0, e)
    out = np.where(lam_arr == 0.0, 1.0, ratio)
    if np.ndim(lam) == 0:
        return float(out)
    return out


@dataclass
class InterfaceCoefficients:
    """Per-interface scheme coefficients.

    x-arrays have shape (N, N+1) indexed [interface i+1/2, row j]; y-arrays
    have shape (N+1, N) indexed [column i, interface j+1/2].
    """

    grid: Grid2D
    lambda_x: np.ndarray
    lambda_y: np.ndarray
    delta_x: np.ndarray
    delta_y: np.ndarray
    G_x: np.ndarray
    G_y: np.ndarray
    Dcal_x: np.ndarray
    Dcal_y: np.ndarray
    # memoized semi-implicit systems keyed by dt (coefficients are immutable)
    si_systems: dict = None

    def __post_init__(self):
        if self.si_systems is None:
            self.si_systems = {}


@dataclass
class FluxField:
    """Numerical fluxes with zero ghost entries on the no-flux boundary.

    fx has shape (N+2, N+1): fx[k, j] is the flux through interface
    (k-1/2, j), with fx[0] = fx[N+1] = 0.  fy is the transpose analogue.
    """

    grid: Grid2D
    fx: np.ndarray
    fy: np.ndarray


def _cross_ratios(diffusion: DiffusionSpec, x, y, edge_axis: int):
    """d12/d22 (edge_axis=1) or d12/d11 (edge_axis=0) with boundary closure.

    The ratio is zeroed on the slices where the dividing entry sits on the
    domain boundary (rows j = 0, N for edge_axis=1; columns i = 0, N for
    edge_axis=0), implementing the edge-restricted coefficients.
    """
    d11 = diffusion.d11(x, y)
    d12 = diffusion.d12(x, y)
    d22 = diffusion.d22(x, y)
    div = d22 if edge_axis == 1 else d11
    shape = np.broadcast_shapes(np.shape(x), np.shape(y),
                                np.shape(d12), np.shape(div))
    ratio = np.zeros(shape)
    interior = np.ones(ratio.shape, dtype=bool)
    if edge_axis == 1:
        interior[..., 0] = False
        interior[..., -1] = False
    else:
        interior[0, ...] = False
        interior[-1, ...] = False
    d12b = np.broadcast_to(d12, ratio.shape)
    divb = np.broadcast_to(div, ratio.shape)
    if np.any(interior & (divb == 0.0)):
        raise NotPositiveDefiniteError(
            "diagonal diffusion entry vanishes at an interior interface sample")
    np.divide(d12b, divb, out=ratio, where=interior)
    return np.broadcast_to(d11, ratio.shape), d12b, np.broadcast_to(d22, ratio.shape), ratio


def effective_diffusions(diffusion: DiffusionSpec, grid: Grid2D):
    """Effective diffusions Dcal1, Dcal2 at x- and y-interface points.

    Dcal_x[i, j] = (D11 - D12*D21/D22)(w_{i+1/2}, w_j), shape (N, N+1);
    Dcal_y[i, j] = (D22 - D12*D21/D11)(w_i, w_{j+1/2}), shape (N+1, N).
    Raises NotPositiveDefiniteError (with the offending point) if a value
    is not strictly positive.
    """
    mid = grid.midpoints()
    nod = grid.nodes()
    d11, d12, _, r12 = _cross_ratios(diffusion, mid[:, None], nod[None, :], edge_axis=1)
    dcal_x = d11 - r12 * d12
    _, d12y, d22y, r21 = _cross_ratios(diffusion, nod[:, None], mid[None, :], edge_axis=0)
    dcal_y = d22y - r21 * d12y
    for name, arr, xs, ys in (("Dcal1", dcal_x, mid[:, None], nod[None, :]),
                              ("Dcal2", dcal_y, nod[:, None], mid[None, :])):
        if np.any(arr <= 0.0):
            idx = np.unravel_index(np.argmin(arr), arr.shape)
            point = (np.broadcast_to(xs, arr.shape)[idx], np.broadcast_to(ys, arr.shape)[idx])
            raise NotPositiveDefiniteError(
                f"effective diffusion {name} nonpositive at w = {point}", point=point)
    return dcal_x, dcal_y


class CoefficientBuilder:
    """Computes InterfaceCoefficients for a problem, rule, and density.

    Quadrature meshes and every density-independent piece of the integrands
    are precomputed at construction.  For drifts that do not depend on the
    density the full coefficient set is cached and build() is O(1); for the
    P == 1 nonlocal drift the interface integrals reduce to three cached
    arrays contracted with the trapezoidal moments of the current density.
    """

    def __init__(self, problem: ProblemSpec, rule: QuadratureRule):
        self.problem = problem
        self.rule = rule
        grid = problem.grid
        t, u = unit_rule(rule)
        self._u = u
        dw = grid.dw
        nod = grid.nodes()

        # x-family evaluation mesh: (cell i, node q, row j)
        self._x_mesh = (
            (grid.a + dw * (np.arange(grid.N)[:, None, None] + t[None, :, None])),
            nod[None, None, :],
        )
        # y-family evaluation mesh: (column i, node q, cell j)
        self._y_mesh = (
            nod[:, None, None],
            (grid.a + dw * (np.arange(grid.N)[None, None, :] + t[None, :, None])),
        )
        self.Dcal_x, self.Dcal_y = effective_diffusions(problem.diffusion, grid)

        diff = problem.diffusion
        xX, xY = self._x_mesh
        d11x, d12x, d22x, self._r12 = _cross_ratios(diff, xX, xY, edge_axis=1)
        self._dcal1_mesh = d11x - self._r12 * d12x
        yX, yY = self._y_mesh
        d11y, d12y, d22y, self._r21 = _cross_ratios(diff, yX, yY, edge_axis=0)
        self._dcal2_mesh = d22y - self._r21 * d12y
        if np.any(self._dcal1_mesh <= 0.0) or np.any(self._dcal2_mesh <= 0.0):
            raise NotPositiveDefiniteError(
                "effective diffusion nonpositive at a quadrature node")

        # density-independent part of C (divergence-of-D terms)
        px_x = diff.dx_d11(xX, xY) + diff.dy_d21(xX, xY)
        py_x = diff.dx_d12(xX, xY) + diff.dy_d22(xX, xY)
        self._static_x = self._contract((px_x - self._r12 * py_x) / self._dcal1_mesh)
        px_y = diff.dx_d11(yX, yY) + diff.dy_d21(yX, yY)
        py_y = diff.dx_d12(yX, yY) + diff.dy_d22(yX, yY)
        self._static_y = self._contract((py_y - self._r21 * px_y) / self._dcal2_mesh)

        drift = problem.drift
        self._cached: Optional[InterfaceCoefficients] = None
        self._mean_kernel = isinstance(drift, NonlocalKernelDrift) and drift.kernel is None
        if self._mean_kernel:
            bx = np.broadcast_to(xX, self._r12.shape)
            by = np.broadcast_to(xY, self._r12.shape)
            self._xK_m = self._contract((bx - self._r12 * by) / self._dcal1_mesh)
            self._xK_u = self._contract(1.0 / self._dcal1_mesh)
            self._xK_v = self._contract(self._r12 / self._dcal1_mesh)
            bxy = np.broadcast_to(yX, self._r21.shape)
            byy = np.broadcast_to(yY, self._r21.shape)
            self._yK_m = self._contract((byy - self._r21 * bxy) / self._dcal2_mesh)
            self._yK_u = self._contract(1.0 / self._dcal2_mesh)
            self._yK_v = self._contract(self._r21 / self._dcal2_mesh)

    @property
    def depends_on_density(self) -> bool:
        return self.problem.drift.depends_on_density

    def _contract(self, integrand: np.ndarray) -> np.ndarray:
        # integral over one cell = dw * sum_q u_q * g(node_q)
        return self.problem.grid.dw * np.einsum("q,iqj->ij", self._u, integrand)

    def _lambda_arrays(self, f: Optional[np.ndarray]):
        drift = self.problem.drift
        if drift.depends_on_density and f is None:
            raise DomainError("density-dependent drift needs the current density")
        if self._mean_kernel:
            m, ux, uy = drift.moments(self.problem.grid, f)
            lam_x = self._static_x + m * self._xK_m - ux * self._xK_u + uy * self._xK_v
            lam_y = self._static_y + m * self._yK_m - uy * self._yK_u + ux * self._yK_v
            return lam_x, lam_y
        kwargs = dict(diffusion=self.problem.diffusion, grid=self.problem.grid, f=f)
        bx, by = drift.b_arrays(*self._x_mesh, **kwargs)
        lam_x = self._static_x + self._contract((bx - self._r12 * by) / self._dcal1_mesh)
        bx, by = drift.b_arrays(*self._y_mesh, **kwargs)
        lam_y = self._static_y + self._contract((by - self._r21 * bx) / self._dcal2_mesh)
        return lam_x, lam_y

    def build(self, f: Optional[np.ndarray] = None) -> InterfaceCoefficients:
        if self._cached is not None and not self.depends_on_density:
            return self._cached
        lam_x, lam_y = self._lambda_arrays(f)
        if not (np.all(np.isfinite(lam_x)) and np.all(np.isfinite(lam_y))):
            raise NumericalEvaluationError("non-finite interface integral; "
                                           "integrand singular at a quadrature node?")
        dw = self.problem.grid.dw
        coeffs = InterfaceCoefficients(
            grid=self.problem.grid,
            lambda_x=lam_x, lambda_y=lam_y,
            delta_x=chang_cooper_delta(lam_x), delta_y=chang_cooper_delta(lam_y),
            G_x=self.Dcal_x / dw * lam_x, G_y=self.Dcal_y / dw * lam_y,
            Dcal_x=self.Dcal_x, Dcal_y=self.Dcal_y,
        )
        if not self.depends_on_density:
            self._cached = coeffs
        return coeffs


def compute_lambda(problem: ProblemSpec, f: Optional[DensityField],
                   rule: QuadratureRule):
    """Interface exponents (lambda_x, lambda_y) by line quadrature."""
    values = f.values if f is not None else None
    return CoefficientBuilder(problem, rule)._lambda_arrays(values)


def _log_ratio(f_left: np.ndarray, f_right: np.ndarray) -> np.ndarray:
    # log(f_left / f_right), accurate also when the two are nearly equal
    return -np.log1p((f_right - f_left) / f_left)


def steady_state_weights(f_inf: DensityField):
    """Exact interface weights built from a positive steady state.

    delta_x[i, j] = 1/(log f_{i,j} - log f_{i+1,j}) + f_{i+1,j}/(f_{i+1,j} - f_{i,j}),
    evaluated as delta(lambda) with lambda = log(f_{i,j}/f_{i+1,j}) (the two
    forms are algebraically identical; this one is stable for near-equal
    neighbors and gives exactly 1/2 in the equal limit).
    """
    v = f_inf.values
    if np.any(v <= 0.0):
        raise DomainError("steady-state weights need a strictly positive field")
    lam_x = _log_ratio(v[:-1, :], v[1:, :])
    lam_y = _log_ratio(v[:, :-1], v[:, 1:])
    return chang_cooper_delta(lam_x), chang_cooper_delta(lam_y)


def exact_interface_coefficients(f_inf: DensityField,
                                 Dcal_x: Optional[np.ndarray] = None,
                                 Dcal_y: Optional[np.ndarray] = None) -> InterfaceCoefficients:
    """Coefficients whose flux vanishes identically on f_inf.

    Dcal arrays default to 1; pass the problem's effective diffusions to get
    the exact-weight variant of the full scheme.
    """
    grid = f_inf.grid
    v = f_inf.values
    if np.any(v <= 0.0):
        raise DomainError("exact weights need a strictly positive field")
    lam_x = _log_ratio(v[:-1, :], v[1:, :])
    lam_y = _log_ratio(v[:, :-1], v[:, 1:])
    if Dcal_x is None:
        Dcal_x = np.ones_like(lam_x)
    if Dcal_y is None:
        Dcal_y = np.ones_like(lam_y)
    dw = grid.dw
    return InterfaceCoefficients(
        grid=grid, lambda_x=lam_x, lambda_y=lam_y,
        delta_x=chang_cooper_delta(lam_x), delta_y=chang_cooper_delta(lam_y),
        G_x=Dcal_x / dw * lam_x, G_y=Dcal_y / dw * lam_y,
        Dcal_x=Dcal_x, Dcal_y=Dcal_y,
    )


def assemble_fluxes(f: np.ndarray | DensityField,
                    coeffs: InterfaceCoefficients) -> FluxField:
    """Numerical fluxes F = G * f_tilde + Dcal * (f_R - f_L)/dw, zero ghosts."""
    v = f.values if isinstance(f, DensityField) else f
    grid = coeffs.grid
    dw = grid.dw
    n = grid.N
    fx = np.zeros((n + 2, n + 1))
    ftilde = (1.0 - coeffs.delta_x) * v[1:, :] + coeffs.delta_x * v[:-1, :]
    fx[1:-1, :] = coeffs.G_x * ftilde + coeffs.Dcal_x * (v[1:, :] - v[:-1, :]) / dw
    fy = np.zeros((n + 1, n + 2))
    gtilde = (1.0 - coeffs.delta_y) * v[:, 1:] + coeffs.delta_y * v[:, :-1]
    fy[:, 1:-1] = coeffs.G_y * gtilde + coeffs.Dcal_y * (v[:, 1:] - v[:, :-1]) / dw
    return FluxField(grid, fx, fy)


def divergence(flux: FluxField, grid: Optional[Grid2D] = None) -> np.ndarray:
    """Discrete flux divergence (F_{i+1/2} - F_{i-1/2})/dw + y-analogue."""
    g = grid or flux.grid
    inv = 1.0 / g.dw
    return inv * (flux.fx[1:, :] - flux.fx[:-1, :]) + inv * (flux.fy[:, 1:] - flux.fy[:, :-1])
