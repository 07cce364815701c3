"""Problem specification: diffusion matrix field, drift operator, initial data.

The drift enters the equation through the flux

    F = C f + D grad f,     C^x = B^x + dx(D11) + dy(D21),
                            C^y = B^y + dx(D12) + dy(D22),

so that df/dt = div F with no-flux boundaries.  Three drift variants are
supported:

* ``LinearDrift`` - a prescribed field B(w);
* ``GradientFormDrift`` - B = -div(D) - D grad(phi), the linear drift whose
  vanishing-flux equilibrium is proportional to exp(phi);
* ``NonlocalKernelDrift`` - B[f](w) = integral of P(w, w*) (w - w*) f(w*),
  discretized with trapezoidal nodal weights.

All coefficient callables must accept and broadcast numpy arrays.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from .errors import ConfigurationError, DomainError, NotPositiveDefiniteError
from .grid import DensityField, Grid2D, trapezoid_weights

Scalar2 = Callable[[np.ndarray, np.ndarray], np.ndarray]


def _fd_partial(fn: Scalar2, axis: int, step: float) -> Scalar2:
    if axis == 0:
        return lambda x, y: (fn(x + step, y) - fn(x - step, y)) / (2.0 * step)
    return lambda x, y: (fn(x, y + step) - fn(x, y - step)) / (2.0 * step)


@dataclass(frozen=True)
class DiffusionSpec:
    """Entries of the symmetric diffusion matrix and their partial derivatives.

    d21 is identified with d12 by symmetry.  Partial derivatives may be
    omitted; they are then filled with central finite differences of step
    ``fd_step`` (inaccurate derivatives pollute the design order of the
    scheme, so built-in problems always supply closed forms).
    """

    d11: Scalar2
    d12: Scalar2
    d22: Scalar2
    dx_d11: Optional[Scalar2] = None
    dy_d21: Optional[Scalar2] = None
    dx_d12: Optional[Scalar2] = None
    dy_d22: Optional[Scalar2] = None
    fd_step: float = 2.0e-6

    def __post_init__(self):
        filled = {
            "dx_d11": self.dx_d11 or _fd_partial(self.d11, 0, self.fd_step),
            "dy_d21": self.dy_d21 or _fd_partial(self.d12, 1, self.fd_step),
            "dx_d12": self.dx_d12 or _fd_partial(self.d12, 0, self.fd_step),
            "dy_d22": self.dy_d22 or _fd_partial(self.d22, 1, self.fd_step),
        }
        for name, fn in filled.items():
            object.__setattr__(self, name, fn)

    def entries(self, x, y):
        return self.d11(x, y), self.d12(x, y), self.d22(x, y)

    def check_positive_definite(self, x: np.ndarray, y: np.ndarray) -> None:
        """Raise NotPositiveDefiniteError if any sample fails d11,d22,det > 0."""
        a, b, c = self.entries(x, y)
        det = a * c - b * b
        bad = (a <= 0) | (c <= 0) | (det <= 0)
        if np.any(bad):
            idx = np.unravel_index(np.argmax(bad), np.shape(bad))
            point = (np.broadcast_to(x, np.shape(bad))[idx],
                     np.broadcast_to(y, np.shape(bad))[idx])
            raise NotPositiveDefiniteError(
                f"diffusion matrix not positive definite at w = {point}", point=point)


@dataclass(frozen=True)
class LinearDrift:
    """Prescribed drift field B(w), independent of the density."""

    bx: Scalar2
    by: Scalar2
    depends_on_density = False

    def b_arrays(self, x, y, *, diffusion=None, grid=None, f=None):
        return self.bx(x, y), self.by(x, y)


@dataclass(frozen=True)
class GradientFormDrift:
    """B = -div(D) - D grad(phi); the zero-flux steady state is C exp(phi)."""

    phi: Scalar2
    grad_phi: tuple[Scalar2, Scalar2]
    depends_on_density = False

    def b_arrays(self, x, y, *, diffusion=None, grid=None, f=None):
        if diffusion is None:
            raise ConfigurationError("gradient-form drift needs the diffusion spec")
        px, py = self.grad_phi[0](x, y), self.grad_phi[1](x, y)
        d11, d12, d22 = diffusion.entries(x, y)
        bx = -(diffusion.dx_d11(x, y) + diffusion.dy_d21(x, y)) - (d11 * px + d12 * py)
        by = -(diffusion.dx_d12(x, y) + diffusion.dy_d22(x, y)) - (d12 * px + d22 * py)
        return bx, by


@dataclass(frozen=True)
class NonlocalKernelDrift:
    """B[f](w) = integral over Omega of P(w, w*) (w - w*) f(w*) dw*.

    ``kernel=None`` means P identically 1, for which the integral reduces to
    moments of f (computed once per evaluation, O(N^2) instead of O(N^4)).
    The integral uses trapezoidal weights on the nodal grid.
    """

    kernel: Optional[Callable[[np.ndarray, np.ndarray, np.ndarray, np.ndarray], np.ndarray]] = None
    depends_on_density = True

    def moments(self, grid: Grid2D, f: np.ndarray) -> tuple[float, float, float]:
        """Trapezoidal (mass, first-moment-x, first-moment-y) of f."""
        c = trapezoid_weights(grid.N)
        x, y = grid.node_mesh()
        w = grid.dw ** 2
        cf = c * f
        return w * float(cf.sum()), w * float((cf * x).sum()), w * float((cf * y).sum())

    def b_arrays(self, x, y, *, diffusion=None, grid=None, f=None):
        if grid is None or f is None:
            raise ConfigurationError("nonlocal drift needs the grid and current density")
        if self.kernel is None:
            m, ux, uy = self.moments(grid, f)
            return m * x - ux, m * y - uy
        # general kernel: accumulate over grid sources (slow path)
        c = trapezoid_weights(grid.N) * grid.dw ** 2
        xs, ys = grid.node_mesh()
        xf, yf = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        bx = np.zeros_like(xf)
        by = np.zeros_like(xf)
        flat_targets = xf.reshape(-1), yf.reshape(-1)
        bx_flat = bx.reshape(-1)
        by_flat = by.reshape(-1)
        src_x, src_y, src_w = xs.ravel(), ys.ravel(), (c * f).ravel()
        for k, (tx, ty) in enumerate(zip(*flat_targets)):
            p = self.kernel(tx, ty, src_x, src_y)
            pw = p * src_w
            bx_flat[k] = float(((tx - src_x) * pw).sum())
            by_flat[k] = float(((ty - src_y) * pw).sum())
        if np.ndim(x) == 0 and np.ndim(y) == 0:
            return float(bx_flat[0]), float(by_flat[0])
        return bx, by


DriftSpec = Union[LinearDrift, GradientFormDrift, NonlocalKernelDrift]


@dataclass(frozen=True)
class ProblemSpec:
    """A fully specified problem: grid, diffusion, drift, initial data.

    f0 is normalized to unit grid mass (dw^2 * sum = 1); f_inf, when given,
    likewise (the scheme conserves the discrete mass, so the discrete
    normalization is the self-consistent reference for errors and entropy).
    """

    grid: Grid2D
    diffusion: DiffusionSpec
    drift: DriftSpec
    f0: DensityField
    f_inf: Optional[DensityField] = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.f0.grid != self.grid:
            raise ConfigurationError("f0 grid does not match problem grid")
        if self.f_inf is not None and self.f_inf.grid != self.grid:
            raise ConfigurationError("f_inf grid does not match problem grid")


def eval_drift(drift: DriftSpec, w, f: Optional[DensityField] = None, *,
               diffusion: Optional[DiffusionSpec] = None,
               grid: Optional[Grid2D] = None) -> np.ndarray:
    """Drift vector B at a single point w = (wx, wy)."""
    wx, wy = float(w[0]), float(w[1])
    g = grid or (f.grid if f is not None else None)
    if g is not None and not g.contains(wx, wy):
        raise DomainError(f"point {w} outside domain [{g.a}, {g.b}]^2")
    values = f.values if f is not None else None
    bx, by = drift.b_arrays(np.asarray(wx), np.asarray(wy),
                            diffusion=diffusion, grid=g, f=values)
    return np.array([float(bx), float(by)])


def eval_C_arrays(diffusion: DiffusionSpec, drift: DriftSpec,
                  x: np.ndarray, y: np.ndarray, *,
                  grid: Optional[Grid2D] = None,
                  f: Optional[np.ndarray] = None) -> tuple[np.ndarray, np.ndarray]:
    """C = B + row-divergence of D, evaluated pointwise on arrays."""
    bx, by = drift.b_arrays(x, y, diffusion=diffusion, grid=grid, f=f)
    cx = bx + diffusion.dx_d11(x, y) + diffusion.dy_d21(x, y)
    cy = by + diffusion.dx_d12(x, y) + diffusion.dy_d22(x, y)
    return cx, cy


def eval_C(problem: ProblemSpec, w, f: Optional[DensityField] = None) -> np.ndarray:
    """Flux drift coefficient C = (C^x, C^y) at a single interior point."""
    wx, wy = float(w[0]), float(w[1])
    g = problem.grid
    if not (g.a < wx < g.b and g.a < wy < g.b):
        raise DomainError(f"point {w} is not strictly interior to [{g.a}, {g.b}]^2")
    values = f.values if f is not None else problem.f0.values
    cx, cy = eval_C_arrays(problem.diffusion, problem.drift,
                           np.asarray(wx), np.asarray(wy), grid=g, f=values)
    return np.array([float(cx), float(cy)])


def bimodal_gaussian(grid: Grid2D, c: float, mu: float) -> DensityField:
    """Two symmetric Gaussian bumps at (-mu, -mu) and (mu, mu), unit grid mass."""
    x, y = grid.node_mesh()
    v = (np.exp(-c * (x + mu) ** 2) * np.exp(-c * (y + mu) ** 2)
         + np.exp(-c * (x - mu) ** 2) * np.exp(-c * (y - mu) ** 2))
    return DensityField(grid, v).normalized()


def _test_diffusion(sigma1: float, sigma2: float, rho: float) -> DiffusionSpec:
    s1sq, s2sq = sigma1 ** 2, sigma2 ** 2
    cross = rho * sigma1 * sigma2 / 4.0
    return DiffusionSpec(
        d11=lambda x, y: 0.5 * s1sq * (1.0 - x ** 2) ** 2,
        d12=lambda x, y: cross * (1.0 - x ** 2) * (1.0 - y ** 2),
        d22=lambda x, y: 0.5 * s2sq * (1.0 - y ** 2) ** 2,
        dx_d11=lambda x, y: -2.0 * s1sq * x * (1.0 - x ** 2),
        dy_d21=lambda x, y: -2.0 * cross * y * (1.0 - x ** 2),
        dx_d12=lambda x, y: -2.0 * cross * x * (1.0 - y ** 2),
        dy_d22=lambda x, y: -2.0 * s2sq * y * (1.0 - y ** 2),
    )


def _validate_test_params(sigma1: float, sigma2: float, rho: float, N: int) -> None:
    problems = []
    if sigma1 <= 0:
        problems.append(f"sigma1 must be positive, got {sigma1}")
    if sigma2 <= 0:
        problems.append(f"sigma2 must be positive, got {sigma2}")
    if abs(rho) >= 1:
        problems.append(f"|rho| must be < 1 to keep the diffusion positive definite, got {rho}")
    if N < 4:
        problems.append(f"need at least 4 cells, got N={N}")
    if problems:
        raise ConfigurationError("; ".join(problems))


def builtin_test1(sigma1: float = 1.0, sigma2: float = 1.0, rho: float = 0.1,
                  d: float = 12.5, c: float = 30.0, mu: float = 0.5,
                  N: int = 80) -> ProblemSpec:
    """Validation problem with analytically known vanishing-flux equilibrium.

    Domain [-1,1]^2; boundary-degenerate anisotropic diffusion with
    correlation rho; gradient-form drift with phi = -d (wx^8 + wy^8), whose
    equilibrium is proportional to exp(-d (wx^8 + wy^8)).  Positive d puts
    the equilibrium mass on the central plateau, negative d piles it into
    the corners; the sign is a free parameter of the family.
    """
    _validate_test_params(sigma1, sigma2, rho, N)
    grid = Grid2D(-1.0, 1.0, N)
    diffusion = _test_diffusion(sigma1, sigma2, rho)
    drift = GradientFormDrift(
        phi=lambda x, y: -d * (x ** 8 + y ** 8),
        grad_phi=(lambda x, y: -8.0 * d * x ** 7 + 0.0 * y,
                  lambda x, y: -8.0 * d * y ** 7 + 0.0 * x),
    )
    f0 = bimodal_gaussian(grid, c, mu)
    xg, yg = grid.node_mesh()
    f_inf = DensityField(grid, np.exp(-d * (xg ** 8 + yg ** 8))).normalized()
    params = dict(kind="test1", sigma1=sigma1, sigma2=sigma2, rho=rho, d=d, c=c, mu=mu)
    return ProblemSpec(grid, diffusion, drift, f0, f_inf, params)


def builtin_test2(sigma1: float = 1.0, sigma2: float = 1.0, rho: float = 0.1,
                  c: float = 30.0, mu: float = 0.5, N: int = 80) -> ProblemSpec:
    """Alignment dynamics: nonlocal drift with P == 1, no analytic equilibrium."""
    _validate_test_params(sigma1, sigma2, rho, N)
    grid = Grid2D(-1.0, 1.0, N)
    diffusion = _test_diffusion(sigma1, sigma2, rho)
    drift = NonlocalKernelDrift(kernel=None)
    f0 = bimodal_gaussian(grid, c, mu)
    params = dict(kind="test2", sigma1=sigma1, sigma2=sigma2, rho=rho, c=c, mu=mu)
    return ProblemSpec(grid, diffusion, drift, f0, None, params)
