"""Time integration: explicit Euler / SSP-RK3 / RK4 and semi-implicit steps.

Explicit steps under the parabolic bound dt <= dw^2 / (2[(Gx+Gy) dw + D1+D2])
keep the update a convex combination of nonnegative nodal values, so Euler
and SSP-RK3 (a convex combination of Euler steps) preserve nonnegativity;
classical RK4 is provided for accuracy comparisons but carries no such
guarantee.  The semi-implicit step freezes the nonlinear coefficients at the
current time, so the new density solves a pentadiagonal linear system whose
matrix is an M-matrix under the milder bound dt <= dw / (2(Gx+Gy)); the
red-black Gauss-Seidel solver then keeps every iterate (hence the returned
density) elementwise nonnegative.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from .diagnostics import StudyReport, dissipation_arrays, relative_entropy_arrays
from .errors import ConfigurationError, SolverError, StepDivergenceError
from .flux import (CoefficientBuilder, InterfaceCoefficients,
                   assemble_fluxes, divergence, exact_interface_coefficients,
                   exp_ratio_alpha)
from .grid import DensityField, Grid2D, QuadratureRule
from .model import ProblemSpec

EXPLICIT_METHODS = ("euler", "rk4", "ssprk3")
SEMI_IMPLICIT_METHODS = ("si1", "si2")


@dataclass
class TimeStepPolicy:
    """How the step size is chosen.

    modes: 'fixed' (use dt), 'table1' (dt = dw^2/(10 s1^2 dw + 10)),
    'fig1' (dt = dw/(20 s1^2)), 'explicit-cfl' and 'semi-implicit-cfl'
    (safety times the respective positivity bound, re-evaluated every step
    because the effective drifts may depend on the density).
    """

    mode: str = "fixed"
    dt: Optional[float] = None
    safety: float = 1.0
    T_final: float = 1.0

    def __post_init__(self):
        known = ("fixed", "table1", "fig1", "explicit-cfl", "semi-implicit-cfl")
        if self.mode not in known:
            raise ConfigurationError(f"unknown dt policy {self.mode!r}; expected one of {known}")
        if self.mode == "fixed" and (self.dt is None or self.dt <= 0):
            raise ConfigurationError("fixed dt policy needs a positive dt")
        if not 0 < self.safety <= 1:
            raise ConfigurationError(f"safety must be in (0, 1], got {self.safety}")
        if self.T_final < 0:
            raise ConfigurationError(f"T_final must be nonnegative, got {self.T_final}")


def cfl_explicit(coeffs: InterfaceCoefficients, dw: float) -> float:
    """Positivity bound dw^2 / (2[(Gx+Gy) dw + D1+D2]) for explicit stepping."""
    gx = float(np.abs(coeffs.G_x).max())
    gy = float(np.abs(coeffs.G_y).max())
    d1 = float(coeffs.Dcal_x.max())
    d2 = float(coeffs.Dcal_y.max())
    return dw * dw / (2.0 * ((gx + gy) * dw + d1 + d2))


def cfl_semi_implicit(coeffs: InterfaceCoefficients, dw: float) -> float:
    """Positivity bound dw / (2(Gx+Gy)); unconditional (inf) for zero drift."""
    g = float(np.abs(coeffs.G_x).max()) + float(np.abs(coeffs.G_y).max())
    if g == 0.0:
        return np.inf
    return dw / (2.0 * g)


def policy_dt(policy: TimeStepPolicy, problem: ProblemSpec,
              coeffs: Optional[InterfaceCoefficients] = None) -> float:
    dw = problem.grid.dw
    if policy.mode == "fixed":
        return policy.dt
    if policy.mode in ("table1", "fig1"):
        s1 = problem.params.get("sigma1")
        if s1 is None:
            raise ConfigurationError(f"dt policy {policy.mode!r} needs params['sigma1']")
        s1sq = s1 * s1
        if policy.mode == "table1":
            return dw * dw / (10.0 * s1sq * dw + 10.0)
        return dw / (20.0 * s1sq)
    if coeffs is None:
        raise ConfigurationError(f"dt policy {policy.mode!r} needs interface coefficients")
    if policy.mode == "explicit-cfl":
        return policy.safety * cfl_explicit(coeffs, dw)
    return policy.safety * cfl_semi_implicit(coeffs, dw)


def _rhs(values: np.ndarray, builder: CoefficientBuilder) -> np.ndarray:
    coeffs = builder.build(values)
    return divergence(assemble_fluxes(values, coeffs))


def _rhs_with(coeffs: InterfaceCoefficients, values: np.ndarray) -> np.ndarray:
    return divergence(assemble_fluxes(values, coeffs))


def step_explicit(f, problem: ProblemSpec, rule: QuadratureRule, dt: float,
                  method: str = "euler",
                  builder: Optional[CoefficientBuilder] = None):
    """One explicit step; coefficients are recomputed from each stage density."""
    if method not in EXPLICIT_METHODS:
        raise ConfigurationError(f"unknown explicit method {method!r}")
    wrap = isinstance(f, DensityField)
    v = f.values if wrap else np.asarray(f, dtype=float)
    b = builder if builder is not None else CoefficientBuilder(problem, rule)
    if method == "euler":
        out = v + dt * _rhs(v, b)
    elif method == "ssprk3":
        u1 = v + dt * _rhs(v, b)
        u2 = 0.75 * v + 0.25 * (u1 + dt * _rhs(u1, b))
        out = (v + 2.0 * (u2 + dt * _rhs(u2, b))) / 3.0
    else:  # rk4
        k1 = _rhs(v, b)
        k2 = _rhs(v + 0.5 * dt * k1, b)
        k3 = _rhs(v + 0.5 * dt * k2, b)
        k4 = _rhs(v + dt * k3, b)
        out = v + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(out)):
        raise StepDivergenceError("non-finite values after explicit step")
    return DensityField(problem.grid, out) if wrap else out


@dataclass
class PentadiagonalSystem:
    """A f = rhs with A = diag - shifts; bands stored as (N+1, N+1) grids.

    east/west couple along x (to f[i+1,j], f[i-1,j]), north/south along y.
    All band entries are nonnegative (off-diagonal entries of A are their
    negatives), the diagonal is positive, and under the semi-implicit time
    step bound A is strictly row diagonally dominant.
    """

    diag: np.ndarray
    east: np.ndarray
    west: np.ndarray
    north: np.ndarray
    south: np.ndarray

    def apply(self, x: np.ndarray) -> np.ndarray:
        ax = self.diag * x
        ax[:-1, :] -= self.east[:-1, :] * x[1:, :]
        ax[1:, :] -= self.west[1:, :] * x[:-1, :]
        ax[:, :-1] -= self.north[:, :-1] * x[:, 1:]
        ax[:, 1:] -= self.south[:, 1:] * x[:, :-1]
        return ax

    def dominance_margin(self) -> float:
        """Row diagonal-dominance margin (positive under the dt bound)."""
        return float((self.diag - self.east - self.west - self.north - self.south).min())

    def column_dominance_margin(self) -> float:
        """Column margin: diag minus the off-diagonal column sums.

        For the assembled semi-implicit systems this equals 1 up to
        round-off (mass conservation makes every column sum to 1), so the
        matrix is an M-matrix for any dt even when the row margin is lost.
        """
        col = self.diag.copy()
        col[1:, :] -= self.east[:-1, :]
        col[:-1, :] -= self.west[1:, :]
        col[:, 1:] -= self.north[:, :-1]
        col[:, :-1] -= self.south[:, 1:]
        return float(col.min())


def assemble_semi_implicit(coeffs: InterfaceCoefficients, dt: float) -> PentadiagonalSystem:
    """Pentadiagonal system of the coefficient-frozen implicit step.

    Row (i, j): [1 + c(D1_{i+1/2} a(l_{i+1/2}) + D1_{i-1/2} a(-l_{i-1/2}) + y-terms)] f_{i,j}
    - c D1_{i+1/2} a(-l_{i+1/2}) f_{i+1,j} - c D1_{i-1/2} a(l_{i-1/2}) f_{i-1,j} - ...,
    with c = dt/dw^2 and a(l) = l/(e^l - 1).  Systems are memoized per dt on
    the coefficient set (the matrix is reused while coefficients are frozen).
    """
    cached = coeffs.si_systems.get(dt)
    if cached is not None:
        return cached
    grid = coeffs.grid
    c = dt / grid.dw ** 2
    ax = exp_ratio_alpha(coeffs.lambda_x)
    ax_neg = ax + coeffs.lambda_x
    ay = exp_ratio_alpha(coeffs.lambda_y)
    ay_neg = ay + coeffs.lambda_y
    kx = c * coeffs.Dcal_x
    ky = c * coeffs.Dcal_y
    m = grid.N + 1
    east = np.zeros((m, m))
    west = np.zeros((m, m))
    north = np.zeros((m, m))
    south = np.zeros((m, m))
    diag = np.ones((m, m))
    east[:-1, :] = kx * ax_neg
    west[1:, :] = kx * ax
    north[:, :-1] = ky * ay_neg
    south[:, 1:] = ky * ay
    diag[:-1, :] += kx * ax
    diag[1:, :] += kx * ax_neg
    diag[:, :-1] += ky * ay
    diag[:, 1:] += ky * ay_neg
    system = PentadiagonalSystem(diag, east, west, north, south)
    if system.dominance_margin() <= 0.0 and system.column_dominance_margin() <= 0.0:
        raise SolverError(
            "semi-implicit matrix lost diagonal dominance in both rows and "
            f"columns; reduce dt (row margin {system.dominance_margin():.3e})")
    coeffs.si_systems[dt] = system
    return system


_checker_cache: dict[int, np.ndarray] = {}


def _red_mask(m: int) -> np.ndarray:
    mask = _checker_cache.get(m)
    if mask is None:
        idx = np.add.outer(np.arange(m), np.arange(m))
        mask = (idx % 2 == 0)
        _checker_cache[m] = mask
    return mask


def solve_pentadiagonal(system: PentadiagonalSystem, rhs: np.ndarray,
                        tol: float = 1.0e-14, max_iter: int = 10000,
                        x0: Optional[np.ndarray] = None) -> np.ndarray:
    """Red-black Gauss-Seidel solve to residual inf-norm <= tol * |rhs|.

    Convergence is guaranteed by strict diagonal dominance.  Every iterate
    is a nonnegative combination of nonnegative quantities when rhs >= 0 and
    the start is >= 0, so the returned solution is elementwise nonnegative
    in floating point, not merely up to solver tolerance.
    """
    if np.any(system.diag <= 0.0):
        raise SolverError("system diagonal must be positive")
    rhs = np.asarray(rhs, dtype=float)
    x = rhs / system.diag if x0 is None else np.maximum(np.asarray(x0, dtype=float), 0.0).copy()
    target = tol * max(float(np.abs(rhs).max()), np.finfo(float).tiny)
    red = _red_mask(rhs.shape[0])
    for _ in range(max_iter):
        for mask in (red, ~red):
            acc = rhs.copy()
            acc[:-1, :] += system.east[:-1, :] * x[1:, :]
            acc[1:, :] += system.west[1:, :] * x[:-1, :]
            acc[:, :-1] += system.north[:, :-1] * x[:, 1:]
            acc[:, 1:] += system.south[:, 1:] * x[:, :-1]
            np.copyto(x, acc / system.diag, where=mask)
        residual = float(np.abs(rhs - system.apply(x)).max())
        if residual <= target:
            return x
    raise SolverError(f"Gauss-Seidel did not reach tol={tol} in {max_iter} sweeps "
                      f"(residual {residual:.3e})", residual=residual)


def step_semi_implicit(f, problem: ProblemSpec, rule: QuadratureRule, dt: float,
                       order: int = 1,
                       builder: Optional[CoefficientBuilder] = None,
                       tol: float = 1.0e-14, max_iter: int = 10000,
                       x0: Optional[np.ndarray] = None):
    """One semi-implicit step of order 1 or 2.

    Order 1 freezes (G, delta) at the current density and solves for the new
    one.  Order 2 is a midpoint predictor-corrector: predict half a step
    with frozen coefficients, refresh the coefficients from the predictor,
    then take the full step with the refreshed (still frozen) coefficients.
    """
    if order not in (1, 2):
        raise ConfigurationError(f"semi-implicit order must be 1 or 2, got {order}")
    wrap = isinstance(f, DensityField)
    v = f.values if wrap else np.asarray(f, dtype=float)
    b = builder if builder is not None else CoefficientBuilder(problem, rule)
    coeffs = b.build(v)
    if order == 1:
        system = assemble_semi_implicit(coeffs, dt)
        out = solve_pentadiagonal(system, v, tol=tol, max_iter=max_iter, x0=x0)
    else:
        half = assemble_semi_implicit(coeffs, 0.5 * dt)
        predictor = solve_pentadiagonal(half, v, tol=tol, max_iter=max_iter, x0=x0)
        mid_coeffs = b.build(predictor)
        system = assemble_semi_implicit(mid_coeffs, dt)
        out = solve_pentadiagonal(system, v, tol=tol, max_iter=max_iter, x0=x0)
    if not np.all(np.isfinite(out)):
        raise StepDivergenceError("non-finite values after semi-implicit step")
    return DensityField(problem.grid, out) if wrap else out


@dataclass
class SchemeConfig:
    integrator: str = "si1"
    rule: QuadratureRule = QuadratureRule.GAUSS_LEGENDRE_8
    exact_weights: bool = False

    def __post_init__(self):
        if self.integrator not in EXPLICIT_METHODS + SEMI_IMPLICIT_METHODS:
            raise ConfigurationError(f"unknown integrator {self.integrator!r}")


@dataclass
class RunResult:
    report: StudyReport
    final: DensityField
    snapshots: list = field(default_factory=list)
    n_steps: int = 0


def run(problem: ProblemSpec, scheme: SchemeConfig, policy: TimeStepPolicy,
        observer_stride: int = 1, snapshot_times: Iterable[float] = (),
        solver_tol: float = 1.0e-14) -> RunResult:
    """Advance the problem to policy.T_final, collecting diagnostics.

    Diagnostics rows are recorded at step 0, every `observer_stride` steps,
    and at the final step; relative L1 error, entropy and dissipation are
    collected when the problem carries a reference steady state.  Snapshots
    of the full field are taken at the requested times (the step is
    shortened to land on them exactly).
    """
    if observer_stride < 1:
        raise ConfigurationError("observer_stride must be >= 1")
    grid = problem.grid
    v = problem.f0.values.copy()
    builder = CoefficientBuilder(problem, scheme.rule)
    exact_coeffs = None
    if scheme.exact_weights:
        if problem.f_inf is None:
            raise ConfigurationError("exact-weight scheme needs a reference steady state")
        exact_coeffs = exact_interface_coefficients(
            problem.f_inf, builder.Dcal_x, builder.Dcal_y)

    fixed_builder = _FrozenBuilder(exact_coeffs) if exact_coeffs is not None else builder
    report = StudyReport()
    f_inf = problem.f_inf.values if problem.f_inf is not None else None
    explicit = scheme.integrator in EXPLICIT_METHODS

    def record(t: float) -> None:
        report.times.append(t)
        report.mass.append(grid.dw ** 2 * float(v.sum()))
        report.min_value.append(float(v.min()))
        if f_inf is not None:
            report.rel_L1_error.append(
                float(np.abs(v - f_inf).sum() / np.abs(f_inf).sum()))
            report.entropy.append(relative_entropy_arrays(v, f_inf, grid.dw))
            if np.all(v > 0.0):
                report.dissipation.append(
                    dissipation_arrays(v, f_inf, fixed_builder.build(v)))
            else:
                report.dissipation.append(float("nan"))

    snapshots: list[tuple[float, np.ndarray]] = []
    pending = sorted(set(float(s) for s in snapshot_times if 0.0 < s <= policy.T_final))
    t = 0.0
    n_steps = 0
    record(0.0)
    if 0.0 in set(float(s) for s in snapshot_times):
        snapshots.append((0.0, v.copy()))
    T = policy.T_final
    eps_t = 1.0e-12 * max(1.0, T)
    dt_is_static = policy.mode in ("fixed", "table1", "fig1")
    static_dt = policy_dt(policy, problem) if dt_is_static else None
    bound_checked = False
    prev = None
    while t < T - eps_t:
        if dt_is_static:
            dt = static_dt
        else:
            dt = policy_dt(policy, problem, fixed_builder.build(v))
        if explicit and policy.mode != "explicit-cfl" and not bound_checked:
            # positivity-bound check once per run (warn, do not abort)
            bound = cfl_explicit(fixed_builder.build(v), grid.dw)
            if dt > bound * (1.0 + 1.0e-12):
                warnings.warn(f"explicit dt {dt:.3e} exceeds positivity bound {bound:.3e}")
            bound_checked = True
        target = pending[0] if pending else T
        if t + dt >= target - eps_t:
            dt = target - t
        try:
            if explicit:
                new = step_explicit(v, problem, scheme.rule, dt, scheme.integrator,
                                    builder=fixed_builder)
            else:
                order = 1 if scheme.integrator == "si1" else 2
                guess = np.maximum(2.0 * v - prev, 0.0) if prev is not None else v
                new = step_semi_implicit(v, problem, scheme.rule, dt, order,
                                         builder=fixed_builder, tol=solver_tol,
                                         x0=guess)
        except StepDivergenceError as exc:
            raise StepDivergenceError(str(exc), step_index=n_steps, time=t) from exc
        prev = v
        v = new
        n_steps += 1
        t = target if abs(target - (t + dt)) <= eps_t else t + dt
        if not np.isfinite(v.min()):
            raise StepDivergenceError("non-finite density", step_index=n_steps, time=t)
        if pending and abs(t - pending[0]) <= eps_t:
            snapshots.append((pending.pop(0), v.copy()))
        if n_steps % observer_stride == 0 or t >= T - eps_t:
            record(t)
    return RunResult(report=report, final=DensityField(grid, v),
                     snapshots=snapshots, n_steps=n_steps)


class _FrozenBuilder:
    """Builder facade returning a fixed coefficient set (exact-weight mode)."""

    def __init__(self, coeffs: InterfaceCoefficients):
        self._coeffs = coeffs
        self.depends_on_density = False

    def build(self, _values=None) -> InterfaceCoefficients:
        return self._coeffs
