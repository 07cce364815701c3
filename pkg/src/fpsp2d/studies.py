"""Study harnesses: single runs, grid-convergence tables, entropy decay.

Runs are described by a small picklable `RunSetup` so that the independent
simulations of a convergence study can execute in worker processes (the
problem objects themselves hold closures and are rebuilt inside each
worker).
"""

from __future__ import annotations

import importlib
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Optional, Sequence

from .diagnostics import rel_L1_error, successive_refinement_order
from .errors import ConfigurationError
from .grid import DensityField, parse_rule
from .model import ProblemSpec, builtin_test1, builtin_test2
from .stepper import RunResult, SchemeConfig, TimeStepPolicy, run

PROBLEM_KINDS = ("test1", "test2", "custom")


@dataclass(frozen=True)
class RunSetup:
    """Everything needed to reproduce one simulation, in plain data."""

    kind: str = "test1"
    module: Optional[str] = None  # "package.module:factory" for kind="custom"
    sigma1: float = 1.0
    sigma2: float = 1.0
    rho: float = 0.1
    d: float = 12.5
    c: float = 30.0
    mu: float = 0.5
    points: int = 81
    quadrature: str = "gauss8"
    integrator: str = "si1"
    dt_policy: str = "fig1"
    dt: Optional[float] = None
    safety: float = 1.0
    t_final: float = 20.0
    observer_stride: int = 100
    snapshot_times: tuple = ()
    exact_weights: bool = False


def build_problem(setup: RunSetup) -> ProblemSpec:
    cells = setup.points - 1
    if setup.kind == "test1":
        return builtin_test1(setup.sigma1, setup.sigma2, setup.rho,
                             setup.d, setup.c, setup.mu, cells)
    if setup.kind == "test2":
        return builtin_test2(setup.sigma1, setup.sigma2, setup.rho,
                             setup.c, setup.mu, cells)
    if setup.kind == "custom":
        if not setup.module or ":" not in setup.module:
            raise ConfigurationError(
                "custom problems need problem.module = 'package.module:factory'")
        mod_name, func_name = setup.module.split(":", 1)
        factory = getattr(importlib.import_module(mod_name), func_name)
        problem = factory(cells)
        if not isinstance(problem, ProblemSpec):
            raise ConfigurationError(f"{setup.module} did not return a ProblemSpec")
        return problem
    raise ConfigurationError(f"unknown problem kind {setup.kind!r}")


def execute(setup: RunSetup) -> RunResult:
    """Run one simulation described by `setup` (top-level, hence picklable)."""
    problem = build_problem(setup)
    scheme = SchemeConfig(integrator=setup.integrator,
                          rule=parse_rule(setup.quadrature),
                          exact_weights=setup.exact_weights)
    policy = TimeStepPolicy(mode=setup.dt_policy, dt=setup.dt,
                            safety=setup.safety, T_final=setup.t_final)
    return run(problem, scheme, policy,
               observer_stride=setup.observer_stride,
               snapshot_times=setup.snapshot_times)


def _workers(n_jobs: int, workers: Optional[int]) -> int:
    if workers is None:
        workers = int(os.environ.get("FPSP2D_WORKERS", os.cpu_count() or 1))
    return max(1, min(workers, n_jobs))


def run_many(setups: Sequence[RunSetup], workers: Optional[int] = None) -> list[RunResult]:
    """Execute independent runs, possibly in parallel worker processes."""
    w = _workers(len(setups), workers)
    if w <= 1 or len(setups) <= 1:
        return [execute(s) for s in setups]
    with ProcessPoolExecutor(max_workers=w) as pool:
        return list(pool.map(execute, setups))


@dataclass
class OrderRow:
    quadrature: str
    integrator: str
    time: float
    order: Optional[float]          # finest-pair observed order
    order_coarse: Optional[float]   # coarsest-pair observed order
    errors: tuple = ()              # per-grid errors (test1 only)


@dataclass
class RunStats:
    points: int
    n_steps: int
    mass_initial: float
    mass_final: float
    min_final: float

    @property
    def mass_drift(self) -> float:
        return abs(self.mass_final - self.mass_initial) / abs(self.mass_initial)


@dataclass
class StudyOutcome:
    rows: list
    runs: list


def _stats_of(points: int, res: RunResult) -> RunStats:
    return RunStats(points=points, n_steps=res.n_steps,
                    mass_initial=res.report.mass[0],
                    mass_final=res.report.mass[-1],
                    min_final=float(res.final.values.min()))


def _validate_grids(grid_points: Sequence[int]) -> None:
    if len(grid_points) < 3:
        raise ConfigurationError("convergence study needs at least 3 grids")
    for a, b in zip(grid_points, grid_points[1:]):
        if b - 1 != 2 * (a - 1):
            raise ConfigurationError(
                f"grids must be nested with doubling cell counts; "
                f"{b} points does not refine {a} points")


def _log2_ratio(num: float, den: float) -> Optional[float]:
    if num <= 0.0 or den <= 0.0:
        return None
    return math.log2(num / den)


def batch_convergence(bases: Sequence[RunSetup], grid_points: Sequence[int],
                      times: Sequence[float],
                      workers: Optional[int] = None) -> list[StudyOutcome]:
    """Convergence studies for several scheme variants sharing one pool.

    For problems with an analytic steady state the order at each time is
    the log2 ratio of relative L1 errors on successive grids; otherwise it
    is the successive-refinement order of the three solutions restricted to
    the coarse nodes.  One row per (quadrature, integrator, time).
    """
    _validate_grids(grid_points)
    times = sorted(set(float(t) for t in times))
    t_final = times[-1]
    setups = []
    for base in bases:
        setups.extend(replace(base, points=p, t_final=t_final,
                              snapshot_times=tuple(times), observer_stride=10 ** 9)
                      for p in grid_points)
    all_results = run_many(setups, workers=workers)

    outcomes = []
    n_grids = len(grid_points)
    for b, base in enumerate(bases):
        results = all_results[b * n_grids:(b + 1) * n_grids]
        fields: dict[tuple[int, float], DensityField] = {}
        for p, res in zip(grid_points, results):
            grid = res.final.grid
            for t, values in res.snapshots:
                fields[(p, t)] = DensityField(grid, values)
            fields[(p, t_final)] = res.final

        reference = build_problem(base).f_inf is not None
        rows: list[OrderRow] = []
        for t in times:
            if reference:
                errs = []
                for p in grid_points:
                    problem = build_problem(replace(base, points=p))
                    errs.append(rel_L1_error(fields[(p, t)], problem.f_inf))
                order_fine = _log2_ratio(errs[-2], errs[-1])
                order_coarse = _log2_ratio(errs[0], errs[1])
                rows.append(OrderRow(base.quadrature, base.integrator, t,
                                     order_fine, order_coarse, tuple(errs)))
            else:
                triple = [fields[(p, t)] for p in grid_points[-3:]]
                order = successive_refinement_order(*triple)
                coarse = None
                if len(grid_points) >= 4:
                    coarse = successive_refinement_order(
                        *[fields[(p, t)] for p in grid_points[-4:-1]])
                rows.append(OrderRow(base.quadrature, base.integrator, t,
                                     order, coarse))
        outcomes.append(StudyOutcome(
            rows=rows,
            runs=[_stats_of(p, r) for p, r in zip(grid_points, results)]))
    return outcomes


def convergence_study(base: RunSetup, grid_points: Sequence[int],
                      times: Sequence[float],
                      workers: Optional[int] = None) -> StudyOutcome:
    """Convergence study for a single scheme variant."""
    return batch_convergence([base], grid_points, times, workers=workers)[0]


@dataclass
class EntropyRow:
    time: float
    H_delta: float
    I_delta: float
    dH_dt_fd: Optional[float]


def entropy_rows(report) -> list[EntropyRow]:
    """Per-record entropy table with finite-difference entropy derivative."""
    rows = []
    for k, t in enumerate(report.times):
        if k == 0:
            fd = None
        else:
            dt = t - report.times[k - 1]
            fd = (report.entropy[k] - report.entropy[k - 1]) / dt if dt > 0 else None
        rows.append(EntropyRow(t, report.entropy[k], report.dissipation[k], fd))
    return rows


def entropy_study(base: RunSetup, grid_points: Sequence[int],
                  workers: Optional[int] = None) -> dict[int, list[EntropyRow]]:
    """Entropy/dissipation time series for each requested grid."""
    setups = [replace(base, points=p, observer_stride=1, snapshot_times=())
              for p in grid_points]
    results = run_many(setups, workers=workers)
    out = {}
    for p, res in zip(grid_points, results):
        if not res.report.entropy:
            raise ConfigurationError("entropy study needs an analytic steady state")
        out[p] = entropy_rows(res.report)
    return out
