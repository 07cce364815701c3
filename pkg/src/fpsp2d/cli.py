"""Command-line interface: run / convergence / entropy / validate.

Configuration is a flat key-value text file with section-prefixed keys
(``problem.rho = 0.9``); command-line flags override file values.  All
outputs are CSV with 17-significant-digit floats, which round-trips binary
doubles exactly.  Exit codes: 0 success, 2 configuration error, 3 numerical
failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import math
import sys
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Optional

from .errors import (ConfigurationError, DomainError,
                     NotPositiveDefiniteError, NumericalEvaluationError,
                     SolverError, StepDivergenceError)
from .grid import RULE_ALIASES
from .stepper import EXPLICIT_METHODS, SEMI_IMPLICIT_METHODS
from .studies import (RunSetup, convergence_study, entropy_rows,
                      entropy_study, execute)

INTEGRATORS = EXPLICIT_METHODS + SEMI_IMPLICIT_METHODS
DT_POLICIES = ("fixed", "table1", "fig1", "explicit-cfl", "semi-implicit-cfl")


@dataclass(frozen=True)
class RunConfig:
    """Validated configuration for the CLI commands.

    The defaults reproduce the long-time error-decay setup: the validation
    problem with sigma1 = sigma2 = 1, rho = 0.9, 81 grid points,
    semi-implicit stepping with dt = dw/20 up to t = 80.
    """

    kind: str = "test1"
    module: Optional[str] = None
    sigma1: float = 1.0
    sigma2: float = 1.0
    rho: float = 0.9
    d: float = 12.5
    c: float = 30.0
    mu: float = 0.5
    points: int = 81
    quadrature: str = "gauss8"
    integrator: str = "si1"
    dt_policy: str = "fig1"
    dt: Optional[float] = None
    safety: float = 1.0
    t_final: float = 80.0
    observer_stride: int = 100
    snapshot_times: tuple = ()
    exact_weights: bool = False
    output_dir: str = "out"
    grids: tuple = (21, 41, 81)
    times: tuple = (1.0, 10.0, 20.0)
    entropy_points: tuple = (10, 20)


# config-file key -> (dataclass field, parser)
def _parse_bool(s: str) -> bool:
    if s.lower() in ("true", "yes", "1", "on"):
        return True
    if s.lower() in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _parse_float_list(s: str) -> tuple:
    return tuple(float(x) for x in s.split(",") if x.strip() != "")


def _parse_int_list(s: str) -> tuple:
    return tuple(int(x) for x in s.split(",") if x.strip() != "")


_KEYS = {
    "problem.kind": ("kind", str),
    "problem.module": ("module", str),
    "problem.sigma1": ("sigma1", float),
    "problem.sigma2": ("sigma2", float),
    "problem.rho": ("rho", float),
    "problem.d": ("d", float),
    "problem.c": ("c", float),
    "problem.mu": ("mu", float),
    "run.points": ("points", int),
    "run.quadrature": ("quadrature", str),
    "run.integrator": ("integrator", str),
    "run.dt_policy": ("dt_policy", str),
    "run.dt": ("dt", float),
    "run.safety": ("safety", float),
    "run.t_final": ("t_final", float),
    "run.observer_stride": ("observer_stride", int),
    "run.snapshot_times": ("snapshot_times", _parse_float_list),
    "run.exact_weights": ("exact_weights", _parse_bool),
    "output.dir": ("output_dir", str),
    "study.grids": ("grids", _parse_int_list),
    "study.times": ("times", _parse_float_list),
    "study.entropy_points": ("entropy_points", _parse_int_list),
}
_FIELD_TO_KEY = {f: k for k, (f, _) in _KEYS.items()}


def validate_config(cfg: RunConfig) -> RunConfig:
    problems = []
    if cfg.kind not in ("test1", "test2", "custom"):
        problems.append(f"problem.kind: unknown kind {cfg.kind!r}")
    if cfg.kind == "custom" and not cfg.module:
        problems.append("problem.module: required for custom problems")
    if cfg.sigma1 <= 0:
        problems.append(f"problem.sigma1: must be positive, got {cfg.sigma1}")
    if cfg.sigma2 <= 0:
        problems.append(f"problem.sigma2: must be positive, got {cfg.sigma2}")
    if abs(cfg.rho) >= 1:
        problems.append(f"problem.rho: |rho| must be < 1 to keep the diffusion "
                        f"positive definite, got {cfg.rho}")
    if cfg.points < 5:
        problems.append(f"run.points: need at least 5 grid points, got {cfg.points}")
    if cfg.quadrature not in RULE_ALIASES:
        problems.append(f"run.quadrature: unknown rule {cfg.quadrature!r}, "
                        f"expected one of {sorted(RULE_ALIASES)}")
    if cfg.integrator not in INTEGRATORS:
        problems.append(f"run.integrator: unknown integrator {cfg.integrator!r}, "
                        f"expected one of {INTEGRATORS}")
    if cfg.dt_policy not in DT_POLICIES:
        problems.append(f"run.dt_policy: unknown policy {cfg.dt_policy!r}, "
                        f"expected one of {DT_POLICIES}")
    if cfg.dt_policy == "fixed" and (cfg.dt is None or cfg.dt <= 0):
        problems.append("run.dt: fixed dt policy needs a positive run.dt")
    if not 0 < cfg.safety <= 1:
        problems.append(f"run.safety: must be in (0, 1], got {cfg.safety}")
    if cfg.t_final < 0:
        problems.append(f"run.t_final: must be nonnegative, got {cfg.t_final}")
    if cfg.observer_stride < 1:
        problems.append(f"run.observer_stride: must be >= 1, got {cfg.observer_stride}")
    if any(p < 5 for p in cfg.grids):
        problems.append(f"study.grids: every grid needs at least 5 points, got {cfg.grids}")
    if any(p < 5 for p in cfg.entropy_points):
        problems.append(f"study.entropy_points: every grid needs at least 5 points, "
                        f"got {cfg.entropy_points}")
    if problems:
        raise ConfigurationError("invalid configuration:\n  " + "\n  ".join(problems))
    return cfg


def parse_config(path: str | Path) -> RunConfig:
    """Parse a flat `section.key = value` file; unknown keys are rejected."""
    text = Path(path).read_text()
    values: dict = {}
    unknown = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigurationError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if key not in _KEYS:
            unknown.append(f"{path}:{lineno}: unknown key {key!r}")
            continue
        field_name, conv = _KEYS[key]
        try:
            values[field_name] = conv(val)
        except ValueError as exc:
            raise ConfigurationError(f"{path}:{lineno}: bad value for {key}: {exc}")
    if unknown:
        raise ConfigurationError("invalid configuration:\n  " + "\n  ".join(unknown))
    return validate_config(RunConfig(**values))


def serialize_config(cfg: RunConfig) -> str:
    """Canonical text form; parse(serialize(cfg)) == cfg."""
    lines = []
    for f in fields(RunConfig):
        value = getattr(cfg, f.name)
        if value is None:
            continue
        key = _FIELD_TO_KEY[f.name]
        if isinstance(value, tuple):
            value = ",".join(_fmt(v) if isinstance(v, float) else str(v) for v in value)
            if value == "":
                continue
        elif isinstance(value, bool):
            value = "true" if value else "false"
        elif isinstance(value, float):
            value = _fmt(value)
        lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"


def _fmt(x) -> str:
    """17-significant-digit decimal; lossless for binary64."""
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    return f"{float(x):.17g}"


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) if isinstance(v, (float, type(None))) else str(v)
                              for v in row) + "\n")


def config_to_setup(cfg: RunConfig) -> RunSetup:
    names = {f.name for f in fields(RunSetup)}
    payload = {k: v for k, v in dataclasses.asdict(cfg).items() if k in names}
    return RunSetup(**payload)


def cmd_run(cfg: RunConfig) -> int:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    result = execute(config_to_setup(cfg))
    report = result.report
    rows = []
    n = len(report.times)
    for k in range(n):
        rows.append([
            report.times[k], report.mass[k], report.min_value[k],
            report.rel_L1_error[k] if report.rel_L1_error else None,
            report.entropy[k] if report.entropy else None,
            report.dissipation[k] if report.dissipation else None,
        ])
    _write_csv(out / "diagnostics.csv",
               ["time", "mass", "min_f", "rel_l1_err", "entropy", "dissipation"], rows)
    if result.snapshots:
        snap_dir = out / "snapshots"
        snap_dir.mkdir(exist_ok=True)
        grid = result.final.grid
        for k, (t, values) in enumerate(result.snapshots):
            with open(snap_dir / f"snapshot_{k:04d}.csv", "w") as fh:
                fh.write("N,a,b,time\n")
                fh.write(f"{grid.N},{_fmt(grid.a)},{_fmt(grid.b)},{_fmt(t)}\n")
                for i in range(grid.N + 1):
                    fh.write(",".join(_fmt(v) for v in values[i, :]) + "\n")
    print(f"run finished: {result.n_steps} steps, final mass {report.mass[-1]:.12f}")
    return 0


def cmd_convergence(cfg: RunConfig) -> int:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = convergence_study(config_to_setup(cfg), cfg.grids, cfg.times).rows
    table = []
    for r in rows:
        record = [r.quadrature, r.integrator, r.time, r.order, r.order_coarse]
        record.extend(r.errors if r.errors else [None] * len(cfg.grids))
        table.append(record)
    err_cols = [f"err_p{p}" for p in cfg.grids]
    _write_csv(out / "orders.csv",
               ["quadrature", "integrator", "time", "order", "order_coarse"] + err_cols,
               table)
    for r in rows:
        order = "saturated" if r.order is None else f"{r.order:.4f}"
        print(f"{r.quadrature} {r.integrator} t={r.time:g}: order {order}")
    return 0


def cmd_entropy(cfg: RunConfig) -> int:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    per_grid = entropy_study(config_to_setup(cfg), cfg.entropy_points)
    for p, rows in per_grid.items():
        _write_csv(out / f"entropy_p{p}.csv",
                   ["time", "H_delta", "I_delta", "dH_dt_fd"],
                   [[r.time, r.H_delta, r.I_delta, r.dH_dt_fd] for r in rows])
        drops = sum(1 for a, b in zip(rows, rows[1:]) if b.H_delta > a.H_delta + 1e-12)
        print(f"points={p}: {len(rows)} records, entropy increases: {drops}")
    return 0


def cmd_validate(cfg: RunConfig) -> int:
    sys.stdout.write(serialize_config(cfg))
    return 0


def _apply_overrides(cfg: RunConfig, args: argparse.Namespace) -> RunConfig:
    updates = {}
    if args.out is not None:
        updates["output_dir"] = args.out
    if args.quadrature is not None:
        updates["quadrature"] = args.quadrature
    if args.integrator is not None:
        updates["integrator"] = args.integrator
    if getattr(args, "grids", None) is not None:
        updates["grids"] = _parse_int_list(args.grids)
    if getattr(args, "times", None) is not None:
        updates["times"] = _parse_float_list(args.times)
    if updates:
        cfg = replace(cfg, **updates)
    return validate_config(cfg)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fpsp2d",
        description="Structure-preserving 2D Fokker-Planck solver")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("run", "convergence", "entropy", "validate"):
        p = sub.add_parser(name)
        p.add_argument("--config", help="flat key-value configuration file")
        p.add_argument("--out", help="output directory")
        p.add_argument("--quadrature", choices=sorted(RULE_ALIASES))
        p.add_argument("--integrator", choices=INTEGRATORS)
        if name == "convergence":
            p.add_argument("--grids", help="comma list of nested grid point counts")
            p.add_argument("--times", help="comma list of measurement times")
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = parse_config(args.config) if args.config else validate_config(RunConfig())
        cfg = _apply_overrides(cfg, args)
        if args.command == "run":
            return cmd_run(cfg)
        if args.command == "convergence":
            return cmd_convergence(cfg)
        if args.command == "entropy":
            return cmd_entropy(cfg)
        return cmd_validate(cfg)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (SolverError, StepDivergenceError, NumericalEvaluationError,
            NotPositiveDefiniteError, DomainError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except FileNotFoundError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
