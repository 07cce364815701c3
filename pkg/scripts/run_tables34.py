#!/usr/bin/env python3
"""Successive-refinement orders for the alignment problem (no analytic
steady state): explicit integrators with the parabolic step and
semi-implicit integrators with dt = dw/20, grids 21/41/81, t = 1, 10, 20.
Writes orders.csv per (integrator, quadrature) under out/tables34/.
The explicit blocks take tens of minutes."""

import pathlib
import sys

from fpsp2d.cli import RunConfig, cmd_convergence

OUT = pathlib.Path("out/tables34")


def main() -> int:
    blocks = (("euler", "table1"), ("rk4", "table1"), ("si1", "fig1"), ("si2", "fig1"))
    for integrator, policy in blocks:
        for quadrature in ("nc2", "nc4", "nc6", "gauss8"):
            cfg = RunConfig(kind="test2", rho=0.1, quadrature=quadrature,
                            integrator=integrator, dt_policy=policy,
                            grids=(21, 41, 81), times=(1.0, 10.0, 20.0),
                            output_dir=str(OUT / f"{integrator}_{quadrature}"))
            print(f"== {integrator} / {quadrature} ==")
            cmd_convergence(cfg)
    return 0


if __name__ == "__main__":
    sys.exit(main())
