#!/usr/bin/env python3
"""Convergence orders for the validation problem with explicit stepping.

Reproduces the explicit-integrator order table: relative-L1 errors against
the analytic steady state on grids of 21/41/81 points at t = 1, 10, 20,
with dt = dw^2/(10 s1^2 dw + 10).  Writes one orders.csv per integrator
under out/table1/.  Expect a run time of tens of minutes (the finest grid
takes ~3e5 explicit steps).
"""

import pathlib
import sys

from fpsp2d.cli import RunConfig, cmd_convergence

OUT = pathlib.Path("out/table1")


def main() -> int:
    for integrator in ("euler", "rk4"):
        for quadrature in ("nc2", "nc4", "nc6", "gauss8"):
            cfg = RunConfig(kind="test1", rho=0.1, d=12.5,
                            quadrature=quadrature, integrator=integrator,
                            dt_policy="table1", grids=(21, 41, 81),
                            times=(1.0, 10.0, 20.0),
                            output_dir=str(OUT / f"{integrator}_{quadrature}"))
            print(f"== {integrator} / {quadrature} ==")
            cmd_convergence(cfg)
    return 0


if __name__ == "__main__":
    sys.exit(main())
