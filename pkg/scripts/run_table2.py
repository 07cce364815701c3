#!/usr/bin/env python3
"""Convergence orders for the validation problem with semi-implicit stepping.

First and second order semi-implicit integrators on grids of 21/41/81
points with dt = dw/(20 s1^2), for correlation 0.1 (t = 1, 10, 20) and 0.9
(t = 1, 10, 20, 50).  Writes orders.csv per (integrator, rho) under
out/table2/.
"""

import pathlib
import sys

from fpsp2d.cli import RunConfig, cmd_convergence

OUT = pathlib.Path("out/table2")


def main() -> int:
    for rho, times in ((0.1, (1.0, 10.0, 20.0)), (0.9, (1.0, 10.0, 20.0, 50.0))):
        for integrator in ("si1", "si2"):
            for quadrature in ("nc2", "nc4", "nc6", "gauss8"):
                cfg = RunConfig(kind="test1", rho=rho, d=12.5,
                                quadrature=quadrature, integrator=integrator,
                                dt_policy="fig1", grids=(21, 41, 81), times=times,
                                output_dir=str(OUT / f"rho{rho}_{integrator}_{quadrature}"))
                print(f"== rho={rho} {integrator} / {quadrature} ==")
                cmd_convergence(cfg)
    return 0


if __name__ == "__main__":
    sys.exit(main())
