#!/usr/bin/env python3
"""Long-time relative-L1 error decay and entropy dissipation.

Left panel: error against the analytic steady state over [0, 80] at 81
points, semi-implicit stepping with dt = dw/20, rho = 0.9, one run per
quadrature rule (out/fig1/<rule>/diagnostics.csv has the error series).
Right panel: entropy/dissipation series on two coarse grids
(out/fig1/entropy/entropy_p{10,20}.csv).
"""

import pathlib
import sys

from fpsp2d.cli import RunConfig, cmd_entropy, cmd_run

OUT = pathlib.Path("out/fig1")


def main() -> int:
    for quadrature in ("mid", "nc2", "nc4", "nc6", "gauss8"):
        cfg = RunConfig(kind="test1", rho=0.9, d=12.5, points=81,
                        quadrature=quadrature, integrator="si1",
                        dt_policy="fig1", t_final=80.0, observer_stride=80,
                        output_dir=str(OUT / quadrature))
        print(f"== error decay, {quadrature} ==")
        cmd_run(cfg)
    entropy_cfg = RunConfig(kind="test1", rho=0.9, d=12.5, quadrature="gauss8",
                            integrator="si1", dt_policy="fig1", t_final=10.0,
                            entropy_points=(10, 20),
                            output_dir=str(OUT / "entropy"))
    print("== entropy decay ==")
    cmd_entropy(entropy_cfg)
    return 0


if __name__ == "__main__":
    sys.exit(main())
