#!/usr/bin/env python3
"""Mean-field phase portraits on the Bloch ball for three dissipation mixes:
purely collective, with local pumping, and with local dephasing.

Writes one SVG per regime plus a fixed-point table to results/portraits/.
"""

import pathlib
import sys

import numpy as np

from spindrift import meanfield, plots
from spindrift.model import ModelParams

RESULTS = pathlib.Path(__file__).parent.parent / "results" / "portraits"

B = 1.0
DRIVE = tuple(B / np.sqrt(2.0) * np.array([-1.0, 0.0, 1.0]))

REGIMES = {
    "collective": ModelParams(B=DRIVE, kappa_plus=0.8 * B, N=40),
    "local_pump": ModelParams(B=DRIVE, kappa_plus=0.8 * B, gamma_plus=0.2 * B, N=40),
    "local_dephasing": ModelParams(B=DRIVE, kappa_plus=0.8 * B, gamma_z=0.4 * B, N=40),
}


def seed_grid(params: ModelParams) -> np.ndarray:
    if params.local_rates_zero:
        return meanfield.fibonacci_sphere(24)
    gen = np.random.default_rng(10)
    seeds = gen.normal(size=(24, 3))
    radius = gen.uniform(0.2, 1.0, size=24) ** (1.0 / 3.0)
    return seeds * (radius / np.linalg.norm(seeds, axis=1))[:, None]


def main() -> int:
    RESULTS.mkdir(parents=True, exist_ok=True)
    for name, params in REGIMES.items():
        trajs = meanfield.phase_portrait(params, seed_grid(params),
                                         t_final=50.0 / B, n_times=400, dt=5e-3)
        svg = RESULTS / f"portrait_{name}.svg"
        plots.ball_trajectories(svg, trajs, f"mean-field flow: {name}")
        constraint = "sphere" if params.local_rates_zero else "ball"
        fps = meanfield.find_fixed_points(params, n_seeds=64,
                                          constraint=constraint)
        print(f"{name}: wrote {svg}")
        for fp in fps:
            loc = np.round(fp.location, 4)
            print(f"  fixed point {loc} |r|={np.linalg.norm(fp.location):.4f} "
                  f"-> {fp.classification}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
