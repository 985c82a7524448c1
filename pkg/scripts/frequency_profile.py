"""Almgren frequency and scaled energy of a mixed-problem solution around the Neumann window."""

import argparse

import numpy as np

from fraclap import FracOrder, SampledFunction, SpatialGrid, VerticalGrid
from fraclap.analysis import almgren_frequency, rellich_residual, scaled_energy
from fraclap.extension import MixedBoundarySpec, solve_mixed


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--s", type=float, default=0.5)
    p.add_argument("--n", type=int, default=256)
    p.add_argument("--out", default="frequency_profile.csv")
    args = p.parse_args()

    o = FracOrder(args.s)
    g = SpatialGrid.torus(args.n, 8.0)
    data = SampledFunction.from_callable(g, lambda x: np.cos(np.pi * x / 4) ** 2 + 0.3 * np.sin(np.pi * x / 2))
    u = solve_mixed(MixedBoundarySpec.ball(data, 4.0, 1.5), VerticalGrid.graded(8.0, 96), o, tol=1e-12)
    radii = np.linspace(0.1, 1.4, 14)
    prof = almgren_frequency(u, radii, center=4.0)
    simple = scaled_energy(u, radii, center=4.0)
    for R, phi, e in zip(radii, prof.phi, simple.phi):
        print(f"R={R:.2f} Phi={phi:.6f} scaled_energy={e:.6e}")
    print(f"max violation {prof.max_violation():.3e}; Rellich residual at R=1: {rellich_residual(u, 1.0, 4.0):.2e}")
    prof.to_csv(args.out)


if __name__ == "__main__":
    main()
