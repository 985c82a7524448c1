"""Ratio of the minimal extension energy to the spectral energy, compared with d_s."""

import argparse

import numpy as np

from fraclap import FracOrder, SampledFunction, SpatialGrid
from fraclap.core import write_table
from fraclap.extension import default_vertical_grid, discrete_energy, extend_variational, weighted_trace_factor
from fraclap.spectral import spectral_energy


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--n", type=int, default=256)
    p.add_argument("--samples", type=int, default=5)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--out", default="energy_constant.csv")
    args = p.parse_args()

    g = SpatialGrid.torus(args.n)
    x = g.axis()
    vg = default_vertical_grid(g)
    rng = np.random.default_rng(args.seed)
    s_values = np.linspace(0.1, 0.9, 9)
    means, spreads, ds = [], [], []
    for s in s_values:
        o = FracOrder(s)
        r = []
        for _ in range(args.samples):
            c = rng.normal(size=(6, 2))
            vals = sum(c[k, 0] * np.cos((k + 1) * x) + c[k, 1] * np.sin((k + 1) * x) for k in range(6))
            f = SampledFunction(g, vals)
            r.append(discrete_energy(extend_variational(f, vg, o)) / spectral_energy(f, s))
        r = np.array(r)
        means.append(r.mean())
        spreads.append(r.max() / r.min() - 1)
        ds.append(weighted_trace_factor(o))
        print(f"s={s:.2f} ratio={means[-1]:.5f} spread={spreads[-1]:.1e} d_s={ds[-1]:.5f}")
    write_table(args.out, ["s", "ratio", "spread", "d_s"], [s_values, means, spreads, ds])


if __name__ == "__main__":
    main()
