"""Dirichlet-to-Neumann symbols of z^alpha and of a tabulated non-power coefficient."""

import argparse

import numpy as np

from fraclap.core import write_table
from fraclap.symbol_ode import TabulatedCoefficient, generalized_symbol


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--alphas", type=float, nargs="+", default=[-2.0, -0.5, 0.0, 0.5])
    p.add_argument("--points", type=int, default=12)
    p.add_argument("--out", default="symbol_scaling.csv")
    args = p.parse_args()

    xi = np.geomspace(0.1, 10.0, args.points)
    cols, names = [xi], ["xi"]
    for alpha in args.alphas:
        t = generalized_symbol(alpha, xi)
        print(f"alpha={alpha:+.2f} slope={t.loglog_slope():.6f} expected={2 / (2 - alpha):.6f}")
        cols.append(t.values)
        names.append(f"alpha={alpha}")
    # crossover coefficient: z^-0.5 near 0, z^0.5 far away
    z = np.geomspace(1e-4, 1e4, 200)
    coef = TabulatedCoefficient(z, z**-0.5 + z**0.5)
    t = generalized_symbol(coef, xi)
    print(f"crossover slope={t.loglog_slope():.4f} increasing={t.is_increasing()}")
    cols.append(t.values)
    names.append("crossover")
    write_table(args.out, names, cols)


if __name__ == "__main__":
    main()
