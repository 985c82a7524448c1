"""Max-norm error of the integral and extension routes on cos(2x) as the torus grid is refined."""

import argparse

import numpy as np

from fraclap import FracOrder, SampledFunction, SpatialGrid
from fraclap.core import write_table
from fraclap.extension import default_vertical_grid, extend_variational, neumann_trace
from fraclap.singular_integral import fraclap_integral
from fraclap.spectral import fraclap_fourier
from fraclap.symbol_ode import closed_form_symbol_constant


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--s", type=float, nargs="+", default=[0.25, 0.5, 0.75])
    p.add_argument("--sizes", type=int, nargs="+", default=[64, 128, 256, 512])
    p.add_argument("--out", default="eigenfunction_convergence.csv")
    args = p.parse_args()

    rows = {"s": [], "N": [], "integral": [], "extension": []}
    for s in args.s:
        o = FracOrder(s)
        for n in args.sizes:
            g = SpatialGrid.torus(n)
            f = SampledFunction.from_callable(g, lambda x: np.cos(2 * x))
            ref = fraclap_fourier(f, s).values
            scale = np.max(np.abs(ref))
            e_int = np.max(np.abs(fraclap_integral(f, o).values - ref)) / scale
            tr = neumann_trace(extend_variational(f, default_vertical_grid(g), o)).values
            e_ext = np.max(np.abs(tr / closed_form_symbol_constant(o.a) - ref)) / scale
            for k, v in zip(rows, (s, n, e_int, e_ext)):
                rows[k].append(v)
            print(f"s={s:<5} N={n:<5} integral={e_int:.3e} extension={e_ext:.3e}")
    write_table(args.out, list(rows), list(rows.values()))


if __name__ == "__main__":
    main()
