"""Cross-method verification suites.

Each suite returns a list of :class:`Check` records. The report is plain JSON
with sorted keys and round-trip float formatting, so repeated runs are byte
identical.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from typing import Callable

import numpy as np

from .analysis import almgren_frequency, harnack_ratio, rellich_residual, scaled_energy
from .core import FracOrder, HalfPlaneField, SampledFunction, SpatialGrid, VerticalGrid
from .extension import (
    Bump,
    MixedBoundarySpec,
    PoissonKernelSpec,
    conjugate_residual,
    default_vertical_grid,
    dirac_flux,
    discrete_energy,
    extend_poisson,
    extend_variational,
    fundamental_solution,
    neumann_trace,
    nondiv_diagnostics,
    poisson_kernel,
    reflect_even,
    solve_mixed,
    solve_regularized_nondiv,
    weak_form_residual,
)
from .singular_integral import fraclap_integral
from .spectral import fraclap_fourier, spectral_energy
from .symbol_ode import generalized_symbol, symbol_constant

S_VALUES = (0.25, 0.5, 0.75)


@dataclass(frozen=True)
class Check:
    name: str
    measured: float
    tolerance: float
    passed: bool
    note: str = ""

    def to_dict(self) -> dict:
        d = asdict(self)
        d["pass"] = d.pop("passed")
        for k in ("measured", "tolerance"):
            if not math.isfinite(d[k]):
                d[k] = repr(d[k])
        return d


def _rel_max(a, b) -> float:
    return float(np.max(np.abs(a - b)) / np.max(np.abs(b)))


def _le(name: str, measured: float, tol: float, note: str = "") -> Check:
    return Check(name, float(measured), float(tol), bool(measured <= tol), note)


# {{{ suites


def eigenfunction(s_values=S_VALUES, n: int = 512) -> list[Check]:
    """Integral and extension routes against the multiplier on ``cos(2x)``."""
    out = []
    g = SpatialGrid.torus(n)
    f = SampledFunction.from_callable(g, lambda x: np.cos(2 * x))
    vg = default_vertical_grid(g)
    for s in s_values:
        o = FracOrder(s)
        ref = fraclap_fourier(f, s).values
        out.append(_le(f"eigenfunction/integral/s={s}", _rel_max(fraclap_integral(f, o).values, ref), 1e-2))
        tr = neumann_trace(extend_variational(f, vg, o)).values / symbol_constant(o.a)
        out.append(_le(f"eigenfunction/extension/s={s}", _rel_max(tr, ref), 1e-2))
    return out


def symbol(s_values=S_VALUES) -> list[Check]:
    """Log-log slope of the generalised symbol of ``z^alpha`` and ``C_0 = 1``."""
    out = []
    xi = np.geomspace(0.1, 10.0, 12)
    for s in s_values:
        o = FracOrder(s)
        table = generalized_symbol(lambda z, al=o.alpha: np.asarray(z, dtype=float) ** al, xi)
        slope = table.loglog_slope()
        out.append(_le(f"symbol/slope/s={s}", abs(slope - 2.0 / (2.0 - o.alpha)), 1e-2,
                       f"slope={slope!r}"))
        out.append(Check(f"symbol/increasing/s={s}", float(table.is_increasing()), 1.0,
                         table.is_increasing()))
    out.append(_le("symbol/C_0", abs(symbol_constant(0.0) - 1.0), 1e-8))
    return out


def classical(n: int = 256) -> list[Check]:
    """``a = 0``: the Poisson kernel and the Dirichlet-to-Neumann map of the half plane."""
    o = FracOrder(0.5)
    x = np.linspace(-5.0, 5.0, 201)
    y = np.geomspace(1e-3, 10.0, 40)
    X, Y = np.meshgrid(x, y, indexing="ij")
    P = poisson_kernel(X, Y, PoissonKernelSpec(o, 1))
    classic = Y / (np.pi * (X**2 + Y**2))
    out = [_le("classical/kernel", float(np.max(np.abs(P - classic))), 1e-10)]
    g = SpatialGrid.torus(n)
    f = SampledFunction.from_callable(g, lambda t: np.cos(t) + 0.5 * np.sin(3 * t))
    ref = fraclap_fourier(f, 0.5).values
    vg = default_vertical_grid(g)
    out.append(_le("classical/trace/poisson", _rel_max(neumann_trace(extend_poisson(f, vg, o)).values, ref), 1e-2))
    out.append(_le("classical/trace/variational",
                   _rel_max(neumann_trace(extend_variational(f, vg, o)).values, ref), 1e-2))
    return out


def energy(s_values=S_VALUES, n: int = 256, samples: int = 5, seed: int = 7) -> list[Check]:
    """``J(u*) / spectral_energy(f)`` is the same for random band-limited ``f``."""
    out = []
    rng = np.random.default_rng(seed)
    g = SpatialGrid.torus(n)
    x = g.axis()
    vg = default_vertical_grid(g)
    for s in s_values:
        o = FracOrder(s)
        ratios = []
        for _ in range(samples):
            c = rng.normal(size=(6, 2))
            vals = sum(c[k, 0] * np.cos((k + 1) * x) + c[k, 1] * np.sin((k + 1) * x) for k in range(6))
            f = SampledFunction(g, vals)
            ratios.append(discrete_energy(extend_variational(f, vg, o)) / spectral_energy(f, s))
        r = np.array(ratios)
        out.append(_le(f"energy/spread/s={s}", float(r.max() / r.min() - 1.0), 2e-2,
                       f"constant={float(r.mean())!r}"))
    return out


def conjugate(s_values=(0.25, 0.75)) -> list[Check]:
    """Order-two decay of the conjugate-equation residual of the Poisson extension."""
    out = []
    for s in s_values:
        o = FracOrder(s)
        res = []
        for n in (64, 128):
            g = SpatialGrid.torus(n)
            f = SampledFunction.from_callable(g, np.cos)
            res.append(conjugate_residual(extend_poisson(f, VerticalGrid.uniform(4.0, n + 1), o)))
        ratio = res[0] / res[1]
        out.append(Check(f"conjugate/ratio/s={s}", ratio, 0.8, bool(3.2 <= ratio <= 4.8),
                         "pass iff ratio in [3.2, 4.8]"))
    return out


def _mixed_data(g: SpatialGrid) -> SampledFunction:
    return SampledFunction.from_callable(g, lambda x: 1 + np.cos(x) ** 2 + 0.5 * np.sin(2 * x))


def reflection(s_values=S_VALUES, levels: int = 4) -> list[Check]:
    """Weak residual of the even reflection across a Neumann window, under refinement."""
    out = []
    bumps = [Bump((np.pi, 0.0), 0.5), Bump((np.pi + 0.3, 0.0), 0.4), Bump((np.pi - 0.25, -0.02), 0.45)]
    for s in s_values:
        o = FracOrder(s)
        g, vg = SpatialGrid.torus(64), VerticalGrid.graded(6.0, 40)
        worst, hs = [], []
        for _ in range(levels):
            spec = MixedBoundarySpec.ball(_mixed_data(g), np.pi, 1.2)
            ut = reflect_even(solve_mixed(spec, vg, o, tol=1e-12))
            worst.append(max(weak_form_residual(ut, b) for b in bumps))
            hs.append(g.h)
            g, vg = g.refine(), vg.refine()
        order = float(np.polyfit(np.log(hs), np.log(worst), 1)[0])
        out.append(Check(f"reflection/order/s={s}", order, 0.9, bool(order >= 0.9), "pass iff order >= 0.9"))
    return out


def _affine_field(fn: Callable, o: FracOrder) -> HalfPlaneField:
    g = SpatialGrid.line(65, 2.0)
    vg = VerticalGrid.graded(2.0, 40)
    X, Y = np.meshgrid(g.axis(), vg.nodes, indexing="ij")
    return HalfPlaneField(g, vg, fn(X, Y), o)


def almgren(s_values=S_VALUES) -> list[Check]:
    """Frequency of homogeneous fields, monotonicity on a solver field, Rellich identity."""
    out = []
    radii = np.linspace(0.2, 1.8, 10)
    for s in s_values:
        o = FracOrder(s)
        u = _affine_field(lambda X, Y: X, o)
        out.append(_le(f"almgren/x1/s={s}", float(np.max(np.abs(almgren_frequency(u, radii).phi - 1))), 1e-3))
        out.append(_le(f"almgren/rellich_x1/s={s}", rellich_residual(u, 1.5), 1e-3))
        g = SpatialGrid.torus(256, 8.0)
        data = SampledFunction.from_callable(g, lambda x: np.cos(np.pi * x / 4) ** 2 + 0.3 * np.sin(np.pi * x / 2))
        um = solve_mixed(MixedBoundarySpec.ball(data, 4.0, 1.5), VerticalGrid.graded(8.0, 96), o, tol=1e-12)
        r = np.linspace(0.1, 1.4, 10)
        out.append(_le(f"almgren/monotone/s={s}", almgren_frequency(um, r, center=4.0).max_violation(), 1e-6))
        out.append(_le(f"almgren/simple_monotone/s={s}", scaled_energy(um, r, center=4.0).max_violation(), 1e-6))
    u = _affine_field(lambda X, Y: X * Y, FracOrder(0.5))
    out.append(_le("almgren/x1y/a=0", float(np.max(np.abs(almgren_frequency(u, radii).phi - 2))), 1e-3))
    return out


def dirac(a_values=(0.25, 0.5), radius: float = 1.0) -> list[Check]:
    """Weighted flux of the fundamental solution over one decade of heights (``n = 2``)."""
    out = []
    for a in a_values:
        o = FracOrder.from_a(a)
        fl = np.array([dirac_flux(o, 2, radius, d) for d in np.geomspace(1e-3, 1e-2, 5) * radius])
        out.append(_le(f"dirac/spread/n=2/a={a}", float(fl.max() / fl.min() - 1.0), 2e-2,
                       f"flux={float(fl.mean())!r}"))
    return out


def _gamma_trace(g: SpatialGrid, x0: float, o: FracOrder) -> SampledFunction:
    d = np.maximum(np.abs(g.axis() - x0), g.h / 2)
    return SampledFunction(g, fundamental_solution(d, 0.0, o, 1))


def harnack(s: float = 0.25, r: float = 1.0, n: int = 401) -> list[Check]:
    """Harnack ratios of translated fundamental solutions (``n = 1``, ``a > 0``)."""
    o = FracOrder(s)
    g = SpatialGrid.line(n, 6.0 * r)
    gf = g.refine()
    centres = np.concatenate([np.linspace(2 * r, 4 * r, 10), -np.linspace(2 * r, 4 * r, 10)])
    coarse = np.array([harnack_ratio(_gamma_trace(g, c, o), r) for c in centres])
    fine = np.array([harnack_ratio(_gamma_trace(gf, c, o), r) for c in centres])
    bound = ((2.5 / 1.5) ** (1 - 2 * s))   # ratio of |x - x0|^-a over B_{r/2} at |x0| = 2r
    return [
        Check("harnack/finite_ge_1", float(coarse.min()), 1.0,
              bool(np.all(np.isfinite(coarse)) and coarse.min() >= 1.0)),
        _le("harnack/family_bound", float(coarse.max()), bound),
        _le("harnack/refinement", float(np.max(np.abs(fine / coarse - 1.0))), 5e-2),
    ]


def _even_data(x, z):
    return np.cos(2 * x) + x * z * z + 0.5 * np.cos(3 * z)


def nondiv(alpha: float = 0.5, eps_values=(0.1, 0.05, 0.025), n: int = 161) -> list[Check]:
    """Regularised nondivergence solves: Cauchy in ``eps``, even symmetry, uniform Hoelder ratio."""
    sols = [solve_regularized_nondiv(_even_data, alpha, e, n=n) for e in eps_values]
    diffs = [float(np.max(np.abs(sols[i].values - sols[i + 1].values))) for i in range(len(sols) - 1)]
    diag = [nondiv_diagnostics(u) for u in sols]
    dz0 = max(d["dz_at_zero"] / d["dz_scale"] for d in diag)
    hs = [d["hoelder_sup"] for d in diag]
    return [
        Check("nondiv/cauchy", diffs[-1] / diffs[0], 1.0, bool(all(b < a for a, b in zip(diffs, diffs[1:]))),
              "pass iff successive differences decrease"),
        _le("nondiv/dz_at_zero", dz0, 1e-8),
        _le("nondiv/hoelder_spread", max(hs) / min(hs) - 1.0, 0.25, f"sup={max(hs)!r}"),
    ]


SUITES: dict[str, Callable[..., list[Check]]] = {
    "eigenfunction": eigenfunction,
    "symbol": symbol,
    "classical": classical,
    "energy": energy,
    "conjugate": conjugate,
    "reflection": reflection,
    "almgren": almgren,
    "dirac": dirac,
    "harnack": harnack,
    "nondiv": nondiv,
}


# }}}


def run_suite(name: str, **kwargs) -> list[Check]:
    if name == "all":
        out = []
        for fn in SUITES.values():
            out.extend(fn())
        return out
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}; choose from {sorted(SUITES)} or 'all'")
    return SUITES[name](**kwargs)


def report(checks: list[Check]) -> str:
    body = {"checks": [c.to_dict() for c in checks], "pass": all(c.passed for c in checks)}
    return json.dumps(body, indent=2, sort_keys=True) + "\n"
