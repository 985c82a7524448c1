"""Command-line front end.

Every subcommand reads its options from flags, optionally seeded by a JSON
``--config`` file whose keys are the long option names (dashes or
underscores). ``--dump-defaults`` prints the effective options and exits.
"""

from __future__ import annotations

import argparse
import inspect
import json
import sys
from pathlib import Path

import numpy as np

from . import verify as _verify
from .analysis import (
    almgren_frequency,
    boundary_harnack_ratio,
    harnack_ratio,
    rellich_residual,
    scaled_energy,
)
from .core import FracOrder, HalfPlaneField, SampledFunction, SpatialGrid, VerticalGrid, write_table
from .extension import (
    CLOSURES,
    TRACE_METHODS,
    MixedBoundarySpec,
    SolverError,
    default_vertical_grid,
    discrete_energy,
    extend_poisson,
    extend_variational,
    neumann_trace,
    nondiv_diagnostics,
    solve_mixed,
    solve_regularized_nondiv,
)
from .singular_integral import QuadConfig, fraclap_integral
from .spectral import fraclap_fourier, spectral_energy
from .symbol_ode import TabulatedCoefficient, generalized_symbol, symbol_constant

_NAMESPACE = {name: getattr(np, name) for name in
              ("sin", "cos", "tan", "exp", "log", "sqrt", "abs", "pi", "tanh", "cosh", "sinh", "where",
               "maximum", "minimum")}


TAILS = ("zero", "power", "constant", "linear")


class UsageError(ValueError):
    pass


def _expression(expr: str, names: tuple[str, ...]):
    code = compile(expr, "<function>", "eval")
    bad = set(code.co_names) - set(_NAMESPACE) - set(names)
    if bad:
        raise UsageError(f"unknown names in expression {expr!r}: {sorted(bad)}")

    def fn(*args):
        return eval(code, {"__builtins__": {}}, {**_NAMESPACE, **dict(zip(names, args))})
    return fn


# {{{ shared option groups


def _add_data(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("input data")
    g.add_argument("--input", help="CSV written by this tool (grid read from the JSON sidecar)")
    g.add_argument("--function", default="cos(2*x)",
                   help="numpy expression in x (and y in 2-D) used when --input is absent")
    g.add_argument("--grid", choices=("torus", "line"), default="torus")
    g.add_argument("--n", type=int, default=256, help="nodes per axis")
    g.add_argument("--length", type=float, default=2 * np.pi,
                   help="torus period, or half width of the line grid")
    g.add_argument("--dim", type=int, choices=(1, 2), default=1)


def _add_vertical(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("vertical grid")
    g.add_argument("--levels", type=int, default=96)
    g.add_argument("--ratio", type=float, default=1.15)
    g.add_argument("--height", type=float, default=None, help="defaults to 10/k_min")


def _data(args) -> SampledFunction:
    if args.input:
        return SampledFunction.from_csv(args.input)
    if args.grid == "torus":
        grid = SpatialGrid.torus(args.n, args.length, args.dim)
    else:
        grid = SpatialGrid.line(args.n, args.length, args.dim)
    names = ("x", "y")[: args.dim]
    return SampledFunction.from_callable(grid, _expression(args.function, names))


def _vertical(args, xgrid: SpatialGrid) -> VerticalGrid:
    return default_vertical_grid(xgrid, args.levels, args.ratio, args.height)


def _floats(text: str) -> np.ndarray:
    try:
        return np.array([float(t) for t in text.split(",") if t.strip()])
    except ValueError as exc:
        raise UsageError(f"expected comma-separated numbers, got {text!r}") from exc


def _emit_json(obj: dict, out) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


# }}}

# {{{ commands


def cmd_fraclap(args) -> int:
    f = _data(args)
    o = FracOrder(args.s)
    if args.method == "fourier":
        g = fraclap_fourier(f, args.s)
    elif args.method == "integral":
        cfg = QuadConfig(args.delta, args.images, args.symmetrize)
        g = fraclap_integral(f, o, cfg, tail=args.tail)
    else:
        u = extend_variational(f, _vertical(args, f.grid), o, closure=args.closure, tail=args.tail)
        g = neumann_trace(u, args.trace_method)
        g = g.with_values(g.values / symbol_constant(o.a))
    g.to_csv(args.out)
    return 0


def cmd_energy(args) -> int:
    f = _data(args)
    if args.side == "spectral":
        value = spectral_energy(f, args.s)
    else:
        value = discrete_energy(extend_variational(f, _vertical(args, f.grid), FracOrder(args.s)))
    _emit_json({"side": args.side, "s": args.s, "energy": value}, args.out)
    return 0


def cmd_extend(args) -> int:
    f = _data(args)
    o = FracOrder(args.s)
    vg = _vertical(args, f.grid)
    if args.method == "poisson":
        u = extend_poisson(f, vg, o, tail=args.tail)
    else:
        u = extend_variational(f, vg, o, closure=args.closure, tail=args.tail)
    u.to_csv(args.out)
    return 0


def cmd_solve_dirichlet(args) -> int:
    f = _data(args)
    spec = MixedBoundarySpec.ball(f, _floats(args.center), args.radius)
    u = solve_mixed(spec, _vertical(args, f.grid), FracOrder(args.s), closure=args.closure, tol=args.tol)
    u.to_csv(args.out)
    return 0


def cmd_nondiv(args) -> int:
    u = solve_regularized_nondiv(_expression(args.function, ("x", "z")), args.alpha, args.eps,
                                 args.radius, args.n)
    X, Z = np.meshgrid(u.axis, u.axis, indexing="ij")
    write_table(args.out, ["x", "z", "inside", "value"],
                [X.ravel(), Z.ravel(), u.inside.ravel().astype(float), u.values.ravel()])
    _emit_json(nondiv_diagnostics(u, args.delta), None)
    return 0


def cmd_symbol(args) -> int:
    if (args.alpha is None) == (args.coef_file is None):
        raise UsageError("give exactly one of --alpha and --coef-file")
    if not 0 < args.xi_min < args.xi_max or args.points < 2:
        raise UsageError("need 0 < xi-min < xi-max and at least two points")
    xi = np.geomspace(args.xi_min, args.xi_max, args.points)
    coef = args.alpha if args.coef_file is None else TabulatedCoefficient.from_csv(args.coef_file)
    table = generalized_symbol(coef, xi)
    table.to_csv(args.out)
    return 0


def cmd_frequency(args) -> int:
    u = HalfPlaneField.from_csv(args.field)
    radii = _floats(args.radii)
    center = None if args.center is None else _floats(args.center)
    if args.kind == "rellich":
        res = [rellich_residual(u, R, center) for R in radii]
        write_table(args.out, ["R", "residual"], [radii, res])
        return 0
    fn = scaled_energy if args.kind == "simple" else almgren_frequency
    fn(u, radii, center).to_csv(args.out)
    return 0


def cmd_harnack(args) -> int:
    f = SampledFunction.from_csv(args.input)
    center = _floats(args.center)
    if args.mode == "interior":
        value = harnack_ratio(f, args.r, center)
    else:
        if not args.input_g:
            raise UsageError("boundary mode needs --input-g")
        g = SampledFunction.from_csv(args.input_g)
        r2 = sum((x - c) ** 2 for x, c in zip(f.grid.coords(), center))
        value = boundary_harnack_ratio(f, g, r2 < args.r**2, r2 < (args.r / 2) ** 2)
    _emit_json({"mode": args.mode, "r": args.r, "ratio": value}, args.out)
    return 0


def cmd_verify(args) -> int:
    if args.suite == "all":
        checks = _verify.run_suite("all")
    else:
        fn = _verify.SUITES[args.suite]
        params = inspect.signature(fn).parameters
        kw = {}
        if args.s is not None:
            if "s_values" not in params:
                raise UsageError(f"suite {args.suite!r} does not take --s")
            kw["s_values"] = (args.s,)
        if args.n is not None:
            if "n" not in params:
                raise UsageError(f"suite {args.suite!r} does not take --n")
            kw["n"] = args.n
        checks = fn(**kw)
    text = _verify.report(checks)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0 if all(c.passed for c in checks) else 1


# }}}


def build_parser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    parser = argparse.ArgumentParser(prog="fraclap", description="Fractional Laplacian toolkit.")
    sub = parser.add_subparsers(dest="command", required=True)
    subs: dict[str, argparse.ArgumentParser] = {}

    def add(name: str, fn, help_: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", help="JSON file of option defaults")
        p.add_argument("--dump-defaults", action="store_true", help="print effective options and exit")
        p.set_defaults(func=fn)
        subs[name] = p
        return p

    p = add("fraclap", cmd_fraclap, "apply (-Delta)^s to sampled data")
    p.add_argument("--method", choices=("fourier", "integral", "extension"), default="fourier")
    p.add_argument("--s", type=float, default=0.5)
    p.add_argument("--out", default="fraclap.csv")
    p.add_argument("--delta", type=float, default=1.0)
    p.add_argument("--images", type=int, default=64)
    p.add_argument("--symmetrize", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--tail", choices=TAILS, default="zero",
                   help="continuation past a line grid (integral: zero|power; extension: zero|constant|linear)")
    p.add_argument("--closure", choices=CLOSURES, default="zero")
    p.add_argument("--trace-method", choices=TRACE_METHODS, default="incremental_quotient")
    _add_data(p)
    _add_vertical(p)

    p = add("energy", cmd_energy, "spectral or extension energy of sampled data")
    p.add_argument("--side", choices=("spectral", "extension"), default="spectral")
    p.add_argument("--s", type=float, default=0.5)
    p.add_argument("--out", default=None)
    _add_data(p)
    _add_vertical(p)

    p = add("extend", cmd_extend, "extend data to the upper half plane")
    p.add_argument("--method", choices=("poisson", "variational"), default="variational")
    p.add_argument("--s", type=float, default=0.5)
    p.add_argument("--out", default="field.csv")
    p.add_argument("--tail", choices=TAILS, default="zero",
                   help="continuation past a line grid (integral: zero|power; extension: zero|constant|linear)")
    p.add_argument("--closure", choices=CLOSURES, default="zero")
    _add_data(p)
    _add_vertical(p)

    p = add("solve-dirichlet", cmd_solve_dirichlet, "mixed problem: data outside a ball, s-harmonic inside")
    p.add_argument("--s", type=float, default=0.5)
    p.add_argument("--center", default="3.141592653589793", help="comma-separated ball centre")
    p.add_argument("--radius", type=float, default=1.0)
    p.add_argument("--closure", choices=CLOSURES, default="neumann")
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--out", default="field.csv")
    _add_data(p)
    _add_vertical(p)

    p = add("nondiv", cmd_nondiv, "regularised nondivergence problem on a disc")
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--eps", type=float, default=0.05)
    p.add_argument("--radius", type=float, default=1.0)
    p.add_argument("--n", type=int, default=81)
    p.add_argument("--function", default="cos(2*x) + x*z*z + 0.5*cos(3*z)",
                   help="Dirichlet data as a numpy expression in x and z")
    p.add_argument("--delta", type=float, default=0.1, help="inner margin for the diagnostics")
    p.add_argument("--out", default="nondiv.csv")

    p = add("symbol", cmd_symbol, "tabulate the Dirichlet-to-Neumann symbol")
    p.add_argument("--alpha", type=float, default=None, help="coefficient z^alpha")
    p.add_argument("--coef-file", default=None, help="CSV with columns z,a")
    p.add_argument("--xi-min", type=float, default=0.1)
    p.add_argument("--xi-max", type=float, default=10.0)
    p.add_argument("--points", type=int, default=50)
    p.add_argument("--out", default="symbol.csv")

    p = add("frequency", cmd_frequency, "energy, frequency or Rellich profiles of a field")
    p.add_argument("--field", required=False, help="field CSV written by extend or solve-dirichlet")
    p.add_argument("--radii", default="0.25,0.5,0.75,1.0")
    p.add_argument("--kind", choices=("simple", "almgren", "rellich"), default="almgren")
    p.add_argument("--center", default=None, help="comma-separated centre on y = 0")
    p.add_argument("--out", default="frequency.csv")

    p = add("harnack", cmd_harnack, "interior or boundary Harnack ratios of traces")
    p.add_argument("--mode", choices=("interior", "boundary"), default="interior")
    p.add_argument("--input", required=False, help="trace CSV")
    p.add_argument("--input-g", default=None, help="second trace CSV (boundary mode)")
    p.add_argument("--r", type=float, default=1.0)
    p.add_argument("--center", default="0.0")
    p.add_argument("--out", default=None)

    p = add("verify", cmd_verify, "run cross-method verification suites")
    p.add_argument("--suite", choices=(*_verify.SUITES, "all"), default="all")
    p.add_argument("--s", type=float, default=None)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--out", default=None)
    return parser, subs


def _load_config(path: str, sub: argparse.ArgumentParser) -> dict:
    try:
        raw = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        sub.error(f"cannot read config {path}: {exc}")
    if not isinstance(raw, dict):
        sub.error("config must be a JSON object")
    known = {a.dest for a in sub._actions}
    out = {}
    for k, v in raw.items():
        key = k.replace("-", "_")
        if key not in known or key in ("config", "dump_defaults", "func", "help"):
            sub.error(f"unknown config key {k!r}")
        out[key] = v
    return out


_REQUIRED = {"frequency": ("field",), "harnack": ("input",)}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, subs = build_parser()
    args = parser.parse_args(argv)
    sub = subs[args.command]
    if args.config:
        sub.set_defaults(**_load_config(args.config, sub))
        args = parser.parse_args(argv)
    if args.dump_defaults:
        opts = {k: v for k, v in sorted(vars(args).items())
                if k not in ("func", "command", "config", "dump_defaults")}
        _emit_json({"command": args.command, "options": opts}, None)
        return 0
    for name in _REQUIRED.get(args.command, ()):
        if getattr(args, name) is None:
            sub.error(f"--{name.replace('_', '-')} is required")
    try:
        return args.func(args)
    except UsageError as exc:
        sub.error(str(exc))
    except (ValueError, FileNotFoundError) as exc:
        print(f"fraclap {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except SolverError as exc:
        print(f"fraclap {args.command}: solver failed: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
