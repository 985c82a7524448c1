"""Dirichlet-to-Neumann symbols from the one-dimensional profile equation.

For every frequency the extension factorises as ``u_hat(xi, z) = f_hat(xi) phi(...)``
where ``phi`` solves ``-c(z) phi'' + xi^2 phi = 0`` with ``phi(0) = 1`` and
``phi(inf) = 0``. With the power coefficient ``c(z) = z^alpha`` the frequency
scales out and one profile serves all ``xi``.

The decaying solution is a separatrix: slopes that are too steep drive ``phi``
negative, slopes that are too shallow make ``phi`` turn back up. Bisection on
``phi'(0)`` between the two behaviours pins the slope to a few ulps.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate
from scipy.interpolate import CubicSpline

from .core import Array, FracOrder, read_table, write_table

RTOL = 1e-12
ATOL = 1e-14


class ShootingError(RuntimeError):
    """Bracket not found, or the shooting trajectories misbehave."""


class BarrierError(RuntimeError):
    """A computed profile left the region allowed by its barriers."""


def default_zmax(alpha: float) -> float:
    """Truncation point equal to 40 in the scaled ``y`` variable."""
    order = FracOrder.from_alpha(alpha)
    return float(order.y_to_z(40.0))


# {{{ shooting


@dataclass(frozen=True)
class _Trajectory:
    sol: object  # OdeSolution
    z_end: float
    kind: int  # +1 turned upward (too shallow), -1 crossed zero (too steep), 0 neither


def _integrate(rhs, z0: float, y0: Array, z_cap: float) -> _Trajectory:
    def crossed(z, y):
        return y[0]
    crossed.terminal = True
    crossed.direction = -1

    def turned(z, y):
        return y[1]
    turned.terminal = True
    turned.direction = 1

    def escaped(z, y):
        return y[0] - 2.0
    escaped.terminal = True
    escaped.direction = 1

    sol = integrate.solve_ivp(rhs, (z0, z_cap), y0, method="DOP853", rtol=RTOL, atol=ATOL,
                              events=(crossed, turned, escaped), dense_output=True)
    if sol.status == -1:
        raise ShootingError(sol.message)
    kind = 0
    if sol.t_events[0].size:
        kind = -1
    elif sol.t_events[1].size or sol.t_events[2].size or y0[1] >= 0.0:
        kind = 1
    return _Trajectory(sol.sol, float(sol.t[-1]), kind)


@dataclass(frozen=True)
class _Shot:
    slope: float
    lo: _Trajectory  # too steep
    hi: _Trajectory  # too shallow


def _shoot(rhs, start: Callable[[float], tuple[float, Array]], scale: float,
           z_cap: float) -> _Shot:
    """Bisect on ``phi'(0)`` between the zero-crossing and turning-up behaviours."""
    def run(p: float) -> _Trajectory:
        z0, y0 = start(p)
        return _integrate(rhs, z0, y0, z_cap)

    hi_p, hi_t = 0.0, run(0.0)
    if hi_t.kind != 1:
        raise ShootingError("zero slope does not turn upward")
    lo_p = -scale
    lo_t = run(lo_p)
    for _ in range(60):
        if lo_t.kind == -1:
            break
        if lo_t.kind == 1:
            hi_p, hi_t = lo_p, lo_t
        lo_p *= 2.0
        lo_t = run(lo_p)
    else:
        raise ShootingError("no slope drives the profile through zero")
    while True:
        mid = 0.5 * (lo_p + hi_p)
        if not lo_p < mid < hi_p:
            break
        t = run(mid)
        if t.kind == -1:
            lo_p, lo_t = mid, t
        elif t.kind == 1:
            hi_p, hi_t = mid, t
        else:
            # neither behaviour within the cap: the slope is already resolved
            lo_p = hi_p = mid
            lo_t = hi_t = t
            break
    return _Shot(0.5 * (lo_p + hi_p), lo_t, hi_t)


def _reliable_end(shot: _Shot, rel: float = 1e-3) -> float:
    """Largest ``z`` where the bracketing trajectories still agree to ``rel``."""
    z_end = min(shot.lo.z_end, shot.hi.z_end)
    z = np.linspace(0.0, z_end, 4001)[1:]
    z = z[z >= max(shot.lo.sol.t_min, shot.hi.sol.t_min)]
    a = shot.lo.sol(z)[0]
    b = shot.hi.sol(z)[0]
    bad = np.abs(a - b) > rel * np.abs(0.5 * (a + b))
    bad |= 0.5 * (a + b) <= 0.0
    if not bad.any():
        return float(z[-1])
    first = int(np.argmax(bad))
    if first == 0:
        raise ShootingError("shooting trajectories diverge immediately")
    return float(z[first - 1])


# }}}


# {{{ power coefficient


def series_start(alpha: float, p: float, z0: float, generations: int = 6) -> tuple[float, float]:
    """Frobenius series of ``phi'' = z^(-alpha) phi`` with ``phi(0) = 1``, ``phi'(0) = p``.

    Each term ``c z^beta`` feeds ``c z^(beta+2-alpha) / ((beta+2-alpha)(beta+1-alpha))``.
    Returns ``(phi(z0), phi'(z0))``.
    """
    terms = [(1.0, 0.0), (p, 1.0)]
    frontier = list(terms)
    for _ in range(generations):
        nxt = []
        for c, beta in frontier:
            b = beta + 2.0 - alpha
            nxt.append((c / (b * (b - 1.0)), b))
        terms.extend(nxt)
        frontier = nxt
    val = sum(c * z0**b for c, b in terms)
    der = sum(c * b * z0 ** (b - 1.0) for c, b in terms if b != 0.0)
    return val, der


def _power_rhs(alpha: float):
    def rhs(z, y):
        return [y[1], z ** (-alpha) * y[0]]
    return rhs


def wkb_tail(alpha: float, z: Array) -> Array:
    """Leading WKB shape ``z^(alpha/4) exp(-z^(1-alpha/2) / (1-alpha/2))`` of the decaying solution."""
    q = 1.0 - alpha / 2.0
    z = np.asarray(z, dtype=float)
    return z ** (alpha / 4.0) * np.exp(-(z**q) / q)


@dataclass(frozen=True, eq=False)
class PhiProfile:
    """Decaying solution of ``-z^alpha phi'' + phi = 0`` sampled on ``[0, z_max]``."""

    alpha: float
    nodes: Array
    values: Array
    slope: float
    z_reliable: float = field(default=np.inf)

    def __post_init__(self) -> None:
        for name in ("nodes", "values"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def z_max(self) -> float:
        return float(self.nodes[-1])

    def __call__(self, z) -> Array:
        """Interpolated profile (log-cubic); zero beyond ``z_max``."""
        z = np.asarray(z, dtype=float)
        inside = z <= self.z_max
        out = np.zeros_like(z)
        out[inside] = np.exp(self._log_spline(z[inside]))
        return out

    @functools.cached_property
    def _log_spline(self) -> CubicSpline:
        return CubicSpline(self.nodes, np.log(np.maximum(self.values, 1e-300)))

    def hoelder_constant(self) -> float:
        """``C`` in ``|phi - 1 - phi'(0) z| <= C z^(2-alpha)``, from ``phi'' <= z^(-alpha)``."""
        return 1.0 / ((2.0 - self.alpha) * (1.0 - self.alpha))


def _profile_nodes(z_max: float, n: int) -> Array:
    t = np.linspace(0.0, 1.0, n)
    return z_max * t**2


def solve_phi(alpha: float, z_max: float | None = None, tol: float = 1e-8,
              n_nodes: int = 2001) -> PhiProfile:
    """Shoot for the decaying profile of ``-z^alpha phi'' + phi = 0``.

    Past the point where the two bracketing trajectories separate, the profile
    is continued by the WKB shape matched in value at that point. ``tol`` is the
    ceiling for ``phi(z_max)``.
    """
    if not alpha < 1.0:
        raise ValueError(f"alpha must be < 1, got {alpha}")
    if z_max is None:
        z_max = default_zmax(alpha)
    z0 = min(1e-4, 1e-3 * z_max)
    shot = _shoot(_power_rhs(alpha),
                  lambda p: (z0, np.array(series_start(alpha, p, z0))),
                  scale=1.0, z_cap=2.0 * z_max)
    z_rel = _reliable_end(shot)
    nodes = _profile_nodes(z_max, n_nodes)
    vals = np.empty_like(nodes)
    near = nodes < z0
    vals[near] = [series_start(alpha, shot.slope, z)[0] for z in nodes[near]]
    mid = (~near) & (nodes <= z_rel)
    vals[mid] = 0.5 * (shot.lo.sol(nodes[mid])[0] + shot.hi.sol(nodes[mid])[0])
    far = nodes > z_rel
    if far.any():
        anchor = 0.5 * (shot.lo.sol(z_rel)[0] + shot.hi.sol(z_rel)[0])
        vals[far] = anchor * wkb_tail(alpha, nodes[far]) / wkb_tail(alpha, z_rel)
    if vals[-1] > tol:
        raise ShootingError(f"phi(z_max) = {vals[-1]:.3e} exceeds {tol:.1e}; enlarge z_max")
    profile = PhiProfile(alpha, nodes, vals, shot.slope, z_rel)
    check_barriers(profile)
    return profile


def symbol_constant(a: float, z_max: float | None = None) -> float:
    """``C_a = -phi'(0)`` for ``alpha = -2a/(1-a)``."""
    order = FracOrder.from_a(a)
    return -solve_phi(order.alpha, z_max).slope


def closed_form_symbol_constant(a: float) -> float:
    """Bessel-function value of ``C_a``, used as an independent oracle."""
    o = FracOrder.from_a(a)
    s = o.s
    return 2.0 ** (1 - 2 * s) * math.gamma(1 - s) / (math.gamma(s) * (1 - a) ** a)


# }}}


# {{{ barriers


def supersolution(z: Array, eps: float = 0.5) -> Array:
    """``min(1, z^-eps)``; a supersolution on ``z >= 1`` whenever ``eps (1 + eps) <= 1``."""
    z = np.asarray(z, dtype=float)
    with np.errstate(divide="ignore"):
        return np.minimum(1.0, np.where(z > 0, z, 1.0) ** (-eps))


def subsolution(z: Array, A: float) -> Array:
    """``exp(-A sqrt z)``."""
    return np.exp(-A * np.sqrt(np.asarray(z, dtype=float)))


def subsolution_interval(alpha: float, A: float) -> float:
    """Right end of the interval on which ``exp(-A sqrt z)`` is a subsolution."""
    return (A * A / 4.0) ** (1.0 / (1.0 - alpha))


def barrier_residual(alpha: float, z: Array, which: str, A: float = 6.0, eps: float = 0.5) -> Array:
    """``-z^alpha v'' + v`` for a barrier ``v`` (analytic derivatives).

    Nonnegative for a supersolution, nonpositive for a subsolution.
    """
    z = np.asarray(z, dtype=float)
    if which == "super":
        v2 = eps * (eps + 1.0) * z ** (-eps - 2.0)
        return -z**alpha * v2 + z ** (-eps)
    if which == "sub":
        r = np.sqrt(z)
        v = np.exp(-A * r)
        v2 = v * (A * A / (4.0 * z) + A / (4.0 * z * r))
        return -z**alpha * v2 + v
    raise ValueError(f"unknown barrier {which!r}")


def _sub_rate(alpha: float) -> float:
    """Smallest ``A`` on a doubling ladder for which the bounded-interval barrier sits below the WKB lower bound."""
    A = 4.0
    while True:
        Z = subsolution_interval(alpha, A)
        if subsolution(Z, A) <= 1e-3 * wkb_tail(alpha, Z) or A > 1e3:
            return A
        A *= 2.0


def check_barriers(p: PhiProfile, slack: float = 1e-10) -> None:
    """Raise :class:`BarrierError` unless ``sub <= phi <= super`` at every node, with ``phi`` monotone in ``[0, 1]``."""
    v, z = p.values, p.nodes
    if abs(v[0] - 1.0) > slack:
        raise BarrierError("phi(0) != 1")
    if np.any(v < -slack) or np.any(v > 1.0 + slack):
        raise BarrierError("phi leaves [0, 1]")
    if np.any(np.diff(v) > slack):
        raise BarrierError("phi is not nonincreasing")
    if np.any(v > supersolution(z) + slack):
        raise BarrierError("phi exceeds the supersolution min(1, z^-1/2)")
    A = _sub_rate(p.alpha)
    Z = subsolution_interval(p.alpha, A)
    on = (z > 0) & (z <= Z)
    if np.any(barrier_residual(p.alpha, z[on], "sub", A=A) > 0):
        raise BarrierError("exp(-A sqrt z) is not a subsolution on its interval")
    if np.any(v[on] < subsolution(z[on], A) - slack):
        raise BarrierError("phi falls below the subsolution")


# }}}


# {{{ general coefficients


@dataclass(frozen=True, eq=False)
class TabulatedCoefficient:
    """Coefficient ``c(z)`` given at nodes; log-log linear in between, power law beyond."""

    z: Array
    c: Array

    def __post_init__(self) -> None:
        z = np.asarray(self.z, dtype=float)
        c = np.asarray(self.c, dtype=float)
        if z.ndim != 1 or z.size < 2 or z.shape != c.shape:
            raise ValueError("need matching 1-D arrays with at least two nodes")
        if np.any(z <= 0) or np.any(np.diff(z) <= 0):
            raise ValueError("z nodes must be positive and increasing")
        if np.any(c <= 0):
            raise ValueError("coefficient must be positive")
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "c", c)

    @classmethod
    def from_csv(cls, path) -> TabulatedCoefficient:
        t = read_table(path)
        return cls(t["z"], t["a"])

    def __call__(self, z):
        lz, lc = np.log(self.z), np.log(self.c)
        x = np.log(np.asarray(z, dtype=float))
        out = np.interp(x, lz, lc)
        s0 = (lc[1] - lc[0]) / (lz[1] - lz[0])
        s1 = (lc[-1] - lc[-2]) / (lz[-1] - lz[-2])
        out = np.where(x < lz[0], lc[0] + s0 * (x - lz[0]), out)
        out = np.where(x > lz[-1], lc[-1] + s1 * (x - lz[-1]), out)
        return np.exp(out)

    def describe(self) -> dict:
        return {"kind": "table", "nodes": int(self.z.size)}


@dataclass(frozen=True, eq=False)
class SymbolTable:
    """Sampled symbol ``xi -> s(xi)``."""

    xi: Array
    values: Array
    descriptor: dict

    def __post_init__(self) -> None:
        for name in ("xi", "values"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def loglog_slope(self) -> float:
        return float(np.polyfit(np.log(self.xi), np.log(self.values), 1)[0])

    def is_increasing(self) -> bool:
        return bool(np.all(np.diff(self.values) > 0))

    def to_csv(self, path) -> None:
        write_table(path, ["xi", "s"], [self.xi, self.values])

    @classmethod
    def from_csv(cls, path) -> SymbolTable:
        t = read_table(path)
        return cls(t["xi"], t["s"], {"kind": "file"})


def _check_coefficient(coef: Callable, z_hi: float) -> None:
    z = np.geomspace(1e-8, z_hi, 400)
    c = np.asarray(coef(z), dtype=float)
    if not np.all(np.isfinite(c)) or np.any(c <= 0):
        raise ValueError("coefficient must be positive and finite on (0, inf)")


def _quad_start(coef: Callable, xi: float, p: float, z0: float) -> tuple[float, float]:
    """Two Picard steps from ``phi = 1 + p z`` near the origin."""
    g = lambda t: (1.0 + p * t) / float(coef(t))  # noqa: E731
    i1 = integrate.quad(g, 0.0, z0, limit=200)[0]
    i2 = integrate.quad(lambda t: (z0 - t) * g(t), 0.0, z0, limit=200)[0]
    return 1.0 + p * z0 + xi * xi * i2, p + xi * xi * i1


def profile_slope(coef: Callable, xi: float, z_cap: float) -> tuple[float, _Shot]:
    """``phi'(0)`` of the decaying solution of ``-c(z) phi'' + xi^2 phi = 0``."""
    xi2 = xi * xi

    def rhs(z, y):
        return [y[1], xi2 * y[0] / float(coef(z))]

    z0 = 1e-6 * z_cap
    cache: dict[float, tuple[float, float]] = {}

    def start(p):
        # the quadratures are linear in p: cache the two pieces once
        if not cache:
            cache[0.0] = _quad_start(coef, xi, 0.0, z0)
            cache[1.0] = _quad_start(coef, xi, 1.0, z0)
        a0, a1 = cache[0.0], cache[1.0]
        return z0, np.array([a0[0] + p * (a1[0] - a0[0]), a0[1] + p * (a1[1] - a0[1])])

    shot = _shoot(rhs, start, scale=max(xi, 1e-3), z_cap=z_cap)
    return shot.slope, shot


def generalized_symbol(coef: Callable | float, xi: Array, z_cap: float | None = None) -> SymbolTable:
    """Symbol ``s(xi) = -phi'(0)`` of ``-c(z) phi'' + xi^2 phi = 0`` for each sample.

    ``coef`` is a positive callable ``c(z)`` or a float ``alpha`` meaning ``z^alpha``.
    The shooting horizon ``z_cap`` defaults to 60 decay lengths of the smallest ``xi``
    estimated from ``c`` at unit height.
    """
    if isinstance(coef, (int, float)):
        alpha = float(coef)
        if not alpha < 1.0:
            raise ValueError(f"alpha must be < 1, got {alpha}")
        fn = lambda z: np.asarray(z, dtype=float) ** alpha  # noqa: E731
        desc = {"kind": "power", "alpha": alpha}
    else:
        fn = coef
        desc = coef.describe() if hasattr(coef, "describe") else {"kind": "callable"}
    xi = np.asarray(xi, dtype=float)
    if np.any(xi <= 0) or np.any(np.diff(xi) <= 0):
        raise ValueError("xi samples must be positive and increasing")
    vals = np.empty_like(xi)
    for i, x in enumerate(xi):
        cap = z_cap if z_cap is not None else _horizon(fn, x)
        _check_coefficient(fn, cap)
        vals[i] = -profile_slope(fn, x, cap)[0]
    return SymbolTable(xi, vals, desc)


def _horizon(coef: Callable, xi: float) -> float:
    """Height where ``int_0^z xi / sqrt(c)`` reaches 60 (WKB decay exponent)."""
    z, acc = 0.0, 0.0
    dz = 1e-3 / xi
    while acc < 60.0:
        zn = z + dz
        # only a horizon estimate, so a loose tolerance suffices
        acc += integrate.quad(lambda t: xi / math.sqrt(float(coef(t))), z, zn, epsrel=1e-6, limit=100)[0]
        z, dz = zn, 2.0 * dz
    return z


# }}}
