"""Monotone quantities and Harnack-type diagnostics on extension fields.

Half-ball and half-sphere integrals use polar Gauss-Jacobi rules that absorb
the weight ``y^a`` exactly: in the angle ``t = cos(theta)`` (from the ``x``
axis for ``n = 1``, from the ``y`` axis for ``n = 2``) and ``r^(n+a)`` in the
radius. The field and the components of its nodal gradient are interpolated
multilinearly, which is the dominant error source.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import RegularGridInterpolator
from scipy.special import roots_jacobi

from .core import Array, HalfPlaneField, SampledFunction, write_table


# {{{ quadrature on half balls


@dataclass(frozen=True)
class HalfBallRule:
    """Nodes ``X`` (unit half-ball or unit half-sphere) and weights including ``y^a``."""

    radial: tuple[Array, Array]      # nodes in (0, 1), weights for r^(n+a)
    angular: tuple[Array, Array]     # unit vectors (k, n+1) and weights for the weighted sphere

    @classmethod
    def build(cls, n: int, a: float, n_radial: int = 48, n_angles: int = 512) -> HalfBallRule:
        xr, wr = roots_jacobi(n_radial, 0.0, n + a)
        r = 0.5 * (1.0 + xr)
        wr = wr * 0.5 ** (n + a + 1.0)
        if n == 1:
            t, wt = roots_jacobi(n_angles, (a - 1) / 2, (a - 1) / 2)
            dirs = np.stack([t, np.sqrt(1.0 - t * t)], axis=1)
            return cls((r, wr), (dirs, wt))
        m = max(8, int(round(math.sqrt(n_angles))))
        xt, wt = roots_jacobi(m, 0.0, a)   # t = cos(theta) in (0, 1) with weight t^a
        t = 0.5 * (1.0 + xt)
        wt = wt * 0.5 ** (a + 1.0)
        psi = 2 * np.pi * np.arange(2 * m) / (2 * m)
        T, P = np.meshgrid(t, psi, indexing="ij")
        S = np.sqrt(1.0 - T * T)
        dirs = np.stack([(S * np.cos(P)).ravel(), (S * np.sin(P)).ravel(), T.ravel()], axis=1)
        w = np.repeat(wt, psi.size) * (2 * np.pi / psi.size)
        return cls((r, wr), (dirs, w))


class _FieldSampler:
    """Multilinear interpolation of ``u`` and of its nodal gradient."""

    def __init__(self, u: HalfPlaneField):
        g = u.xgrid
        self.dim = g.dim
        ax = g.axis()
        y = u.y_nodes()
        v = u.values
        grads = []
        for k in range(g.dim):
            if g.periodic:
                grads.append((np.roll(v, -1, k) - np.roll(v, 1, k)) / (2 * g.h))
            else:
                grads.append(np.gradient(v, ax, axis=k, edge_order=2))
        grads.append(np.gradient(v, y, axis=g.dim, edge_order=2))
        if g.periodic:
            # append the wrap-around column so balls may touch x = L
            ax = np.append(ax, g.length)
            pad = [(0, 1)] * g.dim + [(0, 0)]
            v = np.pad(v, pad, mode="wrap")
            grads = [np.pad(d, pad, mode="wrap") for d in grads]
        axes = (ax,) * g.dim + (y,)
        self.lo = np.array([ax[0]] * g.dim + [0.0])
        self.hi = np.array([ax[-1]] * g.dim + [y[-1]])
        self.u = RegularGridInterpolator(axes, v)
        self.grad = [RegularGridInterpolator(axes, d) for d in grads]

    def check(self, center: Array, R: float) -> None:
        c = np.append(center, 0.0)
        if np.any(c[:-1] - R < self.lo[:-1] - 1e-12) or np.any(c[:-1] + R > self.hi[:-1] + 1e-12) \
                or R > self.hi[-1]:
            raise ValueError(f"radius {R} exceeds the field's inscribed half-ball")


def _pts(center: Array, R: float, dirs: Array) -> Array:
    c = np.append(center, 0.0)
    return c + R * dirs


def _ball_energy(S: _FieldSampler, rule: HalfBallRule, center: Array, R: float, n: int, a: float) -> float:
    r, wr = rule.radial
    dirs, wt = rule.angular
    total = 0.0
    for rk, wk in zip(r, wr):
        P = _pts(center, R * rk, dirs)
        g2 = sum(gi(P) ** 2 for gi in S.grad)
        total += wk * float(wt @ g2)
    return total * R ** (n + a + 1.0)


def _sphere_terms(S: _FieldSampler, rule: HalfBallRule, center: Array, R: float, n: int, a: float):
    dirs, wt = rule.angular
    P = _pts(center, R, dirs)
    fac = R ** (n + a)
    u2 = float(wt @ S.u(P) ** 2) * fac
    G = np.stack([gi(P) for gi in S.grad], axis=1)
    un = np.sum(G * dirs, axis=1)
    g2 = np.sum(G * G, axis=1)
    tan_minus_nor = float(wt @ (g2 - 2.0 * un * un)) * fac
    return u2, tan_minus_nor, float(wt @ g2) * fac


def _center(u: HalfPlaneField, center) -> Array:
    if center is None:
        g = u.xgrid
        c = g.length / 2 if g.periodic else 0.0
        return np.full(g.dim, c)
    return np.atleast_1d(np.asarray(center, dtype=float))


# }}}


@dataclass(frozen=True, eq=False)
class FrequencyProfile:
    radii: Array
    phi: Array
    num: Array
    den: Array
    resolution: dict

    def is_nondecreasing(self, rel_tol: float = 1e-6) -> bool:
        return bool(np.all(np.diff(self.phi) >= -rel_tol * np.abs(self.phi[1:])))

    def max_violation(self) -> float:
        """Largest relative drop ``(Phi_k - Phi_{k+1}) / Phi_{k+1}`` (negative when increasing)."""
        d = -(np.diff(self.phi)) / np.abs(self.phi[1:])
        return float(np.nanmax(d)) if d.size else 0.0

    def to_csv(self, path) -> None:
        write_table(path, ["R", "Phi", "num", "den"], [self.radii, self.phi, self.num, self.den])


def _prepare(u: HalfPlaneField, radii, center, n_radial: int, n_angles: int):
    radii = np.asarray(radii, dtype=float)
    if radii.ndim != 1 or np.any(radii <= 0) or np.any(np.diff(radii) <= 0):
        raise ValueError("radii must be positive and increasing")
    S = _FieldSampler(u)
    c = _center(u, center)
    S.check(c, float(radii[-1]))
    rule = HalfBallRule.build(u.xgrid.dim, u.order.a, n_radial, n_angles)
    return radii, S, c, rule


def scaled_energy(u: HalfPlaneField, radii, center=None, n_radial: int = 48,
                  n_angles: int = 512) -> FrequencyProfile:
    """``R^-(n+1+a) int_{B_R^+} |grad u|^2 y^a``; ``phi`` holds the scaled energy."""
    radii, S, c, rule = _prepare(u, radii, center, n_radial, n_angles)
    n, a = u.xgrid.dim, u.order.a
    num = np.array([_ball_energy(S, rule, c, R, n, a) for R in radii])
    den = radii ** (n + 1 + a)
    return FrequencyProfile(radii, num / den, num, den,
                            {"radial": n_radial, "angles": n_angles, "kind": "simple"})


def almgren_frequency(u: HalfPlaneField, radii, center=None, n_radial: int = 48,
                      n_angles: int = 512) -> FrequencyProfile:
    """``Phi(R) = R int_{B_R^+} |grad u|^2 y^a / int_{dB_R^+} u^2 y^a``; ``nan`` where the denominator vanishes."""
    radii, S, c, rule = _prepare(u, radii, center, n_radial, n_angles)
    n, a = u.xgrid.dim, u.order.a
    num = np.array([_ball_energy(S, rule, c, R, n, a) for R in radii])
    den = np.array([_sphere_terms(S, rule, c, R, n, a)[0] for R in radii])
    with np.errstate(divide="ignore", invalid="ignore"):
        phi = np.where(den > 0, radii * num / den, np.nan)
    return FrequencyProfile(radii, phi, num, den,
                            {"radial": n_radial, "angles": n_angles, "kind": "almgren"})


def rellich_residual(u: HalfPlaneField, R: float, center=None, n_radial: int = 48,
                     n_angles: int = 512) -> float:
    """Mismatch of ``R int_{dB_R^+} (|u_tau|^2 - |u_nu|^2) y^a = (n+a-1) int_{B_R^+} |grad u|^2 y^a``.

    Divided by the larger of the two sides and ``R int_{dB_R^+} |grad u|^2 y^a``;
    the last term keeps the ratio meaningful when ``n + a = 1`` makes both
    sides vanish.
    """
    _, S, c, rule = _prepare(u, [R], center, n_radial, n_angles)
    n, a = u.xgrid.dim, u.order.a
    energy = _ball_energy(S, rule, c, R, n, a)
    _, tn, g2 = _sphere_terms(S, rule, c, R, n, a)
    lhs = R * tn
    rhs = (n + a - 1.0) * energy
    scale = max(abs(lhs), abs(rhs), R * g2)
    return abs(lhs - rhs) / scale if scale > 0 else 0.0


# {{{ Harnack


class HypothesisError(ValueError):
    """Inputs violate the hypotheses of a Harnack-type estimate."""


def _ball_mask(f: SampledFunction, center, radius: float) -> Array:
    c = np.atleast_1d(np.asarray(center, dtype=float))
    r2 = sum((x - ci) ** 2 for x, ci in zip(f.grid.coords(), c))
    return r2 < radius**2


def harnack_ratio(trace: SampledFunction, r: float, center=0.0, residual=None,
                  residual_tol: float = 1e-2) -> float:
    """``sup / inf`` of a nonnegative trace over the nodes of ``B_{r/2}``.

    ``residual`` optionally carries ``(-Delta)^s trace`` to certify
    ``s``-harmonicity on ``B_r`` relative to its overall scale.
    """
    v = trace.values
    if np.any(v < 0):
        raise HypothesisError("the trace must be nonnegative everywhere")
    if residual is not None:
        R = np.asarray(residual.values if isinstance(residual, SampledFunction) else residual)
        inner = _ball_mask(trace, center, r)
        if np.max(np.abs(R[inner])) > residual_tol * np.max(np.abs(R)):
            raise HypothesisError("the trace is not s-harmonic on B_r")
    half = _ball_mask(trace, center, r / 2)
    if not half.any():
        raise ValueError("B_{r/2} contains no grid nodes")
    lo = float(v[half].min())
    if lo <= 0:
        raise HypothesisError("the trace vanishes inside B_{r/2}")
    return float(v[half].max()) / lo


def boundary_harnack_ratio(f: SampledFunction, g: SampledFunction, window: Array,
                           half_window: Array) -> float:
    """``(sup f/g) / (inf f/g)`` over ``half_window``, skipping nodes adjacent to the window edge."""
    w = np.asarray(window, dtype=bool)
    hw = np.asarray(half_window, dtype=bool) & w
    inner = w.copy()
    for ax in range(w.ndim):
        for sh in (1, -1):
            nb = np.roll(w, sh, axis=ax)
            if not f.grid.periodic:
                idx = [slice(None)] * w.ndim
                idx[ax] = 0 if sh == 1 else -1
                nb[tuple(idx)] = False
            inner &= nb
    sel = hw & inner
    if not sel.any():
        raise ValueError("the half window has no interior nodes")
    gv, fv = g.values[sel], f.values[sel]
    if np.any(gv <= 0):
        raise HypothesisError("g vanishes inside the window")
    if np.any(fv <= 0):
        raise HypothesisError("f vanishes inside the window")
    q = fv / gv
    return float(q.max() / q.min())


# }}}
