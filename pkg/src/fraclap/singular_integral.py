"""Quadrature of the singular-integral form of ``(-Delta)^s``.

The symmetrised integrand ``D(eta) = 2 f(x) - f(x + eta) - f(x - eta)`` vanishes
like ``eta^2``.  In one dimension ``G = D / eta^2`` is interpolated by local
cubics on the grid offsets and integrated exactly against
``eta^(1 - 2s)`` (product integration), with ``G(0)`` taken from the centred
second difference.  The scheme is at least second order for every ``s``.  In two
dimensions a punctured lattice sum of the kernel is corrected by a multiple of
the five-point Laplacian.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np
from scipy import integrate, special
from scipy.signal import fftconvolve

from .core import Array, FracOrder, SampledFunction, SpatialGrid
from .spectral import fraclap_fourier

Tail = Union[str, Callable[[Array], Array]]


class CalibrationError(RuntimeError):
    pass


@dataclass(frozen=True)
class QuadConfig:
    """Quadrature settings.

    delta: radius (in grid cells) of the zone around the singularity where
        ``D / eta^2`` is frozen at its second-difference value; with
        ``symmetrize=False`` it is the exclusion radius of a plain cutoff sum.
    images: number of periodic images summed explicitly on the torus; the
        remainder is added as an integral.
    symmetrize: use the second-difference product rule (default) instead of a
        cutoff principal value.
    """

    delta: float = 1.0
    images: int = 64
    symmetrize: bool = True

    def __post_init__(self) -> None:
        if self.delta < 0:
            raise ValueError("delta must be >= 0")
        if self.images < 1:
            raise ValueError("need at least one periodic image")
        if not self.symmetrize and self.delta < 1:
            raise ValueError("a cutoff sum needs delta >= 1")

    @classmethod
    def from_dict(cls, d: dict) -> QuadConfig:
        return cls(delta=float(d.get("delta", 1.0)), images=int(d.get("images", 64)),
                   symmetrize=bool(d.get("symmetrize", True)))


# {{{ one-dimensional weights


def _cubic_basis() -> Array:
    """Monomial coefficients of the Lagrange basis on nodes ``t = -1, 0, 1, 2``."""
    nodes = np.array([-1.0, 0.0, 1.0, 2.0])
    V = np.vander(nodes, 4, increasing=True)
    return np.linalg.inv(V).T  # row m: coefficients of l_m(t) in 1, t, t^2, t^3


def _cell_moments(b: float, J: int) -> Array:
    """``int_0^1 t^k (j + t)^b dt`` for cells ``j = 0..J-1`` and ``k = 0..3``."""
    mom = np.empty((J, 4))
    mom[0] = 1.0 / (b + np.arange(4) + 1.0)
    if J > 1:
        g, gw = np.polynomial.legendre.leggauss(16)
        t, w = 0.5 * (g + 1.0), 0.5 * gw
        j = np.arange(1, J, dtype=float)[:, None]
        base = w * (j + t) ** b
        for k in range(4):
            mom[1:, k] = np.sum(base * t**k, axis=1)
    return mom


def product_weights(s: float, h: float, J: int, delta: float = 1.0) -> Array:
    """Weights ``W_j`` (``j = 0..J+1``) with ``int_0^{Jh} D(eta) eta^(-1-2s) ~ sum_j W_j D_j``.

    ``G = D / eta^2`` is interpolated by local cubics on nodes ``j-1..j+2`` and
    integrated exactly against ``eta^(1-2s)``.  ``G`` is even, ``G(0)`` comes
    from a Richardson-corrected second difference, and the node ``J+1`` lies
    one step past the end; callers decide what ``D_{J+1}`` is.
    """
    b = 1.0 - 2.0 * s
    frozen = min(int(round(delta)), J)
    mom = _cell_moments(b, J) * h ** (b + 1)
    per_cell = mom @ _cubic_basis().T  # (cell, m): weight of node j - 1 + m
    c = np.zeros(J + 3)  # index = node + 1, nodes -1..J+1
    cells = np.arange(frozen, J)
    for m in range(4):
        np.add.at(c, cells + m, per_cell[frozen:, m])
    g0 = c[1] + mom[:frozen, 0].sum()
    c_nodes = c[1:].copy()  # nodes 0..J+1
    c_nodes[1] += c[0]  # G_{-1} = G_1
    W = np.zeros(J + 2)
    W[1:] = c_nodes[1:] / (np.arange(1, J + 2) * h) ** 2
    # G_0 = (4 D_1 / h^2 - D_2 / (4 h^2)) / 3
    W[1] += 4.0 * g0 / (3.0 * h**2)
    W[2] -= g0 / (12.0 * h**2)
    return W


def cutoff_weights(s: float, h: float, J: int, delta: float) -> Array:
    """Plain trapezoid weights on ``eta >= delta * h`` (no singular correction)."""
    j = np.arange(J + 1, dtype=float)
    W = np.zeros(J + 1)
    keep = j * h >= delta * h - 1e-12
    keep[0] = False
    W[keep] = h * (j[keep] * h) ** (-1.0 - 2.0 * s)
    return W


def _image_remainder(eta: Array, s: float, L: float, images: int) -> Array:
    """``sum_{m>=1} (eta + mL)^-p + (mL - eta)^-p`` with ``p = 1 + 2s``."""
    p = 1.0 + 2.0 * s
    m = np.arange(1, images + 1, dtype=float)[:, None]
    total = np.sum((eta + m * L) ** -p + (m * L - eta) ** -p, axis=0)
    # midpoint-rule remainder with its first Euler-Maclaurin correction
    q = (images + 0.5) * L
    total += ((eta + q) ** (1 - p) + (q - eta) ** (1 - p)) / ((p - 1) * L)
    total -= p * L * ((eta + q) ** (-p - 1) + (q - eta) ** (-p - 1)) / 24.0
    return total


def torus_weights_1d(s: float, grid: SpatialGrid, cfg: QuadConfig) -> Array:
    """Weights ``W_j``, ``j = 0..N/2``, of the periodised symmetric sum."""
    N, h, L = grid.n, grid.h, grid.length
    if N % 2:
        raise ValueError("the periodic quadrature needs an even number of samples")
    M = N // 2
    if cfg.symmetrize:
        W = product_weights(s, h, M, cfg.delta)
        W[M - 1] += W[M + 1]  # D_{M+1} = D_{M-1} by periodicity
        W = W[: M + 1]
    else:
        W = cutoff_weights(s, h, M, cfg.delta)
        W[M] *= 0.5
    eta = h * np.arange(M + 1)
    trap = np.full(M + 1, h)
    trap[M] = 0.5 * h
    trap[0] = 0.0
    return W + trap * _image_remainder(eta, s, L, cfg.images)


def _symbol_from_weights_1d(W: Array, N: int) -> Array:
    j = np.arange(W.size)
    k = np.arange(N)
    return np.sum(W[:, None] * (2.0 - 2.0 * np.cos(2 * np.pi * np.outer(j, k) / N)), axis=0)


# }}}

# {{{ two-dimensional weights


def _outside_square_integral(p: float) -> float:
    """``int_{R^2 minus [-1,1]^2} |y|^-p dy`` for ``p > 2``."""
    val, _ = integrate.quad(lambda t: np.cos(t) ** (p - 2.0), 0.0, np.pi / 4)
    return 8.0 * val / (p - 2.0)


def _dirichlet_beta(s: float, terms: int = 40) -> float:
    """``beta(s) = sum_k (-1)^k (2k+1)^(-s)`` via Cohen-Villegas-Zagier acceleration."""
    n = terms
    d = (3.0 + math.sqrt(8.0)) ** n
    d = (d + 1.0 / d) / 2.0
    b, c, acc = -1.0, -d, 0.0
    for k in range(n):
        c = b - c
        acc += c * (2 * k + 1) ** (-s)
        b = (k + n) * (k - n) * b / ((k + 0.5) * (k + 1.0))
    return acc / d


@functools.lru_cache(maxsize=None)
def lattice_correction(s: float) -> float:
    """Laplacian correction ``kappa(s)`` of the punctured lattice sum in 2-D.

    By symmetry ``kappa = 1/4 Z(2s)`` with ``Z`` the Epstein zeta function of
    the square lattice, and ``Z(2s) = 4 zeta(s) beta(s)``.
    """
    return float(special.zeta(s)) * _dirichlet_beta(s)


def torus_weights_2d(s: float, grid: SpatialGrid, cfg: QuadConfig) -> Array:
    """Weights ``w[p, q]`` with ``Lf(x) = sum w (f(x) - f(x + eta))`` on the 2-D torus.

    Point values of the periodised kernel (punctured trapezoid rule) plus a
    five-point Laplacian term that restores the missing singular part; the
    resulting error is ``O(h^(4-2s))`` for smooth ``f``.
    """
    N, h, L = grid.n, grid.h, grid.length
    p_exp = 2.0 + 2.0 * s
    off = h * np.fft.fftfreq(N, d=1.0 / N)
    ex, ey = np.meshgrid(off, off, indexing="ij")
    K = min(cfg.images, 32)
    kern = np.zeros((N, N))
    for mx in range(-K, K + 1):
        for my in range(-K, K + 1):
            d2 = (ex + mx * L) ** 2 + (ey + my * L) ** 2
            if mx == 0 and my == 0:
                d2[0, 0] = np.inf
            kern += d2 ** (-p_exp / 2)
    kern += _outside_square_integral(p_exp) * ((K + 0.5) * L) ** (2.0 - p_exp) / L**2
    w = h * h * kern
    w[0, 0] = 0.0
    corr = lattice_correction(s) * h ** (-2.0 * s)
    for ix, iy in ((1, 0), (-1, 0), (0, 1), (0, -1)):
        w[ix, iy] -= corr
    return w


# }}}

# {{{ operator


@functools.lru_cache(maxsize=64)
def _torus_symbol(s: float, grid: SpatialGrid, cfg: QuadConfig) -> Array:
    if grid.dim == 1:
        return _symbol_from_weights_1d(torus_weights_1d(s, grid, cfg), grid.n)
    w = torus_weights_2d(s, grid, cfg)
    return np.real(w.sum() - np.fft.fft2(w))


def _fit_power_tail(x: Array, v: Array) -> tuple[float, float]:
    if v[0] == 0 or v[1] == 0 or np.sign(v[0]) != np.sign(v[1]) or abs(v[1]) >= abs(v[0]):
        raise ValueError("cannot fit a decaying power-law tail to the boundary samples")
    p = -np.log(abs(v[1] / v[0])) / np.log(abs(x[1] / x[0]))
    return v[1] * abs(x[1]) ** p, p


def _tail_function(tail: Tail, f: SampledFunction) -> Callable[[Array], Array] | None:
    if callable(tail):
        return tail
    x, v = f.grid.axis(), f.values
    if tail == "zero":
        scale = max(np.max(np.abs(v)), 1e-300)
        if max(abs(v[0]), abs(v[-1])) > 1e-6 * scale:
            raise ValueError(
                "f does not decay at the ends of the truncated line; "
                "pass tail='power' or a callable tail model")
        return None
    if tail == "power":
        cr, pr = _fit_power_tail(x[[-2, -1]], v[[-2, -1]])
        cl, pl = _fit_power_tail(-x[[1, 0]], v[[1, 0]])

        def model(xi: Array) -> Array:
            xi = np.asarray(xi, dtype=float)
            return np.where(xi > 0, cr * np.abs(xi) ** -pr, cl * np.abs(xi) ** -pl)

        return model
    raise ValueError(f"unknown tail model {tail!r}")


def _line_operator(f: SampledFunction, s: float, cfg: QuadConfig, tail: Tail) -> Array:
    grid = f.grid
    if grid.dim != 1:
        raise ValueError("the truncated-line quadrature is implemented for n = 1")
    N, h, X = grid.n, grid.h, grid.length
    model = _tail_function(tail, f)
    pad = N if model is not None else 0
    fpad = np.zeros(N + 2 * pad)
    fpad[pad : pad + N] = f.values
    if model is not None:
        k = np.arange(1, pad + 1)
        fpad[pad + N :] = model(X + k * h)
        fpad[:pad] = model(-X - k[::-1] * h)
    J = N - 1 + pad
    beyond = 0.0  # coefficient of 2 f(x) from offsets past the padded grid
    if cfg.symmetrize:
        W = product_weights(s, h, J, cfg.delta)
        beyond = W[J + 1]
        W = W[: J + 1]
    else:
        W = cutoff_weights(s, h, J, cfg.delta)
    kernel = np.concatenate([W[:0:-1], [0.0], W[1:]])
    padded = np.concatenate([np.zeros(J), fpad, np.zeros(J)])
    conv = fftconvolve(padded, kernel, mode="valid")  # centred at every padded node
    conv = conv[pad : pad + N]
    fx = f.values
    out = 2.0 * fx * W.sum() - conv
    # beyond offset J both neighbours are off the padded grid
    out += 2.0 * fx * ((J * h) ** (-2.0 * s) / (2.0 * s) + beyond)
    if model is not None:
        out -= _far_tail(grid.axis(), X + pad * h, s, model)
    return out


def _far_tail(x: Array, Y: float, s: float, model: Callable[[Array], Array]) -> Array:
    """``int_{|xi| > Y} model(xi) |x - xi|^(-1-2s) dxi`` via ``xi = +-Y/u``."""
    p = 1.0 + 2.0 * s

    def integrand(u: float) -> Array:
        if u <= 0.0:
            return np.zeros_like(x)
        xi = Y / u
        jac = Y / u**2
        return jac * (model(np.array([xi]))[0] * (xi - x) ** -p
                      + model(np.array([-xi]))[0] * (xi + x) ** -p)

    val, _ = integrate.quad_vec(integrand, 0.0, 1.0, epsrel=1e-10, epsabs=1e-300)
    return val


def fraclap_integral(f: SampledFunction, order: FracOrder | float,
                     cfg: QuadConfig | None = None, constant: float | None = None,
                     tail: Tail = "zero") -> SampledFunction:
    """Quadrature of ``C_{n,s} PV int (f(x) - f(xi)) / |x - xi|^(n + 2s) dxi``.

    On the torus the kernel is periodised.  On the truncated line ``f`` is
    continued by ``tail``: ``"zero"`` (``f`` must have decayed at the ends),
    ``"power"`` (fitted ``A |x|^-p`` on each side) or a callable.  ``constant``
    defaults to the calibrated :func:`normalization_constant`.
    """
    s = order.s if isinstance(order, FracOrder) else float(order)
    if not 0.0 < s < 1.0:
        raise ValueError(f"s must lie in (0, 1), got {s}")
    cfg = cfg or QuadConfig()
    C = normalization_constant(f.grid.dim, s) if constant is None else float(constant)
    if f.grid.periodic:
        lam = _torus_symbol(s, f.grid, cfg)
        out = np.real(np.fft.ifftn(lam * np.fft.fftn(f.values)))
    else:
        out = _line_operator(f, s, cfg, tail)
    return f.with_values(C * out)


# }}}

# {{{ calibration


CALIBRATION_TOL = 1e-2


def _calibration_grid(n: int, resolution: int | None) -> SpatialGrid:
    if n == 1:
        return SpatialGrid.torus(resolution or 1024, 40.0)
    return SpatialGrid.torus(resolution or 128, 20.0, dim=2)


@functools.lru_cache(maxsize=None)
def normalization_constant(n: int, s: float, resolution: int | None = None) -> float:
    """Calibrated ``C_{n,s}``.

    The unit-constant quadrature of a centred Gaussian is fitted in least
    squares to the Fourier multiplier on a reference torus, so that the
    integral and multiplier routes share one normalisation. In 2-D the fit is
    repeated at half resolution and Richardson-extrapolated.
    """
    if n not in (1, 2):
        raise ValueError("n must be 1 or 2")
    if not 0.0 < s < 1.0:
        raise ValueError(f"s must lie in (0, 1), got {s}")
    grid = _calibration_grid(n, resolution)
    C, resid = _fit_constant(grid, s)
    if not C > 0 or resid > CALIBRATION_TOL:
        raise CalibrationError(f"calibration residual {resid:.3e} for n={n}, s={s}")
    if n == 2:
        # the 2-D scheme error is a clean h^(4-2s); remove it by extrapolation
        coarse = SpatialGrid.torus(grid.n // 2, grid.length, dim=2)
        C_coarse, _ = _fit_constant(coarse, s)
        r = 2.0 ** (4.0 - 2.0 * s)
        C = (r * C - C_coarse) / (r - 1.0)
    return C


def _fit_constant(grid: SpatialGrid, s: float) -> tuple[float, float]:
    c = grid.length / 2
    gauss = SampledFunction.from_callable(
        grid, lambda *xs: np.exp(-0.5 * sum((x - c) ** 2 for x in xs)))
    A = fraclap_integral(gauss, s, QuadConfig(), constant=1.0).values.ravel()
    B = fraclap_fourier(gauss, s).values.ravel()
    C = float(A @ B / (A @ A))
    return C, float(np.linalg.norm(C * A - B) / np.linalg.norm(B))


def closed_form_constant(n: int, s: float) -> float:
    """``4^s Gamma(n/2 + s) / (pi^(n/2) |Gamma(-s)|)``, for comparison only."""
    return 4.0**s * math.gamma(n / 2 + s) / (math.pi ** (n / 2) * abs(math.gamma(-s)))


# }}}
