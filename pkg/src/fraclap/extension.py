"""The weighted harmonic extension and its Neumann trace.

The extension ``u`` of ``f`` solves ``div(y^a grad u) = 0`` in the upper half
space with ``u(x, 0) = f``. After ``z = (y / (1-a))^(1-a)`` the same equation
reads ``Delta_x u + z^alpha u_zz = 0`` and ``-u_z(x, 0) = C_a (-Delta)^s f`` with
``C_a`` the symbol constant of :mod:`fraclap.symbol_ode`.

Two constructions are provided: convolution with the Poisson kernel (exact in
Fourier space on the torus, product integration on the line) and minimisation
of the discrete weighted Dirichlet energy by preconditioned conjugate gradients.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp
from scipy import integrate, special
from scipy.linalg import eigh
from scipy.sparse.linalg import LinearOperator, cg, splu, spsolve

from .core import Array, DomainError, FracOrder, HalfPlaneField, SampledFunction, SpatialGrid, VerticalGrid, z_to_y
from .spectral import wavenumber_modulus


class SolverError(RuntimeError):
    """Conjugate gradients did not reach the requested tolerance."""


# {{{ Poisson kernel


@dataclass(frozen=True)
class PoissonKernelSpec:
    """Poisson kernel of the weighted extension in ``n`` space dimensions.

    The constants are fixed by requiring unit mass at every height.
    """

    order: FracOrder
    dim: int = 1

    def __post_init__(self) -> None:
        if self.dim not in (1, 2):
            raise ValueError("dim must be 1 or 2")

    @property
    def exponent(self) -> float:
        return (self.dim + 1.0 - self.order.a) / 2.0

    @property
    def constant(self) -> float:
        return _unit_mass_constant(self.dim, self.exponent, 1.0)

    @property
    def constant_z(self) -> float:
        """Constant of the kernel written in the ``z`` variable (normalised separately)."""
        return _unit_mass_constant(self.dim, self.exponent, 1.0 - self.order.a)


@functools.lru_cache(maxsize=None)
def _unit_mass_constant(n: int, p: float, c: float) -> float:
    """``1 / int_{R^n} (|t|^2 + c^2)^(-p) dt`` by adaptive quadrature."""
    if n == 1:
        m = 2.0 * integrate.quad(lambda t: (t * t + c * c) ** (-p), 0.0, np.inf,
                                 epsabs=0.0, epsrel=1e-13, limit=200)[0]
    else:
        m = 2.0 * np.pi * integrate.quad(lambda r: r * (r * r + c * c) ** (-p), 0.0, np.inf,
                                         epsabs=0.0, epsrel=1e-13, limit=200)[0]
    return 1.0 / m


def closed_form_poisson_constant(n: int, a: float) -> float:
    """``Gamma((n+1-a)/2) / (pi^(n/2) Gamma((1-a)/2))``, for comparison only."""
    return math.gamma((n + 1 - a) / 2) / (math.pi ** (n / 2) * math.gamma((1 - a) / 2))


def _radius2(x, n: int) -> Array:
    x = np.asarray(x, dtype=float)
    return x * x if n == 1 else np.sum(x * x, axis=-1)


def poisson_kernel(x, y, spec: PoissonKernelSpec) -> Array:
    """``P(x, y) = C y^(1-a) / (|x|^2 + y^2)^((n+1-a)/2)``; ``x`` has a trailing axis of length 2 when ``n = 2``."""
    y = np.asarray(y, dtype=float)
    if np.any(y <= 0):
        raise DomainError("the Poisson kernel needs y > 0")
    a = spec.order.a
    return spec.constant * y ** (1.0 - a) / (_radius2(x, spec.dim) + y * y) ** spec.exponent


def poisson_kernel_z(x, z, spec: PoissonKernelSpec) -> Array:
    """The same kernel in the ``z`` variable: ``C' z / (|x|^2 + (1-a)^2 z^(2/(1-a)))^((n+1-a)/2)``."""
    z = np.asarray(z, dtype=float)
    if np.any(z <= 0):
        raise DomainError("the Poisson kernel needs z > 0")
    a = spec.order.a
    r2 = _radius2(x, spec.dim) + (1.0 - a) ** 2 * z ** (2.0 / (1.0 - a))
    return spec.constant_z * z / r2**spec.exponent


def kernel_transform(order: FracOrder, t) -> Array:
    """Fourier transform of ``P(., y)`` at ``|xi| y = t``: ``2^(1-s) / Gamma(s) t^s K_s(t)``."""
    s = order.s
    t = np.asarray(t, dtype=float)
    out = np.ones_like(t)
    pos = t > 0
    tp = t[pos]
    # kve = K * exp(t) keeps the product finite for large t
    out[pos] = 2.0 ** (1 - s) / math.gamma(s) * tp**s * special.kve(s, tp) * np.exp(-tp)
    return out


def kernel_cdf(order: FracOrder, t) -> Array:
    """Distribution function of the one-dimensional profile ``P(t, 1)``."""
    t = np.asarray(t, dtype=float)
    u = t * t / (1.0 + t * t)
    return 0.5 + 0.5 * np.sign(t) * special.betainc(0.5, (1.0 - order.a) / 2.0, u)


def kernel_moment(order: FracOrder, t) -> Array:
    """``int_0^t tau P(tau, 1) d tau`` (even in ``t``, unbounded when ``a >= 0``)."""
    a = order.a
    C = PoissonKernelSpec(order, 1).constant
    t2 = np.asarray(t, dtype=float) ** 2
    if abs(a) < 1e-12:
        return 0.5 * C * np.log1p(t2)
    return C * ((1.0 + t2) ** (a / 2.0) - 1.0) / a


# }}}


# {{{ fundamental solution


def _check_fundamental(order: FracOrder, n: int) -> float:
    d = n - 1.0 + order.a
    if not d > 0:
        raise DomainError(f"fundamental solution needs n - 1 + a > 0, got {d:.3g}")
    return d


@functools.lru_cache(maxsize=None)
def flux_constant(n: int, a: float) -> float:
    """Constant making ``-lim y^a d_y Gamma`` a unit point mass."""
    d = _check_fundamental(FracOrder.from_a(a), n)
    p = (n + 1.0 + a) / 2.0
    return _unit_mass_constant(n, p, 1.0) / d


def fundamental_solution(x, y, order: FracOrder, n: int = 1) -> Array:
    """``Gamma(X) = C |X|^-(n-1+a)`` with ``X = (x, y)``."""
    d = _check_fundamental(order, n)
    R2 = _radius2(x, n) + np.asarray(y, dtype=float) ** 2
    if np.any(R2 == 0):
        raise DomainError("the fundamental solution is singular at the origin")
    return flux_constant(n, order.a) * R2 ** (-d / 2.0)


def fundamental_solution_z(x, z, order: FracOrder, n: int = 1) -> Array:
    return fundamental_solution(x, z_to_y(z, order), order, n)


def dirac_flux(order: FracOrder, n: int, radius: float, delta: float) -> float:
    """``int_{|x|<R} -y^a d_y Gamma(x, delta) dx`` with a centred difference in ``y``."""
    if n == 1:
        return 2.0 * integrate.quad(lambda r: float(_fd_density(order, n, r, delta)), 0.0, radius,
                                    epsabs=0.0, epsrel=1e-8, limit=200, points=[delta])[0]
    return 2.0 * np.pi * integrate.quad(lambda r: r * float(_fd_density(order, n, r, delta)), 0.0,
                                        radius, epsabs=0.0, epsrel=1e-8, limit=200,
                                        points=[delta])[0]


def _fd_density(order: FracOrder, n: int, r: float, delta: float) -> float:
    dy = 1e-4 * delta
    x = r if n == 1 else np.array([r, 0.0])
    up = fundamental_solution(x, delta + dy, order, n)
    dn = fundamental_solution(x, delta - dy, order, n)
    return -delta**order.a * (up - dn) / (2 * dy)


def operator_residual(values: Array, xgrid: SpatialGrid, y: Array, a: float) -> Array:
    """Centred differences of ``Delta_x u + (a/y) u_y + u_yy`` on interior nodes.

    ``y`` must be uniform and positive. Line grids drop the end columns.
    """
    dy = np.diff(y)
    if not np.allclose(dy, dy[0], rtol=1e-9, atol=0.0):
        raise ValueError("operator_residual needs a uniform vertical grid")
    dy = dy[0]
    h = xgrid.h
    u = values
    lap = np.zeros_like(u)
    for ax in range(xgrid.dim):
        lap += (np.roll(u, 1, ax) - 2 * u + np.roll(u, -1, ax)) / h**2
    uy = (u[..., 2:] - u[..., :-2]) / (2 * dy)
    uyy = (u[..., 2:] - 2 * u[..., 1:-1] + u[..., :-2]) / dy**2
    res = lap[..., 1:-1] + a / y[1:-1] * uy + uyy
    if not xgrid.periodic:
        res = res[(slice(1, -1),) * xgrid.dim]
    return res


# }}}


# {{{ Poisson extension


Tail = str


def default_vertical_grid(xgrid: SpatialGrid, levels: int = 96, ratio: float = 1.15,
                          height: float | None = None) -> VerticalGrid:
    """Graded ``y`` grid reaching ``10 / k_min`` so the slowest mode decays to about ``1e-4``."""
    if height is None:
        k_min = 2 * np.pi / xgrid.length if xgrid.periodic else np.pi / xgrid.length
        height = 10.0 / k_min
    return VerticalGrid.graded(height, levels, ratio)


def extend_poisson(f: SampledFunction, vgrid: VerticalGrid, order: FracOrder,
                   tail: Tail = "zero") -> HalfPlaneField:
    """Convolve ``f`` with the Poisson kernel at every level of ``vgrid``.

    On the torus this multiplies Fourier coefficients by the exact transform of
    the kernel, which is the periodised convolution. On the line (``n = 1``) ``f``
    is taken piecewise linear and integrated against the kernel exactly; beyond
    the grid ``f`` is continued by ``tail``: ``"zero"``, ``"constant"`` (end
    values) or ``"linear"`` (end values with the slope of the two end segments,
    which must agree).
    """
    y = vgrid.y_nodes(order)
    out = np.empty((*f.grid.shape, y.size))
    if f.grid.periodic:
        fh = np.fft.fftn(f.values)
        xi = wavenumber_modulus(f.grid)
        for j, yj in enumerate(y):
            out[..., j] = np.real(np.fft.ifftn(fh * kernel_transform(order, xi * yj)))
    elif f.grid.dim == 1:
        for j, yj in enumerate(y):
            out[:, j] = _line_level(f, yj, order, tail) if yj > 0 else f.values
    else:
        raise NotImplementedError("line-mode Poisson extension is implemented for n = 1")
    out[..., 0] = f.values
    return HalfPlaneField(f.grid, vgrid, out, order)


def _line_level(f: SampledFunction, y: float, order: FracOrder, tail: Tail) -> Array:
    x = f.grid.axis()
    v = f.values
    X = f.grid.length
    # t_j = (x_i - xi_j) / y for every target i and node j
    t = (x[:, None] - x[None, :]) / y
    F = kernel_cdf(order, t)
    M = kernel_moment(order, t)
    dF = F[:, :-1] - F[:, 1:]           # mass of segment [xi_j, xi_{j+1}]
    dM = M[:, :-1] - M[:, 1:]
    slope = np.diff(v) / np.diff(x)
    # int (xi - xi_j) P = (x - xi_j) dF - y dM on each segment
    first = (x[:, None] - x[None, :-1]) * dF - y * dM
    u = dF @ v[:-1] + first @ slope
    if tail == "zero":
        if max(abs(v[0]), abs(v[-1])) > 1e-6 * max(np.abs(v).max(), 1e-300):
            raise ValueError("f does not decay at the ends of the line; pass tail='constant' or 'linear'")
        return u
    tR = (x - X) / y
    tL = (x + X) / y
    FR = kernel_cdf(order, tR)
    FL = kernel_cdf(order, tL)
    u = u + v[-1] * FR + v[0] * (1.0 - FL)
    if tail == "constant":
        return u
    if tail == "linear":
        mL, mR = slope[0], slope[-1]
        if not np.isclose(mL, mR, rtol=1e-8, atol=1e-12):
            raise ValueError("linear tail needs equal end slopes (the first moment diverges otherwise)")
        m = 0.5 * (mL + mR)
        # the divergent moments of the two half-lines cancel for equal slopes
        lin = (x - X) * FR + (x + X) * (1.0 - FL) + y * (kernel_moment(order, tL) - kernel_moment(order, tR))
        return u + m * lin
    raise ValueError(f"unknown tail model {tail!r}")


# }}}


# {{{ discrete energy and its minimiser


@dataclass(frozen=True)
class _Layers:
    """Vertical weights of the discrete energy on nodes ``y_0 = 0 < ... < y_M``."""

    V: Array  # int y^a over the dual cell of each node
    E: Array  # conductance of each vertical edge


def layer_weights(y: Array, a: float, vertical: str = "harmonic") -> _Layers:
    """Dual-cell masses and edge conductances.

    ``vertical="harmonic"`` uses ``1 / int y^-a`` over the edge, which is exact for
    the one-dimensional profile ``y^(1-a)``; ``"average"`` uses the cell average of
    ``y^a`` divided by the squared edge length.
    """
    mid = 0.5 * (y[1:] + y[:-1])
    ends = np.concatenate([[0.0], mid, [y[-1]]])
    V = (ends[1:] ** (1 + a) - ends[:-1] ** (1 + a)) / (1 + a)
    if vertical == "harmonic":
        E = (1 - a) / (y[1:] ** (1 - a) - y[:-1] ** (1 - a))
    elif vertical == "average":
        E = (y[1:] ** (1 + a) - y[:-1] ** (1 + a)) / ((1 + a) * np.diff(y) ** 2)
    else:
        raise ValueError(f"unknown vertical weighting {vertical!r}")
    return _Layers(V, E)


def _x_laplacian_1d(grid: SpatialGrid) -> sp.csr_matrix:
    """Graph Laplacian ``sum (u_{i+1} - u_i)^2 / h^2`` of one axis (periodic or free ends)."""
    n, h = grid.n, grid.h
    main = 2.0 * np.ones(n)
    off = -np.ones(n - 1)
    L = sp.diags([off, main, off], [-1, 0, 1], format="lil")
    if grid.periodic:
        L[0, n - 1] = L[n - 1, 0] = -1.0
    else:
        L[0, 0] = L[n - 1, n - 1] = 1.0
    return (L / h**2).tocsr()


def _vertical_laplacian(E: Array) -> sp.csr_matrix:
    m = E.size + 1
    d = np.zeros(m)
    d[:-1] += E
    d[1:] += E
    return sp.diags([-E, d, -E], [-1, 0, 1], format="csr")


def energy_matrix(xgrid: SpatialGrid, y: Array, a: float, vertical: str = "harmonic") -> sp.csr_matrix:
    """``A`` with ``J(u) = u^T A u`` for fields flattened in ``(x..., level)`` order."""
    lay = layer_weights(y, a, vertical)
    L1 = _x_laplacian_1d(xgrid)
    I1 = sp.identity(xgrid.n, format="csr")
    Lx = L1 if xgrid.dim == 1 else sp.kron(L1, I1) + sp.kron(I1, L1)
    Ix = sp.identity(Lx.shape[0], format="csr")
    A = sp.kron(Lx, sp.diags(lay.V)) + sp.kron(Ix, _vertical_laplacian(lay.E))
    return (xgrid.h**xgrid.dim * A).tocsr()


def discrete_energy(u: HalfPlaneField, vertical: str = "harmonic") -> float:
    """Weighted Dirichlet energy ``J(u)`` of the discrete scheme."""
    A = energy_matrix(u.xgrid, u.y_nodes(), u.order.a, vertical)
    v = u.values.ravel()
    return float(v @ (A @ v))


class _Separable:
    """Exact solver for ``h^n (Lx (x) V + I (x) T)`` on a box of free columns and rows."""

    def __init__(self, xgrid: SpatialGrid, cols: slice, rows: slice, lay: _Layers):
        L1 = _x_laplacian_1d(xgrid).toarray()[cols, cols]
        lam, self.Q = eigh(L1)
        self.dim = xgrid.dim
        if self.dim == 2:
            lam = lam[:, None] + lam[None, :]
        T = _vertical_laplacian(lay.E).toarray()[rows, rows]
        V = lay.V[rows]
        hn = xgrid.h**xgrid.dim
        diag = hn * (lam[..., None] * V + np.diag(T))
        off = hn * np.diag(T, 1)
        m = V.size
        self.off = off
        self.denom = np.empty_like(diag)
        self.cp = np.empty(diag.shape[:-1] + (max(m - 1, 0),))
        self.denom[..., 0] = diag[..., 0]
        for j in range(1, m):
            self.cp[..., j - 1] = off[j - 1] / self.denom[..., j - 1]
            self.denom[..., j] = diag[..., j] - off[j - 1] * self.cp[..., j - 1]

    def _to_modes(self, r: Array) -> Array:
        Q = self.Q
        if self.dim == 1:
            return np.einsum("ia,ik->ak", Q, r)
        return np.einsum("ia,jb,ijk->abk", Q, Q, r)

    def _from_modes(self, r: Array) -> Array:
        Q = self.Q
        if self.dim == 1:
            return np.einsum("ia,ak->ik", Q, r)
        return np.einsum("ia,jb,abk->ijk", Q, Q, r)

    def solve(self, r: Array) -> Array:
        g = self._to_modes(r)
        m = g.shape[-1]
        w = np.empty_like(g)
        w[..., 0] = g[..., 0] / self.denom[..., 0]
        for j in range(1, m):
            w[..., j] = (g[..., j] - self.off[j - 1] * w[..., j - 1]) / self.denom[..., j]
        for j in range(m - 2, -1, -1):
            w[..., j] -= self.cp[..., j] * w[..., j + 1]
        return self._from_modes(w)


CLOSURES = ("zero", "poisson", "neumann")


def _closure_values(data: SampledFunction, vgrid: VerticalGrid, order: FracOrder,
                    closure: str, tail: Tail) -> Array:
    if closure == "poisson":
        return extend_poisson(data, vgrid, order, tail).values
    return np.zeros((*data.grid.shape, vgrid.size))


def _fixed_mask(xgrid: SpatialGrid, nv: int, closure: str, bottom: Array) -> Array:
    mask = np.zeros((*xgrid.shape, nv), dtype=bool)
    mask[..., 0] = bottom
    if closure != "neumann":
        mask[..., -1] = True
        if not xgrid.periodic:
            for ax in range(xgrid.dim):
                idx = [slice(None)] * (xgrid.dim + 1)
                idx[ax] = 0
                mask[tuple(idx)] = True
                idx[ax] = -1
                mask[tuple(idx)] = True
    return mask


@dataclass(frozen=True)
class SolveReport:
    iterations: int
    residual: float


def _minimise(xgrid: SpatialGrid, vgrid: VerticalGrid, order: FracOrder, fixed: Array,
              values: Array, closure: str, mixed: bool, tol: float, maxiter: int,
              vertical: str) -> tuple[Array, SolveReport]:
    y = vgrid.y_nodes(order)
    A = energy_matrix(xgrid, y, order.a, vertical)
    flat_fixed = fixed.ravel()
    free = np.flatnonzero(~flat_fixed)
    bound = np.flatnonzero(flat_fixed)
    A_ff = A[free][:, free]
    b = -(A[free][:, bound] @ values.ravel()[bound])

    # symmetric Jacobi scaling keeps the stopping test meaningful when the
    # bottom conductances are orders of magnitude larger than the rest
    d = np.sqrt(A_ff.diagonal())
    As = (sp.diags(1.0 / d) @ A_ff @ sp.diags(1.0 / d)).tocsc()
    bs = b / d
    if mixed:
        # a free part of the bottom row breaks separability: factor exactly
        lu = splu(As)
        pre_solve = lu.solve
    else:
        inner = slice(None) if xgrid.periodic or closure == "neumann" else slice(1, -1)
        rows = slice(1, vgrid.size if closure == "neumann" else vgrid.size - 1)
        box_shape = tuple(len(range(xgrid.n)[inner]) for _ in range(xgrid.dim)) + (len(range(vgrid.size)[rows]),)
        sep = _Separable(xgrid, inner, rows, layer_weights(y, order.a, vertical))

        def pre_solve(r):
            return sep.solve((r * d).reshape(box_shape)).ravel() * d

    M = LinearOperator(As.shape, matvec=pre_solve, dtype=float)
    count = [0]

    def cb(_):
        count[0] += 1

    sol, info = cg(As, bs, x0=pre_solve(bs), rtol=tol, atol=0.0, maxiter=maxiter, M=M, callback=cb)
    bn = np.linalg.norm(bs)
    res = float(np.linalg.norm(As @ sol - bs) / bn) if bn > 0 else 0.0
    if info != 0 or res > 10 * tol:
        raise SolverError(f"CG stopped after {count[0]} iterations at relative residual {res:.3e}")
    sol = sol / d
    out = values.ravel().copy()
    out[free] = sol
    return out.reshape(values.shape), SolveReport(count[0], res)


def extend_variational(f: SampledFunction, vgrid: VerticalGrid, order: FracOrder,
                       closure: str = "zero", tol: float = 1e-10, maxiter: int = 500,
                       vertical: str = "harmonic", tail: Tail = "zero",
                       report: bool = False):
    """Minimise the discrete weighted energy with bottom row ``f``.

    ``closure`` fixes the top row (and the line ends) to zero, to the Poisson
    extension, or leaves them free (``"neumann"``). The SPD system is solved by
    conjugate gradients preconditioned with a separable direct solver, which is
    exact for this problem, so a single iteration usually suffices.
    """
    if closure not in CLOSURES:
        raise ValueError(f"closure must be one of {CLOSURES}")
    if vgrid.coordinate != "y":
        raise ValueError("the variational solve works on a y-grid; convert the grid first")
    vals = _closure_values(f, vgrid, order, closure, tail)
    vals[..., 0] = f.values
    fixed = _fixed_mask(f.grid, vgrid.size, closure, np.ones(f.grid.shape, dtype=bool))
    u, rep = _minimise(f.grid, vgrid, order, fixed, vals, closure, False, tol, maxiter, vertical)
    field = HalfPlaneField(f.grid, vgrid, u, order)
    return (field, rep) if report else field


@dataclass(frozen=True, eq=False)
class MixedBoundarySpec:
    """Bottom data ``g`` held fixed outside ``window``; inside, the natural condition applies."""

    data: SampledFunction
    window: Array

    def __post_init__(self) -> None:
        w = np.asarray(self.window, dtype=bool)
        if w.shape != self.data.grid.shape:
            raise ValueError("window mask must match the grid")
        if w.all():
            raise ValueError("the window may not cover the whole bottom row")
        w.flags.writeable = False
        object.__setattr__(self, "window", w)

    @classmethod
    def ball(cls, data: SampledFunction, center, radius: float) -> MixedBoundarySpec:
        c = np.atleast_1d(np.asarray(center, dtype=float))
        r2 = sum((x - ci) ** 2 for x, ci in zip(data.grid.coords(), c))
        return cls(data, r2 < radius**2)


def solve_mixed(spec: MixedBoundarySpec, vgrid: VerticalGrid, order: FracOrder,
                closure: str = "neumann", tol: float = 1e-10, maxiter: int = 2000,
                vertical: str = "harmonic", tail: Tail = "zero", report: bool = False):
    """Minimise the energy with the trace fixed only outside the window.

    On the window the discrete natural boundary condition makes the weighted
    Neumann flux vanish, so the trace there is ``s``-harmonic. The free top and
    ends (``closure="neumann"``) reproduce constants exactly.
    """
    if closure not in CLOSURES:
        raise ValueError(f"closure must be one of {CLOSURES}")
    if vgrid.coordinate != "y":
        raise ValueError("the variational solve works on a y-grid; convert the grid first")
    g = spec.data
    vals = _closure_values(g, vgrid, order, closure, tail)
    vals[..., 0] = g.values
    fixed = _fixed_mask(g.grid, vgrid.size, closure, ~spec.window)
    u, rep = _minimise(g.grid, vgrid, order, fixed, vals, closure, True, tol, maxiter, vertical)
    field = HalfPlaneField(g.grid, vgrid, u, order)
    return (field, rep) if report else field


# }}}


# {{{ traces


TRACE_METHODS = ("incremental_quotient", "z_derivative", "weighted_y")


def neumann_trace(u: HalfPlaneField, method: str = "incremental_quotient",
                  vertical: str = "harmonic") -> SampledFunction:
    """``-d_z u(x, 0)``, which equals ``C_a (-Delta)^s f``.

    ``incremental_quotient``: ``-(u_k - u_0) / z_k`` on the two lowest levels,
    Richardson-extrapolated in ``z^(1-alpha)``. ``z_derivative``: the linear
    coefficient of ``u_0 + b_1 z + b_2 z^(2-alpha) + b_3 z^(3-alpha)`` through the
    three lowest levels. ``weighted_y``: the discrete bottom flux
    ``-y^a u_y`` of the energy scheme, mapped to ``z`` by ``(1-a)^-a``.
    """
    order = u.order
    if u.vgrid.size < 4:
        raise ValueError("need at least three levels above the boundary")
    z = u.vgrid.z_nodes(order)
    v = u.values
    al = order.alpha
    if method == "incremental_quotient":
        e = 1.0 - al
        q1 = -(v[..., 1] - v[..., 0]) / z[1]
        q2 = -(v[..., 2] - v[..., 0]) / z[2]
        w1, w2 = z[1] ** e, z[2] ** e
        out = (q1 * w2 - q2 * w1) / (w2 - w1)
    elif method == "z_derivative":
        zk = z[1:4]
        B = np.stack([zk, zk ** (2 - al), zk ** (3 - al)], axis=1)
        rhs = (v[..., 1:4] - v[..., :1]).reshape(-1, 3).T
        b = np.linalg.solve(B, rhs)
        out = -b[0].reshape(v.shape[:-1])
    elif method == "weighted_y":
        y = u.y_nodes()
        lay = layer_weights(y, order.a, vertical)
        f = v[..., 0]
        lap = np.zeros_like(f)
        h = u.xgrid.h
        for ax in range(u.xgrid.dim):
            lap += (np.roll(f, 1, ax) - 2 * f + np.roll(f, -1, ax)) / h**2
        flux = -lay.V[0] * lap + lay.E[0] * (v[..., 0] - v[..., 1])
        out = flux * (1.0 - order.a) ** (-order.a)
    else:
        raise ValueError(f"method must be one of {TRACE_METHODS}")
    return SampledFunction(u.xgrid, out)


def weighted_trace_factor(order: FracOrder) -> float:
    """``d_s`` in ``-lim y^a u_y = d_s (-Delta)^s f``."""
    s = order.s
    return 2.0 ** (1 - 2 * s) * math.gamma(1 - s) / math.gamma(s)


# }}}


# {{{ conjugate equation


def conjugate_residual(u: HalfPlaneField, window: tuple[float, float] | None = None) -> float:
    """Max-norm residual of ``Delta_x w - (a/y) w_y + w_yy`` for ``w = y^a u_y``.

    Needs a uniform ``y`` grid. The check runs on ``window`` (default
    ``[H/4, H/2]``), away from the degenerate boundary and the truncation.
    """
    y = u.y_nodes()
    dy = np.diff(y)
    if not np.allclose(dy, dy[0], rtol=1e-9, atol=0.0):
        raise ValueError("conjugate_residual needs a uniform vertical grid")
    a = u.order.a
    H = y[-1]
    lo, hi = window if window is not None else (0.25 * H, 0.5 * H)
    v = u.values
    w = y[1:-1] ** a * (v[..., 2:] - v[..., :-2]) / (2 * dy[0])
    res = operator_residual(w, u.xgrid, y[1:-1], -a)
    yc = y[2:-2]
    keep = (yc >= lo) & (yc <= hi)
    return float(np.max(np.abs(res[..., keep]))) if keep.any() else 0.0


# }}}


# {{{ reflection


@dataclass(frozen=True, eq=False)
class FullPlaneField:
    """Field on ``xgrid x`` signed vertical nodes (the even reflection of a half-plane field)."""

    xgrid: SpatialGrid
    nodes: Array
    values: Array
    order: FracOrder


def reflect_even(u: HalfPlaneField) -> FullPlaneField:
    y = u.y_nodes()
    nodes = np.concatenate([-y[:0:-1], y])
    vals = np.concatenate([u.values[..., :0:-1], u.values], axis=-1)
    return FullPlaneField(u.xgrid, nodes, vals, u.order)


@dataclass(frozen=True)
class Bump:
    """``(1 - |X - c|^2 / r^2)^3`` inside the ball, zero outside; ``c`` lists x-coordinates then ``y``."""

    center: tuple[float, ...]
    radius: float

    def gradient(self, xs: Sequence[Array], y: Array, period: float | None = None) -> list[Array]:
        c = self.center
        d = [x - ci for x, ci in zip(xs, c[:-1])]
        if period is not None:
            d = [(di + period / 2) % period - period / 2 for di in d]
        d.append(y - c[-1])
        rho2 = sum(di * di for di in d) / self.radius**2
        fac = np.where(rho2 < 1, -6.0 * (1 - rho2) ** 2 / self.radius**2, 0.0)
        return [fac * di for di in d]

    def value(self, xs: Sequence[Array], y: Array, period: float | None = None) -> Array:
        c = self.center
        d = [x - ci for x, ci in zip(xs, c[:-1])]
        if period is not None:
            d = [(di + period / 2) % period - period / 2 for di in d]
        d.append(y - c[-1])
        rho2 = sum(di * di for di in d) / self.radius**2
        return np.where(rho2 < 1, (1 - rho2) ** 3, 0.0)


def weak_form_residual(ut: FullPlaneField, test: Bump) -> float:
    """Relative weak residual ``sum w |y|^a grad u . grad h`` over the full plane.

    Each cell contributes its exact weight integral times the gradient of the
    multilinear interpolant of ``u`` and the exact gradient of ``h``, both at the
    cell centre. The sum is divided by the Cauchy-Schwarz bound, so the result
    lies in ``[0, 1]``.
    """
    g = ut.xgrid
    a = ut.order.a
    yn = ut.nodes
    c, r = test.center, test.radius
    if c[-1] - r < yn[0] or c[-1] + r > yn[-1]:
        raise ValueError("test function support leaves the vertical range")
    if not g.periodic:
        for ci in c[:-1]:
            if ci - r < -g.length or ci + r > g.length:
                raise ValueError("test function support leaves the spatial range")
    u = ut.values
    h = g.h
    n = g.dim
    if g.periodic:
        u = np.concatenate([u, u[(slice(0, 1),) * 1]], axis=0) if n == 1 else \
            np.pad(u, [(0, 1), (0, 1), (0, 0)], mode="wrap")
    ax = g.axis()
    xc_ax = np.append(ax, ax[-1] + h)[:-1] + h / 2 if g.periodic else 0.5 * (ax[1:] + ax[:-1])
    ycells = 0.5 * (yn[1:] + yn[:-1])
    wy = _abs_power_integral(yn[:-1], yn[1:], a)

    def avg_other(d: Array, skip: int) -> Array:
        for k in range(n + 1):
            if k != skip:
                d = 0.5 * (np.take(d, range(0, d.shape[k] - 1), axis=k)
                           + np.take(d, range(1, d.shape[k]), axis=k))
        return d

    grads = []
    for k in range(n):
        grads.append(avg_other(np.diff(u, axis=k) / h, k))
    grads.append(avg_other(np.diff(u, axis=n) / np.diff(yn), n))
    if n == 1:
        X = (xc_ax[:, None],)
        Y = ycells[None, :]
    else:
        X = (xc_ax[:, None, None], xc_ax[None, :, None])
        Y = ycells[None, None, :]
    gb = test.gradient(X, Y, g.length if g.periodic else None)
    w = h**n * wy
    dot = sum(gu * gv for gu, gv in zip(grads, gb))
    num = float(np.sum(w * dot))
    nu = math.sqrt(float(np.sum(w * sum(gu * gu for gu in grads))))
    nb = math.sqrt(float(np.sum(w * sum(gv * gv for gv in gb))))
    if nu == 0.0 or nb == 0.0:
        return 0.0
    return abs(num) / (nu * nb)


def _abs_power_integral(lo: Array, hi: Array, a: float) -> Array:
    """``int_lo^hi |y|^a dy`` for cells that do not straddle 0."""
    F = lambda t: np.sign(t) * np.abs(t) ** (1 + a) / (1 + a)  # noqa: E731
    return F(hi) - F(lo)


# }}}


# {{{ nondivergence regularisation


@dataclass(frozen=True, eq=False)
class NondivField:
    """Solution of ``Delta_x u + (|z| + eps)^alpha u_zz = 0`` on a disc, sampled on a square grid."""

    axis: Array
    values: Array  # indexed (x, z); boundary data outside the disc
    inside: Array
    alpha: float
    eps: float
    radius: float

    @property
    def h(self) -> float:
        return float(self.axis[1] - self.axis[0])


def solve_regularized_nondiv(g: Callable[[Array, Array], Array], alpha: float, eps: float,
                             radius: float = 1.0, n: int = 81) -> NondivField:
    """Five-point finite differences for the regularised equation on the disc of ``radius``.

    ``n`` (odd) nodes per axis of ``[-R, R]``; nodes outside the open disc carry
    the Dirichlet data ``g(x, z)``.
    """
    if not eps > 0:
        raise ValueError("eps must be positive (the eps = 0 system is degenerate)")
    if not alpha < 1:
        raise ValueError("alpha must be < 1")
    if n % 2 == 0 or n < 9:
        raise ValueError("n must be odd and at least 9 so that z = 0 is a node")
    ax = np.linspace(-radius, radius, n)
    h = ax[1] - ax[0]
    X, Z = np.meshgrid(ax, ax, indexing="ij")
    inside = X**2 + Z**2 < radius**2 * (1 - 1e-12)
    vals = np.where(inside, 0.0, np.asarray(g(X, Z), dtype=float))
    idx = -np.ones(X.shape, dtype=int)
    idx[inside] = np.arange(np.count_nonzero(inside))
    cz = (np.abs(Z) + eps) ** alpha
    rows, cols, data = [], [], []
    rhs = np.zeros(np.count_nonzero(inside))
    I, J = np.nonzero(inside)
    k = idx[I, J]
    rows.append(k)
    cols.append(k)
    data.append(-(2.0 + 2.0 * cz[I, J]) / h**2)
    for di, dj, coef in ((1, 0, 1.0), (-1, 0, 1.0), (0, 1, None), (0, -1, None)):
        c = np.full(k.size, 1.0) if coef is not None else cz[I, J]
        nb_i, nb_j = I + di, J + dj
        nb = idx[nb_i, nb_j]
        interior = nb >= 0
        rows.append(k[interior])
        cols.append(nb[interior])
        data.append(c[interior] / h**2)
        rhs[k[~interior]] -= c[~interior] * vals[nb_i[~interior], nb_j[~interior]] / h**2
    A = sp.csr_matrix((np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(k.size, k.size))
    vals[inside] = spsolve(A.tocsc(), rhs)[idx[inside]]
    return NondivField(ax, vals, inside, float(alpha), float(eps), float(radius))


def nondiv_diagnostics(u: NondivField, delta: float = 0.1) -> dict:
    """``max |d_z u(x, 0)|`` and ``sup |d_z u| / z^(1-alpha)`` on an inner region.

    The region is ``|x| < R(1-2 delta)``, ``0 < z < R(1-delta)``, intersected with
    the disc of radius ``R(1-delta)`` so every difference stencil is interior.
    """
    ax, h, R = u.axis, u.h, u.radius
    X, Z = np.meshgrid(ax, ax, indexing="ij")
    dz = np.full(u.values.shape, np.nan)
    dz[:, 1:-1] = (u.values[:, 2:] - u.values[:, :-2]) / (2 * h)
    region = (np.abs(X) < R * (1 - 2 * delta)) & (X**2 + Z**2 < (R * (1 - delta)) ** 2)
    mid = (ax.size - 1) // 2
    at0 = region[:, mid]
    up = region & (Z > h / 2) & (Z < R * (1 - delta))
    ratio = np.abs(dz[up]) / Z[up] ** (1 - u.alpha)
    scale = float(np.max(np.abs(dz[up]))) if up.any() else 1.0
    return {"dz_at_zero": float(np.max(np.abs(dz[at0, mid]))),
            "dz_scale": scale,
            "hoelder_sup": float(np.max(ratio))}


# }}}
