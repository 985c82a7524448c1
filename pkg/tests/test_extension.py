import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad
from scipy.special import kv

from fraclap.core import DomainError, FracOrder, SampledFunction, SpatialGrid, VerticalGrid
from fraclap.extension import (
    Bump,
    MixedBoundarySpec,
    PoissonKernelSpec,
    closed_form_poisson_constant,
    conjugate_residual,
    default_vertical_grid,
    dirac_flux,
    discrete_energy,
    energy_matrix,
    extend_poisson,
    extend_variational,
    flux_constant,
    fundamental_solution,
    kernel_cdf,
    kernel_moment,
    kernel_transform,
    layer_weights,
    neumann_trace,
    nondiv_diagnostics,
    poisson_kernel,
    poisson_kernel_z,
    reflect_even,
    solve_mixed,
    solve_regularized_nondiv,
    weak_form_residual,
    weighted_trace_factor,
)
from fraclap.singular_integral import fraclap_integral
from fraclap.spectral import fraclap_fourier
from fraclap.symbol_ode import closed_form_symbol_constant

S = (0.25, 0.5, 0.75)


def weighted_operator(fn, x, y, a, h=3e-4):
    """Centred differences of ``u_xx + (a/y) u_y + u_yy`` at a point."""
    uxx = (fn(x + h, y) - 2 * fn(x, y) + fn(x - h, y)) / h**2
    uy = (fn(x, y + h) - fn(x, y - h)) / (2 * h)
    uyy = (fn(x, y + h) - 2 * fn(x, y) + fn(x, y - h)) / h**2
    return uxx + a / y * uy + uyy, abs(uxx) + abs(uyy)


# {{{ kernels


@pytest.mark.parametrize("n", [1, 2])
@pytest.mark.parametrize("s", S)
def test_poisson_constant(n, s):
    o = FracOrder(s)
    assert PoissonKernelSpec(o, n).constant == pytest.approx(closed_form_poisson_constant(n, o.a), rel=1e-12)


@pytest.mark.parametrize("s", S)
def test_poisson_kernel_unit_mass_and_equation(s):
    o = FracOrder(s)
    spec = PoissonKernelSpec(o)
    for y in (0.3, 2.0):
        assert quad(lambda x: poisson_kernel(x, y, spec), -np.inf, np.inf, epsrel=1e-12)[0] == pytest.approx(1, rel=1e-9)
    fn = lambda x, y: poisson_kernel(x, y, spec)  # noqa: E731
    for x, y in [(0.2, 0.7), (-1.0, 1.5), (2.0, 0.4)]:
        res, scale = weighted_operator(fn, x, y, o.a)
        assert abs(res) <= 1e-5 * scale


@pytest.mark.parametrize("s", S)
def test_poisson_kernel_z_form(s):
    o = FracOrder(s)
    spec = PoissonKernelSpec(o)
    x = np.linspace(-3, 3, 13)
    for y in (0.1, 1.0, 4.0):
        assert poisson_kernel_z(x, o.y_to_z(y), spec) == pytest.approx(poisson_kernel(x, y, spec), rel=1e-12)
    with pytest.raises(DomainError):
        poisson_kernel(0.0, 0.0, spec)


@pytest.mark.parametrize("s", S)
def test_kernel_transform_is_fourier_transform(s):
    o = FracOrder(s)
    spec = PoissonKernelSpec(o)
    for t in (0.1, 1.0, 3.0):
        ft = 2 * quad(lambda x: poisson_kernel(x, 1.0, spec), 0, np.inf, weight="cos", wvar=t)[0]
        bessel = 2 ** (1 - s) / math.gamma(s) * t**s * kv(s, t)
        assert kernel_transform(o, t) == pytest.approx(ft, rel=1e-7)
        assert kernel_transform(o, t) == pytest.approx(bessel, rel=1e-12)
    assert kernel_transform(o, np.array([0.0]))[0] == 1.0


@pytest.mark.parametrize("s", S)
def test_kernel_cdf_and_moment_derivatives(s):
    o = FracOrder(s)
    spec = PoissonKernelSpec(o)
    t = np.array([-2.0, -0.3, 0.4, 1.7])
    d = 1e-5
    assert (kernel_cdf(o, t + d) - kernel_cdf(o, t - d)) / (2 * d) == pytest.approx(poisson_kernel(t, 1.0, spec), rel=1e-7)
    assert (kernel_moment(o, t + d) - kernel_moment(o, t - d)) / (2 * d) == pytest.approx(t * poisson_kernel(t, 1.0, spec), rel=1e-7)
    assert kernel_cdf(o, np.array([-1e12, 0.0, 1e12])) == pytest.approx([0, 0.5, 1], abs=1e-6)


# }}}

# {{{ fundamental solution


@pytest.mark.parametrize("s", (0.1, 0.25, 0.4))
def test_fundamental_solution_solves_equation(s):
    o = FracOrder(s)
    fn = lambda x, y: fundamental_solution(x, y, o, 1)  # noqa: E731
    for x, y in [(0.5, 0.5), (1.0, 0.3), (-0.4, 1.2)]:
        res, scale = weighted_operator(fn, x, y, o.a)
        assert abs(res) <= 1e-5 * scale


def test_fundamental_solution_two_dimensional_equation():
    o = FracOrder.from_a(0.3)
    h = 1e-3
    X = np.array([0.4, -0.3])
    y = 0.6
    u = lambda p, q: fundamental_solution(p, q, o, 2)  # noqa: E731
    lap = sum((u(X + h * e, y) - 2 * u(X, y) + u(X - h * e, y)) / h**2 for e in np.eye(2))
    uy = (u(X, y + h) - u(X, y - h)) / (2 * h)
    uyy = (u(X, y + h) - 2 * u(X, y) + u(X, y - h)) / h**2
    assert abs(lap + o.a / y * uy + uyy) <= 1e-5 * abs(uyy)


@pytest.mark.parametrize("a", [0.25, 0.5, -0.5])
@pytest.mark.parametrize("delta", [1e-3, 1e-2, 1e-1])
def test_dirac_flux_two_dimensions_closed_form(a, delta):
    # the flux escaping |x| > R at height delta is (delta^2 / (R^2 + delta^2))^((1+a)/2)
    o = FracOrder.from_a(a)
    exact = 1 - (delta**2 / (1 + delta**2)) ** ((1 + a) / 2)
    assert dirac_flux(o, 2, 1.0, delta) == pytest.approx(exact, rel=1e-6)


def test_dirac_flux_one_dimension():
    assert dirac_flux(FracOrder.from_a(0.5), 1, 1.0, 1e-3) == pytest.approx(1.0, abs=1e-2)


def test_fundamental_solution_domain():
    with pytest.raises(DomainError):
        fundamental_solution(1.0, 1.0, FracOrder.from_a(-0.2), 1)
    with pytest.raises(DomainError):
        fundamental_solution(0.0, 0.0, FracOrder(0.25), 1)
    assert flux_constant(2, 0.0) == pytest.approx(1 / (2 * np.pi))


def test_trace_factor_relation():
    for s in S:
        o = FracOrder(s)
        assert weighted_trace_factor(o) * (1 - o.a) ** (-o.a) == pytest.approx(closed_form_symbol_constant(o.a), rel=1e-14)


# }}}

# {{{ extensions


@pytest.mark.parametrize("s", S)
def test_extend_poisson_torus_modes(s):
    o = FracOrder(s)
    g = SpatialGrid.torus(32)
    f = SampledFunction.from_callable(g, lambda x: np.cos(2 * x) + 0.5)
    vg = VerticalGrid.graded(5.0, 30)
    u = extend_poisson(f, vg, o)
    y = vg.nodes[1:]
    prof = 2 ** (1 - s) / math.gamma(s) * (2 * y) ** s * kv(s, 2 * y)
    ref = np.cos(2 * g.axis())[:, None] * prof[None, :] + 0.5
    assert u.values[:, 1:] == pytest.approx(ref, abs=1e-12)


@pytest.mark.parametrize("s", S)
def test_extend_poisson_line_matches_convolution(s):
    o = FracOrder(s)
    spec = PoissonKernelSpec(o)
    vg = VerticalGrid.uniform(2.0, 17)
    errs = []
    for n in (401, 801):
        g = SpatialGrid.line(n, 10.0)
        u = extend_poisson(SampledFunction.from_callable(g, lambda x: np.exp(-x * x)), vg, o)
        err = 0.0
        for j in (1, 8, 16):
            y = vg.nodes[j]
            for x0 in (-2.5, 0.0, 0.6):
                i = int(np.argmin(np.abs(g.axis() - x0)))
                x = g.axis()[i]
                ref = quad(lambda t: poisson_kernel(x - t, y, spec) * np.exp(-t * t), -12, 12,
                           epsabs=1e-13, limit=200, points=[x])[0]
                err = max(err, abs(u.values[i, j] - ref))
        errs.append(err)
    assert errs[1] <= 5e-4 and errs[0] / errs[1] > 3.5


@pytest.mark.parametrize("tail", ["constant", "linear"])
def test_extend_poisson_line_tails(tail):
    o = FracOrder(0.4)
    g = SpatialGrid.line(201, 5.0)
    slope = 0.3 if tail == "linear" else 0.0
    f = SampledFunction.from_callable(g, lambda x: 1.0 + slope * x)
    u = extend_poisson(f, VerticalGrid.uniform(2.0, 17), o, tail=tail)
    # affine data are reproduced at every height
    assert u.values == pytest.approx(np.broadcast_to(f.values[:, None], u.values.shape), abs=1e-6)


@pytest.mark.parametrize("s", S)
def test_harmonic_conductance_exact_for_homogeneous_profile(s):
    a = FracOrder(s).a
    y = VerticalGrid.graded(4.0, 30).nodes
    w = y ** (1 - a)
    flux = layer_weights(y, a, "harmonic").E * np.diff(w)
    assert flux == pytest.approx(np.full(y.size - 1, 1 - a), rel=1e-12)
    if a != 0:
        avg = layer_weights(y, a, "average").E * np.diff(w)
        assert abs(avg[0] / (1 - a) - 1) > 1e-2


@pytest.mark.parametrize("s", S)
def test_energy_matrix_symmetric_semidefinite(s):
    o = FracOrder(s)
    g = SpatialGrid.torus(8)
    y = VerticalGrid.graded(3.0, 16).nodes
    A = energy_matrix(g, y, o.a).toarray()
    assert np.allclose(A, A.T, atol=1e-13 * np.abs(A).max())
    assert np.linalg.eigvalsh(A).min() >= -1e-10 * np.abs(A).max()
    assert np.abs(A @ np.ones(A.shape[0])).max() <= 1e-10 * np.abs(A).max()


@pytest.mark.parametrize("s", S)
def test_variational_matches_poisson(s):
    o = FracOrder(s)
    g = SpatialGrid.torus(128)
    f = SampledFunction.from_callable(g, lambda x: np.cos(x) + 0.3 * np.sin(3 * x))
    vg = default_vertical_grid(g)
    uv = extend_variational(f, vg, o)
    up = extend_poisson(f, vg, o)
    assert np.max(np.abs(uv.values - up.values)) <= 2e-3
    assert np.array_equal(uv.values[:, 0], f.values)


@settings(max_examples=5, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(-2, 2))
def test_variational_linearity(seed, c):
    rng = np.random.default_rng(seed)
    g = SpatialGrid.torus(32)
    vg = default_vertical_grid(g, levels=32)
    o = FracOrder(0.3)
    f = SampledFunction(g, rng.normal(size=32))
    h = SampledFunction(g, rng.normal(size=32))
    lhs = extend_variational(f * c + h, vg, o, tol=1e-13).values
    rhs = c * extend_variational(f, vg, o, tol=1e-13).values + extend_variational(h, vg, o, tol=1e-13).values
    assert lhs == pytest.approx(rhs, abs=1e-9)


@settings(max_examples=5, deadline=None)
@given(st.integers(0, 31))
def test_variational_translation_equivariance(k):
    g = SpatialGrid.torus(32)
    vg = default_vertical_grid(g, levels=32)
    o = FracOrder(0.6)
    f = SampledFunction.from_callable(g, lambda x: np.exp(np.cos(x)))
    u = extend_variational(f, vg, o, tol=1e-13).values
    us = extend_variational(f.with_values(np.roll(f.values, k)), vg, o, tol=1e-13).values
    assert us == pytest.approx(np.roll(u, k, axis=0), abs=1e-9)


@pytest.mark.parametrize("s", S)
def test_trace_methods_agree(s):
    o = FracOrder(s)
    g = SpatialGrid.torus(256)
    f = SampledFunction.from_callable(g, lambda x: np.cos(2 * x))
    u = extend_variational(f, default_vertical_grid(g), o)
    ref = fraclap_fourier(f, s).values * closed_form_symbol_constant(o.a)
    for method in ("incremental_quotient", "z_derivative", "weighted_y"):
        assert np.max(np.abs(neumann_trace(u, method).values - ref)) <= 1e-2 * np.max(np.abs(ref))


@pytest.mark.parametrize("s", S)
def test_energy_matches_trace_pairing(s):
    # J(u) = <f, -y^a u_y> for the minimiser (discrete Green identity)
    o = FracOrder(s)
    g = SpatialGrid.torus(128)
    f = SampledFunction.from_callable(g, lambda x: np.cos(x) + 0.4 * np.cos(3 * x))
    u = extend_variational(f, default_vertical_grid(g), o, tol=1e-13)
    flux = neumann_trace(u, "weighted_y").values * (1 - o.a) ** o.a
    assert discrete_energy(u) == pytest.approx(g.h * float(f.values @ flux), rel=1e-8)


@pytest.mark.parametrize("s", (0.25, 0.75))
def test_conjugate_residual_second_order(s):
    o = FracOrder(s)
    res = []
    for n in (32, 64):
        g = SpatialGrid.torus(n)
        f = SampledFunction.from_callable(g, np.cos)
        res.append(conjugate_residual(extend_poisson(f, VerticalGrid.uniform(4.0, n + 1), o)))
    assert 3.2 <= res[0] / res[1] <= 4.8
    with pytest.raises(ValueError):
        conjugate_residual(extend_poisson(f, VerticalGrid.graded(4.0, 20), o))


# }}}

# {{{ mixed problem and reflection


@pytest.mark.parametrize("s", S)
def test_mixed_reproduces_constants(s):
    g = SpatialGrid.torus(64)
    data = SampledFunction(g, np.full(64, 2.5))
    u = solve_mixed(MixedBoundarySpec.ball(data, np.pi, 1.0), VerticalGrid.graded(6.0, 40), FracOrder(s))
    assert u.values == pytest.approx(2.5, abs=1e-9)


@pytest.mark.parametrize("s", (0.25, 0.75))
def test_mixed_trace_is_s_harmonic_on_window(s):
    o = FracOrder(s)
    g = SpatialGrid.torus(256)
    data = SampledFunction.from_callable(g, lambda x: 1 + np.cos(x) ** 2)
    spec = MixedBoundarySpec.ball(data, np.pi, 1.0)
    u = solve_mixed(spec, default_vertical_grid(g), o, tol=1e-12)
    lap = fraclap_integral(u.trace, o).values
    inner = np.abs(g.axis() - np.pi) < 0.9
    assert np.max(np.abs(lap[inner])) <= 1e-2 * np.max(np.abs(lap))
    # the computed flux vanishes on the window
    flux = neumann_trace(u, "weighted_y").values
    assert np.max(np.abs(flux[spec.window])) <= 1e-8 * np.max(np.abs(flux))


def test_reflection_and_bump():
    g = SpatialGrid.torus(16)
    u = extend_poisson(SampledFunction.from_callable(g, np.cos), VerticalGrid.graded(3.0, 20), FracOrder(0.3))
    ut = reflect_even(u)
    k = ut.nodes.size // 2
    assert ut.nodes[k] == 0 and ut.nodes == pytest.approx(-ut.nodes[::-1])
    assert ut.values == pytest.approx(ut.values[:, ::-1])
    b = Bump((1.0, 0.1), 0.5)
    x, y, d = np.array([1.2]), np.array([0.05]), 1e-6
    gx, gy = b.gradient((x,), y)
    assert gx == pytest.approx((b.value((x + d,), y) - b.value((x - d,), y)) / (2 * d), rel=1e-6)
    assert gy == pytest.approx((b.value((x,), y + d) - b.value((x,), y - d)) / (2 * d), rel=1e-6)


@pytest.mark.parametrize("s", (0.25, 0.75))
def test_weak_residual_small_inside_window_large_outside(s):
    o = FracOrder(s)
    g = SpatialGrid.torus(128)
    data = SampledFunction.from_callable(g, lambda x: 1 + np.cos(x) ** 2 + 0.5 * np.sin(2 * x))
    u = solve_mixed(MixedBoundarySpec.ball(data, np.pi, 1.2), VerticalGrid.graded(6.0, 80), o, tol=1e-12)
    ut = reflect_even(u)
    inside = weak_form_residual(ut, Bump((np.pi, 0.0), 0.5))
    outside = weak_form_residual(ut, Bump((0.5, 0.0), 0.4))
    assert 0 <= inside < 0.1 * outside <= 1


# }}}

# {{{ nondivergence


def test_nondiv_exact_for_harmonic_quadratic():
    u = solve_regularized_nondiv(lambda x, z: x * x - z * z + x * z, 0.0, 0.1, n=21)
    X, Z = np.meshgrid(u.axis, u.axis, indexing="ij")
    assert u.values[u.inside] == pytest.approx((X * X - Z * Z + X * Z)[u.inside], abs=1e-12)


def test_nondiv_even_data_gives_flat_bottom():
    u = solve_regularized_nondiv(lambda x, z: np.cos(2 * x) + z * z * x, 0.5, 0.05, n=61)
    d = nondiv_diagnostics(u)
    assert set(d) == {"dz_at_zero", "dz_scale", "hoelder_sup"}
    assert d["dz_at_zero"] <= 1e-10 * d["dz_scale"]
    assert np.isfinite(d["hoelder_sup"])


def test_nondiv_arguments():
    with pytest.raises(ValueError):
        solve_regularized_nondiv(lambda x, z: x, 0.5, 0.0)
    with pytest.raises(ValueError):
        solve_regularized_nondiv(lambda x, z: x, 0.5, 0.1, n=40)
    with pytest.raises(ValueError):
        solve_regularized_nondiv(lambda x, z: x, 1.0, 0.1)


# }}}
