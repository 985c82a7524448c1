import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad
from scipy.special import hyp1f1, zeta

from fraclap.core import FracOrder, SampledFunction, SpatialGrid
from fraclap.singular_integral import (
    QuadConfig,
    _dirichlet_beta,
    closed_form_constant,
    fraclap_integral,
    lattice_correction,
    normalization_constant,
)
from fraclap.spectral import fraclap_fourier

S = (0.25, 0.5, 0.75)


def gaussian_fraclap(x, s):
    # closed form of (-Delta)^s exp(-x^2/2) on the real line via Kummer's function
    return 2**s * math.gamma(s + 0.5) / math.sqrt(math.pi) * hyp1f1(s + 0.5, 0.5, -x * x / 2)


@pytest.mark.parametrize("n", [1, 2])
@pytest.mark.parametrize("s", S)
def test_calibrated_constant_matches_gamma_formula(n, s):
    assert normalization_constant(n, s) == pytest.approx(closed_form_constant(n, s), rel=1e-4)


def test_dirichlet_beta_known_values():
    assert _dirichlet_beta(1.0) == pytest.approx(math.pi / 4, rel=1e-13)
    assert _dirichlet_beta(2.0) == pytest.approx(0.915965594177219015, rel=1e-13)  # Catalan
    for s in (0.25, 0.5, 0.75):
        # beta(s) Gamma(s) = int_0^inf t^(s-1) / (2 cosh t) dt
        sech = lambda t: np.exp(-t) / (1 + np.exp(-2 * t))  # noqa: E731
        val = quad(sech, 0, 1, weight="alg", wvar=(s - 1, 0))[0] + quad(lambda t: t ** (s - 1) * sech(t), 1, 80)[0]
        assert _dirichlet_beta(s) == pytest.approx(val / math.gamma(s), rel=1e-10)


def test_lattice_correction_against_direct_sum():
    # for s > 1 the Epstein sum converges: sum' |m|^(-2s) = 4 zeta(s) beta(s)
    R = 400
    m = np.arange(-R, R + 1, dtype=float)
    r2 = m[:, None] ** 2 + m[None, :] ** 2
    inside = (r2 > 0) & (r2 <= R * R)
    direct = np.sum(r2[inside] ** -2.0) + np.pi / R**2
    assert 4 * lattice_correction(2.0) == pytest.approx(direct, rel=1e-5)
    assert lattice_correction(2.0) == pytest.approx(zeta(2.0) * 0.915965594177219015, rel=1e-13)


@pytest.mark.parametrize("s", S)
def test_line_gaussian(s):
    g = SpatialGrid.line(801, 12.0)
    f = SampledFunction.from_callable(g, lambda x: np.exp(-x * x / 2))
    ref = gaussian_fraclap(g.axis(), s)
    out = fraclap_integral(f, s).values
    assert np.max(np.abs(out - ref)) <= 1e-4 * np.max(np.abs(ref))


def test_line_power_tail_half_laplacian():
    # (-Delta)^(1/2) 1/(1+x^2) = (1-x^2)/(1+x^2)^2, the Neumann data of the harmonic extension
    g = SpatialGrid.line(801, 20.0)
    f = SampledFunction.from_callable(g, lambda x: 1 / (1 + x * x))
    x = g.axis()
    out = fraclap_integral(f, FracOrder(0.5), tail="power").values
    assert out == pytest.approx((1 - x * x) / (1 + x * x) ** 2, abs=1e-4)


def test_line_requires_decay_or_tail():
    g = SpatialGrid.line(101, 3.0)
    f = SampledFunction.from_callable(g, lambda x: 1 / (1 + x * x))
    with pytest.raises(ValueError):
        fraclap_integral(f, 0.5)


@pytest.mark.parametrize("s", S)
def test_torus_1d_matches_multiplier(s):
    g = SpatialGrid.torus(256)
    f = SampledFunction.from_callable(g, lambda x: np.exp(np.sin(x)))
    ref = fraclap_fourier(f, s).values
    assert np.max(np.abs(fraclap_integral(f, s).values - ref)) <= 1e-4 * np.max(np.abs(ref))


@pytest.mark.parametrize("s", S)
def test_torus_2d_matches_multiplier(s):
    g = SpatialGrid.torus(64, dim=2)
    f = SampledFunction.from_callable(g, lambda x, y: np.cos(x) * np.sin(2 * y) + np.cos(x + y))
    ref = fraclap_fourier(f, s).values
    assert np.max(np.abs(fraclap_integral(f, s).values - ref)) <= 1e-3 * np.max(np.abs(ref))


def test_two_dimensional_error_order():
    s = 0.5
    errs = []
    for n in (16, 32, 64):
        g = SpatialGrid.torus(n, dim=2)
        f = SampledFunction.from_callable(g, lambda x, y: np.cos(3 * x) * np.cos(2 * y))
        ref = fraclap_fourier(f, s).values
        errs.append(np.max(np.abs(fraclap_integral(f, s).values - ref)))
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(rates > 4 - 2 * s - 0.5)


def test_cutoff_sum_is_less_accurate():
    g = SpatialGrid.torus(128)
    f = SampledFunction.from_callable(g, np.cos)
    ref = fraclap_fourier(f, 0.5).values
    good = np.max(np.abs(fraclap_integral(f, 0.5).values - ref))
    crude = np.max(np.abs(fraclap_integral(f, 0.5, QuadConfig(delta=1.0, symmetrize=False)).values - ref))
    assert crude > 10 * good


torus = SpatialGrid.torus(64)
samples = st.integers(0, 2**31 - 1).map(lambda seed: np.random.default_rng(seed).normal(size=64))


@settings(max_examples=20, deadline=None)
@given(samples, samples, st.floats(-3, 3), st.sampled_from(S))
def test_linearity(u, v, c, s):
    f, g = SampledFunction(torus, u), SampledFunction(torus, v)
    lhs = fraclap_integral(f * c + g, s).values
    rhs = c * fraclap_integral(f, s).values + fraclap_integral(g, s).values
    assert lhs == pytest.approx(rhs, abs=1e-9)


@settings(max_examples=20, deadline=None)
@given(samples, st.integers(0, 63), st.sampled_from(S))
def test_translation_equivariance(u, k, s):
    f = SampledFunction(torus, u)
    shifted = fraclap_integral(SampledFunction(torus, np.roll(u, k)), s).values
    assert shifted == pytest.approx(np.roll(fraclap_integral(f, s).values, k), abs=1e-9)


@settings(max_examples=20, deadline=None)
@given(samples, st.floats(-10, 10), st.sampled_from(S))
def test_constants_annihilated(u, c, s):
    a = fraclap_integral(SampledFunction(torus, u + c), s).values
    assert a == pytest.approx(fraclap_integral(SampledFunction(torus, u), s).values, abs=1e-9)


@settings(max_examples=20, deadline=None)
@given(samples, samples, st.sampled_from(S))
def test_self_adjoint(u, v, s):
    lhs = fraclap_integral(SampledFunction(torus, u), s).values @ v
    rhs = u @ fraclap_integral(SampledFunction(torus, v), s).values
    assert lhs == pytest.approx(rhs, rel=1e-9, abs=1e-9)
