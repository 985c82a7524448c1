import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fraclap.core import SampledFunction, SpatialGrid
from fraclap.spectral import discrete_laplacian, fraclap_fourier, multiplier, spectral_energy

grid = SpatialGrid.torus(64)
grid2 = SpatialGrid.torus(16, dim=2)
arrays = st.integers(0, 2**31 - 1).map(lambda seed: np.random.default_rng(seed).normal(size=64))


@pytest.mark.parametrize("k", [1, 3, 7])
@pytest.mark.parametrize("s", [0.2, 0.5, 0.9])
def test_eigenfunctions(k, s):
    f = SampledFunction.from_callable(grid, lambda x: np.cos(k * x) + np.sin(k * x))
    assert fraclap_fourier(f, s).values == pytest.approx(k ** (2 * s) * f.values, abs=1e-12 * k**2)


def test_two_dimensional_eigenfunction():
    f = SampledFunction.from_callable(grid2, lambda x, y: np.cos(x) * np.cos(2 * y))
    assert fraclap_fourier(f, 0.3).values == pytest.approx(5**0.3 * f.values, abs=1e-12)


def test_s_one_is_minus_laplacian():
    f = SampledFunction(grid, np.random.default_rng(2).normal(size=64))
    assert fraclap_fourier(f, 1.0).values == pytest.approx(-discrete_laplacian(f).values, abs=1e-10)


@settings(max_examples=25)
@given(arrays, arrays, st.floats(0.05, 0.95))
def test_self_adjoint_and_positive(u, v, s):
    f, g = SampledFunction(grid, u), SampledFunction(grid, v)
    lhs = fraclap_fourier(f, s).values @ v
    rhs = u @ fraclap_fourier(g, s).values
    assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-10)
    assert fraclap_fourier(f, s).values @ u >= -1e-10


@settings(max_examples=25)
@given(arrays, st.floats(0.05, 0.45), st.floats(0.05, 0.45))
def test_composition(u, s, t):
    f = SampledFunction(grid, u)
    twice = fraclap_fourier(fraclap_fourier(f, s), t).values
    assert twice == pytest.approx(fraclap_fourier(f, s + t).values, abs=1e-10)


@settings(max_examples=25)
@given(arrays, st.floats(-5, 5), st.floats(0.05, 0.95))
def test_constants_annihilated(u, c, s):
    f = SampledFunction(grid, u)
    g = SampledFunction(grid, u + c)
    assert fraclap_fourier(g, s).values == pytest.approx(fraclap_fourier(f, s).values, abs=1e-10)


@pytest.mark.parametrize("s", [0.25, 0.75])
def test_energy_of_cosine(s):
    # int_0^{2 pi} |(-Delta)^{s/2} cos kx|^2 dx = pi k^(2s)
    k = 3
    f = SampledFunction.from_callable(grid, lambda x: np.cos(k * x))
    assert spectral_energy(f, s) == pytest.approx(np.pi * k ** (2 * s), rel=1e-12)


def test_multiplier_zero_mode_and_line_rejected():
    assert multiplier(grid, 0.5)[0] == 0.0
    line = SampledFunction(SpatialGrid.line(9, 1.0), np.zeros(9))
    with pytest.raises(ValueError):
        fraclap_fourier(line, 0.5)
