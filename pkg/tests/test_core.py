import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fraclap.core import (
    DomainError,
    FracOrder,
    HalfPlaneField,
    SampledFunction,
    SpatialGrid,
    VerticalGrid,
    format_float,
    y_to_z,
    z_to_y,
)

orders = st.floats(0.02, 0.98)


@given(orders)
def test_order_relations(s):
    o = FracOrder(s)
    assert o.a == pytest.approx(1 - 2 * s)
    assert o.alpha == pytest.approx(-2 * o.a / (1 - o.a))
    assert o.symbol_exponent == pytest.approx(2 / (2 - o.alpha))
    assert FracOrder.from_a(o.a).s == pytest.approx(s, abs=1e-12)
    assert FracOrder.from_alpha(o.alpha).s == pytest.approx(s, abs=1e-12)


@pytest.mark.parametrize("bad", [0.0, 1.0, -0.1, 1.5])
def test_order_domain(bad):
    with pytest.raises(DomainError):
        FracOrder(bad)


@settings(max_examples=50)
@given(orders, st.floats(0.0, 50.0))
def test_y_z_bijection(s, y):
    o = FracOrder(s)
    z = y_to_z(y, o)
    assert z_to_y(z, o) == pytest.approx(y, rel=1e-12, abs=1e-12)


@settings(max_examples=30)
@given(orders, st.floats(0.1, 5.0))
def test_weighted_derivative_relation(s, y):
    # y^a u_y = (1-a)^a u_z for u = z, i.e. y^a dz/dy = (1-a)^a
    o = FracOrder(s)
    d = 1e-6 * y
    dzdy = (y_to_z(y + d, o) - y_to_z(y - d, o)) / (2 * d)
    assert y**o.a * dzdy == pytest.approx((1 - o.a) ** o.a, rel=1e-7)


def test_negative_height_rejected():
    with pytest.raises(DomainError):
        y_to_z(-1.0, FracOrder(0.3))


def test_grids():
    g = SpatialGrid.torus(16)
    assert g.h == pytest.approx(2 * np.pi / 16)
    assert g.refine().axis()[::2] == pytest.approx(g.axis())
    line = SpatialGrid.line(11, 2.0)
    assert line.axis()[[0, -1]] == pytest.approx([-2, 2])
    assert line.refine().axis()[::2] == pytest.approx(line.axis())
    g2 = SpatialGrid.torus(8, dim=2)
    assert g2.shape == (8, 8)
    with pytest.raises(ValueError):
        line.wavenumbers()


def test_vertical_grids():
    v = VerticalGrid.graded(10.0, 40, 1.15)
    assert v.nodes[0] == 0 and v.height == pytest.approx(10.0)
    assert np.all(np.diff(v.nodes) > 0)
    steps = np.diff(v.nodes)
    assert steps[1] / steps[0] == pytest.approx(1.15)
    r = v.refine()
    assert r.size == 2 * v.size - 1 and np.array_equal(r.nodes[::2], v.nodes)
    o = FracOrder(0.3)
    back = v.converted("z", o).converted("y", o)
    assert back.nodes == pytest.approx(v.nodes, rel=1e-12)
    with pytest.raises(ValueError):
        VerticalGrid("y", np.linspace(1, 2, 20))


def test_format_float_round_trips():
    for v in (0.1, 1 / 3, 2.0**-1074, 1e300, -0.0):
        assert float(format_float(v)) == v


@pytest.mark.parametrize("dim", [1, 2])
def test_sampled_csv_round_trip(tmp_path, dim):
    g = SpatialGrid.torus(8, dim=dim)
    rng = np.random.default_rng(0)
    f = SampledFunction(g, rng.normal(size=g.shape))
    f.to_csv(tmp_path / "f.csv")
    back = SampledFunction.from_csv(tmp_path / "f.csv")
    assert back.grid == g and np.array_equal(back.values, f.values)
    f.to_csv(tmp_path / "f2.csv")
    assert (tmp_path / "f.csv").read_bytes() == (tmp_path / "f2.csv").read_bytes()


def test_field_csv_round_trip(tmp_path):
    g = SpatialGrid.torus(8)
    v = VerticalGrid.graded(3.0, 20)
    vals = np.random.default_rng(1).normal(size=(8, 20))
    u = HalfPlaneField(g, v, vals, FracOrder(0.4))
    u.to_csv(tmp_path / "u.csv")
    back = HalfPlaneField.from_csv(tmp_path / "u.csv")
    assert np.array_equal(back.values, u.values)
    assert np.array_equal(back.vgrid.nodes, v.nodes) and back.order == u.order
    assert np.array_equal(back.trace.values, vals[:, 0])


def test_sampled_values_are_frozen():
    f = SampledFunction.from_callable(SpatialGrid.torus(8), np.sin)
    with pytest.raises(ValueError):
        f.values[0] = 1.0
    with pytest.raises(ValueError):
        SampledFunction(f.grid, np.full(8, np.nan))
