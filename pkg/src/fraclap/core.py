"""Shared domain types: fractional orders, grids and sampled fields."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.optimize import brentq

Array = np.ndarray


class DomainError(ValueError):
    """Argument outside the domain where an operation is defined."""


@dataclass(frozen=True)
class FracOrder:
    """Order bookkeeping for ``(-Delta)^s``.

    ``a = 1 - 2s`` is the exponent of the weight ``y^a`` in the divergence-form
    extension and ``alpha = -2a / (1 - a)`` the exponent of ``z^alpha`` in the
    nondivergence form.
    """

    s: float
    a: float = field(init=False)
    alpha: float = field(init=False)

    def __post_init__(self) -> None:
        s = float(self.s)
        if not 0.0 < s < 1.0:
            raise DomainError(f"s must lie in (0, 1), got {s}")
        a = 1.0 - 2.0 * s
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "alpha", -2.0 * a / (1.0 - a))

    @classmethod
    def from_a(cls, a: float) -> FracOrder:
        if not -1.0 < a < 1.0:
            raise DomainError(f"a must lie in (-1, 1), got {a}")
        return cls((1.0 - a) / 2.0)

    @classmethod
    def from_alpha(cls, alpha: float) -> FracOrder:
        if not alpha < 1.0:
            raise DomainError(f"alpha must be < 1, got {alpha}")
        # alpha = -2a/(1-a)  <=>  a = alpha / (alpha - 2)
        return cls.from_a(alpha / (alpha - 2.0))

    @property
    def symbol_exponent(self) -> float:
        """Exponent ``2/(2 - alpha) = 1 - a = 2s`` of the Dirichlet-to-Neumann symbol."""
        return 1.0 - self.a

    def y_to_z(self, y):
        return y_to_z(y, self)

    def z_to_y(self, z):
        return z_to_y(z, self)

    def to_dict(self) -> dict:
        return {"s": self.s, "a": self.a, "alpha": self.alpha}


def _check_nonneg(v, name: str) -> None:
    if np.any(np.asarray(v) < 0):
        raise DomainError(f"{name} must be nonnegative")


def y_to_z(y, order: FracOrder):
    """Map the divergence-form height ``y`` to ``z = (y / (1-a))^(1-a)``."""
    _check_nonneg(y, "y")
    b = 1.0 - order.a
    return (np.asarray(y, dtype=float) / b) ** b if np.ndim(y) else (float(y) / b) ** b


def z_to_y(z, order: FracOrder):
    """Inverse of :func:`y_to_z`: ``y = (1-a) z^(1/(1-a))``."""
    _check_nonneg(z, "z")
    b = 1.0 - order.a
    return b * np.asarray(z, dtype=float) ** (1.0 / b) if np.ndim(z) else b * float(z) ** (1.0 / b)


# {{{ spatial grids


@dataclass(frozen=True)
class SpatialGrid:
    """Uniform grid in one or two space dimensions.

    ``mode="torus"``: ``n`` samples per axis of the periodic box ``[0, length)``.
    ``mode="line"``: ``n`` samples per axis of ``[-length, length]`` (endpoints included).
    """

    dim: int
    mode: str
    n: int
    length: float

    def __post_init__(self) -> None:
        if self.dim not in (1, 2):
            raise ValueError(f"dim must be 1 or 2, got {self.dim}")
        if self.mode not in ("torus", "line"):
            raise ValueError(f"unknown grid mode {self.mode!r}")
        if self.n < 8:
            raise ValueError(f"need at least 8 samples per axis, got {self.n}")
        if not self.length > 0:
            raise ValueError("length must be positive")

    @classmethod
    def torus(cls, n: int, period: float = 2 * np.pi, dim: int = 1) -> SpatialGrid:
        return cls(dim, "torus", int(n), float(period))

    @classmethod
    def line(cls, n: int, half_width: float, dim: int = 1) -> SpatialGrid:
        return cls(dim, "line", int(n), float(half_width))

    @property
    def periodic(self) -> bool:
        return self.mode == "torus"

    @property
    def h(self) -> float:
        if self.periodic:
            return self.length / self.n
        return 2.0 * self.length / (self.n - 1)

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.dim

    def axis(self) -> Array:
        if self.periodic:
            return self.h * np.arange(self.n)
        return np.linspace(-self.length, self.length, self.n)

    def coords(self) -> tuple[Array, ...]:
        """Coordinate arrays of shape :attr:`shape` (``ij`` indexing)."""
        ax = self.axis()
        if self.dim == 1:
            return (ax,)
        return tuple(np.meshgrid(ax, ax, indexing="ij"))

    def wavenumbers(self) -> Array:
        """Angular wavenumbers ``2 pi k / L`` in FFT order (torus only)."""
        if not self.periodic:
            raise ValueError("wavenumbers are defined on the torus only")
        return 2.0 * np.pi * np.fft.fftfreq(self.n, d=self.h)

    def refine(self) -> SpatialGrid:
        """Halve the spacing; nodes of ``self`` are nodes of the result."""
        n = 2 * self.n if self.periodic else 2 * self.n - 1
        return SpatialGrid(self.dim, self.mode, n, self.length)

    def to_dict(self) -> dict:
        return {"dim": self.dim, "mode": self.mode, "n": self.n, "length": self.length}


@dataclass(frozen=True, eq=False)
class SampledFunction:
    """Values of a function on a :class:`SpatialGrid`."""

    grid: SpatialGrid
    values: Array

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=float)
        if v.shape != self.grid.shape:
            raise ValueError(f"expected values of shape {self.grid.shape}, got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("sampled values must be finite")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @classmethod
    def from_callable(cls, grid: SpatialGrid, fn: Callable[..., Array]) -> SampledFunction:
        return cls(grid, np.broadcast_to(fn(*grid.coords()), grid.shape).astype(float))

    def with_values(self, values: Array) -> SampledFunction:
        return SampledFunction(self.grid, values)

    def __add__(self, other: SampledFunction) -> SampledFunction:
        return self.with_values(self.values + other.values)

    def __mul__(self, c: float) -> SampledFunction:
        return self.with_values(c * self.values)

    __rmul__ = __mul__

    def to_csv(self, path, grid_path=None) -> None:
        """Write ``x[,y],value`` rows; grid metadata goes to a JSON sidecar."""
        path = Path(path)
        cols = [c.ravel() for c in self.grid.coords()]
        header = ["x", "y"][: self.grid.dim] + ["value"]
        _write_csv(path, header, [*cols, self.values.ravel()])
        sidecar = Path(grid_path) if grid_path else path.with_suffix(".json")
        sidecar.write_text(json.dumps({"grid": self.grid.to_dict()}, indent=2, sort_keys=True) + "\n")

    @classmethod
    def from_csv(cls, path, grid: SpatialGrid | None = None) -> SampledFunction:
        path = Path(path)
        if grid is None:
            sidecar = path.with_suffix(".json")
            if not sidecar.exists():
                raise FileNotFoundError(f"no grid given and no sidecar {sidecar}")
            grid = SpatialGrid(**json.loads(sidecar.read_text())["grid"])
        rows = _read_csv(path)
        values = rows["value"]
        if values.size != np.prod(grid.shape):
            raise ValueError(f"{path}: {values.size} rows for grid of shape {grid.shape}")
        return cls(grid, values.reshape(grid.shape))


# }}}

# {{{ vertical grids and half-plane fields


@dataclass(frozen=True, eq=False)
class VerticalGrid:
    """Nodes ``0 = v_0 < v_1 < ...`` on the vertical half-axis.

    ``coordinate`` is ``"y"`` (divergence form) or ``"z"`` (nondivergence form);
    ``grading`` records the ratio between consecutive spacings near the origin
    (1 for uniform grids).
    """

    coordinate: str
    nodes: Array
    grading: float = 1.0

    def __post_init__(self) -> None:
        if self.coordinate not in ("y", "z"):
            raise ValueError(f"coordinate must be 'y' or 'z', got {self.coordinate!r}")
        v = np.asarray(self.nodes, dtype=float)
        if v.ndim != 1 or v.size < 16:
            raise ValueError("a vertical grid needs at least 16 nodes")
        if v[0] != 0.0 or np.any(np.diff(v) <= 0):
            raise ValueError("vertical nodes must start at 0 and increase strictly")
        v.flags.writeable = False
        object.__setattr__(self, "nodes", v)

    @classmethod
    def uniform(cls, height: float, n: int, coordinate: str = "y") -> VerticalGrid:
        return cls(coordinate, np.linspace(0.0, height, n), 1.0)

    @classmethod
    def graded(cls, height: float, n: int, ratio: float = 1.15,
               max_step: float | None = None, coordinate: str = "y") -> VerticalGrid:
        """Geometric spacing ``h0 * ratio^k`` capped at ``max_step``.

        ``h0`` is chosen so that ``n`` nodes exactly reach ``height``. The cap
        defaults to twice the uniform spacing ``height / (n - 1)``.
        """
        if ratio < 1.0:
            raise ValueError("grading ratio must be >= 1")
        m = n - 1
        cap = 2.0 * height / m if max_step is None else float(max_step)
        if cap * m < height:
            raise ValueError("max_step too small to reach the requested height")
        k = np.arange(m)

        def total(log_h0: float) -> float:
            return np.minimum(np.exp(log_h0) * ratio**k, cap).sum() - height

        log_h0 = brentq(total, np.log(cap) - 800.0, np.log(cap), xtol=1e-14)
        steps = np.minimum(np.exp(log_h0) * ratio**k, cap)
        nodes = np.concatenate([[0.0], np.cumsum(steps)])
        nodes[-1] = height
        return cls(coordinate, nodes, float(ratio))

    @property
    def height(self) -> float:
        return float(self.nodes[-1])

    @property
    def size(self) -> int:
        return self.nodes.size

    def refine(self) -> VerticalGrid:
        """Insert the midpoint of every cell."""
        v = self.nodes
        out = np.empty(2 * v.size - 1)
        out[::2] = v
        out[1::2] = 0.5 * (v[1:] + v[:-1])
        return VerticalGrid(self.coordinate, out, float(np.sqrt(self.grading)))

    def y_nodes(self, order: FracOrder) -> Array:
        return self.nodes if self.coordinate == "y" else z_to_y(self.nodes, order)

    def z_nodes(self, order: FracOrder) -> Array:
        return self.nodes if self.coordinate == "z" else y_to_z(self.nodes, order)

    def converted(self, coordinate: str, order: FracOrder) -> VerticalGrid:
        if coordinate == self.coordinate:
            return self
        nodes = self.y_nodes(order) if coordinate == "y" else self.z_nodes(order)
        nodes = np.asarray(nodes).copy()
        nodes[0] = 0.0
        return VerticalGrid(coordinate, nodes, self.grading)

    def to_dict(self) -> dict:
        return {"coordinate": self.coordinate, "grading": self.grading,
                "nodes": [float(v) for v in self.nodes]}


@dataclass(frozen=True, eq=False)
class HalfPlaneField:
    """Extension values on ``xgrid x vgrid``; ``values[..., j]`` is level ``j``."""

    xgrid: SpatialGrid
    vgrid: VerticalGrid
    values: Array
    order: FracOrder

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=float)
        expected = (*self.xgrid.shape, self.vgrid.size)
        if v.shape != expected:
            raise ValueError(f"expected field of shape {expected}, got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("field values must be finite")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def trace(self) -> SampledFunction:
        return SampledFunction(self.xgrid, self.values[..., 0])

    def y_nodes(self) -> Array:
        return self.vgrid.y_nodes(self.order)

    def with_values(self, values: Array) -> HalfPlaneField:
        return HalfPlaneField(self.xgrid, self.vgrid, values, self.order)

    def to_csv(self, path) -> None:
        """Write ``x[,y],v,value`` rows plus a JSON sidecar with grids and order."""
        path = Path(path)
        xs = [np.broadcast_to(c[..., None], self.values.shape).ravel()
              for c in self.xgrid.coords()]
        vs = np.broadcast_to(self.vgrid.nodes, self.values.shape).ravel()
        header = ["x", "y"][: self.xgrid.dim] + ["v", "value"]
        _write_csv(path, header, [*xs, vs, self.values.ravel()])
        meta = {"xgrid": self.xgrid.to_dict(), "vgrid": self.vgrid.to_dict(),
                "order": self.order.to_dict()}
        path.with_suffix(".json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")

    @classmethod
    def from_csv(cls, path) -> HalfPlaneField:
        path = Path(path)
        meta = json.loads(path.with_suffix(".json").read_text())
        xgrid = SpatialGrid(**meta["xgrid"])
        vg = meta["vgrid"]
        vgrid = VerticalGrid(vg["coordinate"], np.array(vg["nodes"]), vg["grading"])
        order = FracOrder(meta["order"]["s"])
        values = _read_csv(path)["value"]
        return cls(xgrid, vgrid, values.reshape(*xgrid.shape, vgrid.size), order)


# }}}

# {{{ csv helpers


def format_float(v: float) -> str:
    """Shortest decimal string that round-trips to the same double."""
    return repr(float(v))


def _write_csv(path: Path, header: list[str], columns: list[Array]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in zip(*columns):
            w.writerow([format_float(v) for v in row])


def _read_csv(path) -> dict[str, Array]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        data = np.array([[float(v) for v in row] for row in reader if row], dtype=float)
    if data.size == 0:
        data = data.reshape(0, len(header))
    return {name: data[:, i] for i, name in enumerate(header)}


def write_table(path, header: list[str], columns: list[Array]) -> None:
    _write_csv(Path(path), header, [np.asarray(c, dtype=float) for c in columns])


def read_table(path) -> dict[str, Array]:
    return _read_csv(path)


# }}}
