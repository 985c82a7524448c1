"""Fractional Laplacian by quadrature, Fourier multipliers and the weighted extension."""

import os as _os

# FRACLAP_THREADS caps BLAS/OpenMP worker threads; it must be set before numpy loads
_threads = _os.environ.get("FRACLAP_THREADS")
if _threads:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        _os.environ[_var] = _threads

from .core import (  # noqa: E402
    DomainError,
    FracOrder,
    HalfPlaneField,
    SampledFunction,
    SpatialGrid,
    VerticalGrid,
    y_to_z,
    z_to_y,
)

__all__ = [
    "DomainError",
    "FracOrder",
    "HalfPlaneField",
    "SampledFunction",
    "SpatialGrid",
    "VerticalGrid",
    "y_to_z",
    "z_to_y",
]
__version__ = "0.1.0"
