"""Multi-resolution shape construction: decimation, subdivision, pooling."""

from .decimate import DecimationResult, decimate
from .multires import (
    MultiResShape,
    build_polyshape,
    fit_to_reference,
    load_multires,
    poly_pool,
    poly_pool_backward,
    save_multires,
)
from .subdivide import (
    SCHEMES,
    PoolMap,
    subdivide,
    subdivide_ptq,
    subdivide_sqrt3,
)

__all__ = [
    "DecimationResult",
    "MultiResShape",
    "PoolMap",
    "SCHEMES",
    "build_polyshape",
    "decimate",
    "fit_to_reference",
    "load_multires",
    "poly_pool",
    "poly_pool_backward",
    "save_multires",
    "subdivide",
    "subdivide_ptq",
    "subdivide_sqrt3",
]
