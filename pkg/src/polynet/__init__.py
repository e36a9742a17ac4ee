"""polynet: polynomial-PDF graph convolutions on multi-resolution triangle meshes.

The package is organised around five layers:

- :mod:`polynet.mesh` -- triangle-mesh container, ASCII I/O, cleanup,
  normalisation, and an exact closest-point query (BVH).
- :mod:`polynet.shape` -- quadric-error decimation, PTQ and sqrt(3)
  subdivision, multi-resolution shape construction and (de)serialisation,
  and the inverse-subdivision max pooling operator.
- :mod:`polynet.polyconv` -- learned bivariate polynomial densities and the
  PolyConv neighbourhood operator (forward and analytic backward).
- :mod:`polynet.nn` -- a small float64 feed-forward stack (instance/batch
  norm, dense layers, Adam, checkpointing) built around PolyConv/PolyPool.
- :mod:`polynet.tasks` -- dataset ingestion, synthetic datasets, training,
  evaluation, retrieval, and report rendering.
"""

from .errors import (
    EmptyMeshError,
    MeshParseError,
    PolyNetError,
    ShapeMismatchError,
)

__version__ = "0.1.0"

__all__ = [
    "EmptyMeshError",
    "MeshParseError",
    "PolyNetError",
    "ShapeMismatchError",
    "__version__",
]
