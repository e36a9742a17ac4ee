"""Triangle-mesh container, I/O, cleanup, and geometric queries."""

from .bvh import BVH, closest_point, closest_point_on_triangles
from .clean import clean
from .io import load_mesh, save_mesh
from .trimesh import (
    TriMesh,
    VertexAdjacency,
    adjacency,
    normalize,
    vertex_normals,
)

__all__ = [
    "BVH",
    "TriMesh",
    "VertexAdjacency",
    "adjacency",
    "clean",
    "closest_point",
    "closest_point_on_triangles",
    "load_mesh",
    "normalize",
    "save_mesh",
    "vertex_normals",
]
