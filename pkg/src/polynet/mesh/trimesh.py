"""Indexed triangle meshes and per-vertex geometric queries.

The :class:`TriMesh` container is deliberately small: positions plus faces,
validated on construction and treated as immutable everywhere. Operations
that produce a new mesh (cleaning, normalisation, subdivision, ...) return a
new instance instead of mutating.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import PolyNetError


@dataclass(frozen=True)
class TriMesh:
    """Indexed triangle mesh with counter-clockwise oriented faces.

    Parameters
    ----------
    vertices : ndarray of shape (V, 3), float64
        Vertex positions.
    faces : ndarray of shape (F, 3), int64
        Vertex index triples. Every index must reference an existing vertex
        and no face may repeat an index.
    normals : ndarray of shape (V, 3), float64, optional
        Unit vertex normals. Not validated beyond shape; most callers
        compute normals on demand via :func:`vertex_normals`.

    Raises
    ------
    PolyNetError
        If array shapes are wrong, a face index is out of range, or a face
        repeats a vertex index.
    """

    vertices: np.ndarray
    faces: np.ndarray
    normals: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        verts = np.ascontiguousarray(self.vertices, dtype=np.float64)
        faces = np.ascontiguousarray(self.faces, dtype=np.int64)
        if verts.ndim != 2 or verts.shape[1] != 3:
            raise PolyNetError(f"vertices must be (V, 3), got {verts.shape}")
        if faces.ndim != 2 or faces.shape[1] != 3:
            raise PolyNetError(f"faces must be (F, 3), got {faces.shape}")
        if faces.size:
            if faces.min() < 0 or faces.max() >= len(verts):
                raise PolyNetError("face index out of range")
            repeated = (
                (faces[:, 0] == faces[:, 1])
                | (faces[:, 1] == faces[:, 2])
                | (faces[:, 2] == faces[:, 0])
            )
            if repeated.any():
                bad = int(np.flatnonzero(repeated)[0])
                raise PolyNetError(f"face {bad} repeats a vertex index")
        verts.flags.writeable = False
        faces.flags.writeable = False
        object.__setattr__(self, "vertices", verts)
        object.__setattr__(self, "faces", faces)
        if self.normals is not None:
            normals = np.ascontiguousarray(self.normals, dtype=np.float64)
            if normals.shape != verts.shape:
                raise PolyNetError(
                    f"normals must match vertices shape, got {normals.shape}"
                )
            normals.flags.writeable = False
            object.__setattr__(self, "normals", normals)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    def edges(self) -> np.ndarray:
        """Unique undirected edges as an (E, 2) array with min index first.

        Rows are sorted lexicographically, so the ordering is a deterministic
        function of the connectivity alone.
        """
        if not len(self.faces):
            return np.empty((0, 2), dtype=np.int64)
        pairs = np.concatenate(
            [self.faces[:, [0, 1]], self.faces[:, [1, 2]], self.faces[:, [2, 0]]]
        )
        pairs.sort(axis=1)
        return np.unique(pairs, axis=0)

    def euler_characteristic(self) -> int:
        """V - E + F (2 for a closed genus-0 surface, 0 for a torus)."""
        return self.n_vertices - len(self.edges()) + self.n_faces

    def bbox(self) -> tuple[np.ndarray, np.ndarray]:
        """Axis-aligned bounding box as (min, max) corners."""
        if not self.n_vertices:
            z = np.zeros(3)
            return z, z.copy()
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def bbox_diagonal(self) -> float:
        lo, hi = self.bbox()
        return float(np.linalg.norm(hi - lo))

    def face_cross(self) -> np.ndarray:
        """Per-face cross product (b - a) x (c - a); norm is twice the area."""
        a = self.vertices[self.faces[:, 0]]
        b = self.vertices[self.faces[:, 1]]
        c = self.vertices[self.faces[:, 2]]
        return np.cross(b - a, c - a)

    def face_areas(self) -> np.ndarray:
        return 0.5 * np.linalg.norm(self.face_cross(), axis=1)

    def face_normals(self) -> np.ndarray:
        """Unit face normals (zero vector for degenerate faces)."""
        cross = self.face_cross()
        norm = np.linalg.norm(cross, axis=1, keepdims=True)
        return np.divide(cross, norm, out=np.zeros_like(cross), where=norm > 0)

    def with_vertices(self, vertices: np.ndarray) -> "TriMesh":
        """Same connectivity, new positions (normals dropped)."""
        return TriMesh(vertices, self.faces)


@dataclass(frozen=True)
class VertexAdjacency:
    """One-ring vertex adjacency in CSR form.

    ``indices[offsets[v]:offsets[v + 1]]`` lists the neighbours of vertex
    ``v`` in ascending order. The structure is symmetric: ``u`` appears in
    ``v``'s list iff ``v`` appears in ``u``'s.

    The patch arrays used by the convolution kernels (each vertex's ring
    with the vertex itself prepended) are precomputed once at construction.
    """

    offsets: np.ndarray
    indices: np.ndarray
    patch_offsets: np.ndarray = field(init=False, repr=False, compare=False)
    patch_indices: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        offsets = np.ascontiguousarray(self.offsets, dtype=np.int64)
        indices = np.ascontiguousarray(self.indices, dtype=np.int64)
        offsets.flags.writeable = False
        indices.flags.writeable = False
        object.__setattr__(self, "offsets", offsets)
        object.__setattr__(self, "indices", indices)
        n = len(offsets) - 1
        sizes = np.diff(offsets) + 1  # ring plus the centre vertex
        poff = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(sizes, out=poff[1:])
        pidx = np.empty(int(poff[-1]), dtype=np.int64)
        pidx[poff[:-1]] = np.arange(n, dtype=np.int64)
        rest = np.ones(len(pidx), dtype=bool)
        rest[poff[:-1]] = False
        pidx[rest] = indices
        poff.flags.writeable = False
        pidx.flags.writeable = False
        object.__setattr__(self, "patch_offsets", poff)
        object.__setattr__(self, "patch_indices", pidx)

    @property
    def n_vertices(self) -> int:
        return len(self.offsets) - 1

    def degrees(self) -> np.ndarray:
        return np.diff(self.offsets)

    def neighbors(self, v: int) -> np.ndarray:
        return self.indices[self.offsets[v] : self.offsets[v + 1]]

    def __getitem__(self, v: int) -> np.ndarray:
        return self.neighbors(v)

    @classmethod
    def from_edges(cls, edges: np.ndarray, n_vertices: int) -> "VertexAdjacency":
        """Build from an (E, 2) array of unique undirected edges."""
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        src = np.concatenate([edges[:, 0], edges[:, 1]])
        dst = np.concatenate([edges[:, 1], edges[:, 0]])
        order = np.lexsort((dst, src))
        src, dst = src[order], dst[order]
        counts = np.bincount(src, minlength=n_vertices)
        offsets = np.zeros(n_vertices + 1, dtype=np.int64)
        np.cumsum(counts, out=offsets[1:])
        return cls(offsets, dst)


def adjacency(mesh: TriMesh) -> VertexAdjacency:
    """Symmetric one-ring adjacency of a mesh.

    Every face edge contributes both directions; duplicates collapse, so the
    result depends only on the undirected edge set.
    """
    return VertexAdjacency.from_edges(mesh.edges(), mesh.n_vertices)


def vertex_normals(mesh: TriMesh) -> np.ndarray:
    """Area-weighted vertex normals.

    Each incident face contributes its (unnormalised) cross product, which
    equals twice its area times its unit normal; the accumulated vector is
    then normalised. Faces with larger area therefore weigh more.

    Returns
    -------
    ndarray of shape (V, 3)
        Unit normals. Vertices with no incident face (or a degenerate
        accumulation, which cleaning rules out) get a zero vector.
    """
    acc = np.zeros_like(mesh.vertices)
    cross = mesh.face_cross()
    for k in range(3):
        np.add.at(acc, mesh.faces[:, k], cross)
    norm = np.linalg.norm(acc, axis=1, keepdims=True)
    return np.divide(acc, norm, out=np.zeros_like(acc), where=norm > 1e-300)


def normalize(mesh: TriMesh) -> TriMesh:
    """Translate and uniformly scale a mesh into the cube [-1, 1]^3.

    The bounding-box centre moves to the origin and the longest axis is
    scaled to span exactly [-1, 1]; aspect ratios are preserved. Positions
    are clipped by one ulp at most so that the output satisfies the feature
    range contract strictly.

    Raises
    ------
    PolyNetError
        If the mesh has zero extent (all vertices coincide).
    """
    lo, hi = mesh.bbox()
    extent = float((hi - lo).max())
    if not mesh.n_vertices or extent <= 0.0:
        raise PolyNetError("cannot normalize a zero-extent mesh")
    center = 0.5 * (lo + hi)
    scaled = (mesh.vertices - center) * (2.0 / extent)
    return TriMesh(np.clip(scaled, -1.0, 1.0), mesh.faces)
