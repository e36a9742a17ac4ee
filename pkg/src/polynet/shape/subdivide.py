"""Triangle subdivision schemes and the pooling maps they induce.

Two schemes are provided. Primal triangle quadrisection (PTQ) inserts a
midpoint on every edge and splits each face into four, so V' = V + E and
F' = 4F. The sqrt(3) scheme inserts one barycenter per face, connects it
to the face's corners, and flips every interior original edge, so
V' = V + F and F' = 3F. Both keep the original vertices first (indices
0..V-1) and leave their positions untouched; surface fitting happens
elsewhere.

A :class:`PoolMap` records, for each coarse vertex, the set of fine
vertices that collapse onto it under the inverse of one subdivision step:
the vertex itself plus the new vertices adjacent to it. Under PTQ each
edge midpoint appears in exactly two patches (its edge's endpoints); under
sqrt(3) each barycenter appears in exactly three (its face's corners).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import PolyNetError
from ..mesh import TriMesh

SCHEMES = ("ptq", "sqrt3")


@dataclass(frozen=True)
class PoolMap:
    """Coarse-vertex patches over a finer level, in CSR form.

    ``indices[offsets[v]:offsets[v + 1]]`` lists the fine vertices pooled
    into coarse vertex ``v``, in ascending order. Every patch is nonempty
    and every fine vertex appears in at least one patch.
    """

    offsets: np.ndarray
    indices: np.ndarray
    n_fine: int

    def __post_init__(self):
        offsets = np.ascontiguousarray(self.offsets, dtype=np.int64)
        indices = np.ascontiguousarray(self.indices, dtype=np.int64)
        if len(offsets) < 1 or offsets[0] != 0 or (np.diff(offsets) < 1).any():
            raise PolyNetError("pool map patches must be nonempty")
        if len(indices) != offsets[-1]:
            raise PolyNetError("pool map offsets do not match indices")
        if len(indices) and (indices.min() < 0 or indices.max() >= self.n_fine):
            raise PolyNetError("pool map index out of range")
        offsets.flags.writeable = False
        indices.flags.writeable = False
        object.__setattr__(self, "offsets", offsets)
        object.__setattr__(self, "indices", indices)

    @property
    def n_coarse(self) -> int:
        return len(self.offsets) - 1

    def patch(self, v: int) -> np.ndarray:
        return self.indices[self.offsets[v] : self.offsets[v + 1]]

    def to_lists(self) -> list[list[int]]:
        return [self.patch(v).tolist() for v in range(self.n_coarse)]

    @classmethod
    def from_lists(cls, patches: list[list[int]], n_fine: int) -> "PoolMap":
        offsets = np.zeros(len(patches) + 1, dtype=np.int64)
        np.cumsum([len(p) for p in patches], out=offsets[1:])
        if offsets[-1]:
            indices = np.concatenate([np.asarray(p, dtype=np.int64) for p in patches])
        else:
            indices = np.empty(0, dtype=np.int64)
        return cls(offsets, indices, n_fine)


def _pool_map_from_pairs(
    coarse: np.ndarray, fine: np.ndarray, n_coarse: int, n_fine: int
) -> PoolMap:
    """Build a PoolMap from (coarse vertex, new fine vertex) incidences,
    prepending each coarse vertex's own fine image (same index)."""
    order = np.lexsort((fine, coarse))
    coarse, fine = coarse[order], fine[order]
    counts = np.bincount(coarse, minlength=n_coarse)
    offsets = np.zeros(n_coarse + 1, dtype=np.int64)
    np.cumsum(counts + 1, out=offsets[1:])
    indices = np.empty(int(offsets[-1]), dtype=np.int64)
    indices[offsets[:-1]] = np.arange(n_coarse)
    rest = np.ones(len(indices), dtype=bool)
    rest[offsets[:-1]] = False
    indices[rest] = fine
    return PoolMap(offsets, indices, n_fine)


def subdivide_ptq(mesh: TriMesh) -> tuple[TriMesh, PoolMap]:
    """One primal-triangle-quadrisection step.

    Midpoint vertices are appended after the originals, ordered by their
    edge's (min, max) endpoint pair; each face (a, b, c) becomes the four
    faces (a, m_ab, m_ca), (b, m_bc, m_ab), (c, m_ca, m_bc),
    (m_ab, m_bc, m_ca), emitted in parent-face order.
    """
    nv = mesh.n_vertices
    edges = mesh.edges()  # lexicographically sorted -> midpoint rank
    mid_pos = 0.5 * (mesh.vertices[edges[:, 0]] + mesh.vertices[edges[:, 1]])
    verts = np.vstack([mesh.vertices, mid_pos])

    edge_keys = edges[:, 0] * np.int64(nv) + edges[:, 1]

    def mid_of(u: np.ndarray, v: np.ndarray) -> np.ndarray:
        lo = np.minimum(u, v)
        hi = np.maximum(u, v)
        rank = np.searchsorted(edge_keys, lo * np.int64(nv) + hi)
        return nv + rank

    a, b, c = mesh.faces[:, 0], mesh.faces[:, 1], mesh.faces[:, 2]
    mab, mbc, mca = mid_of(a, b), mid_of(b, c), mid_of(c, a)
    faces = np.empty((4 * mesh.n_faces, 3), dtype=np.int64)
    faces[0::4] = np.column_stack([a, mab, mca])
    faces[1::4] = np.column_stack([b, mbc, mab])
    faces[2::4] = np.column_stack([c, mca, mbc])
    faces[3::4] = np.column_stack([mab, mbc, mca])

    coarse = np.concatenate([edges[:, 0], edges[:, 1]])
    fine = np.concatenate([nv + np.arange(len(edges))] * 2)
    pool = _pool_map_from_pairs(coarse, fine, nv, len(verts))
    return TriMesh(verts, faces), pool


def subdivide_sqrt3(mesh: TriMesh) -> tuple[TriMesh, PoolMap]:
    """One sqrt(3) subdivision step.

    A barycenter is appended per face (in face order). Interior original
    edges are flipped: the two barycenters on either side become connected
    and the original edge disappears. Boundary edges are kept unflipped.

    Raises
    ------
    PolyNetError
        If the mesh has inconsistently oriented or non-manifold directed
        edges (each directed edge must appear in at most one face).
    """
    nv, nf = mesh.n_vertices, mesh.n_faces
    bary = mesh.vertices[mesh.faces].mean(axis=1)
    verts = np.vstack([mesh.vertices, bary])

    halfedge: dict[tuple[int, int], int] = {}
    for f, (a, b, c) in enumerate(mesh.faces):
        for u, v in ((int(a), int(b)), (int(b), int(c)), (int(c), int(a))):
            if (u, v) in halfedge:
                raise PolyNetError(
                    "sqrt3 subdivision needs consistently oriented manifold input"
                )
            halfedge[(u, v)] = f

    faces: list[tuple[int, int, int]] = []
    for f, (fa, fb, fc) in enumerate(mesh.faces):
        zf = nv + f
        for u, v in ((int(fa), int(fb)), (int(fb), int(fc)), (int(fc), int(fa))):
            g = halfedge.get((v, u))
            if g is None:
                faces.append((u, v, zf))  # boundary edge: no flip possible
            elif f < g:
                zg = nv + g
                faces.append((u, zg, zf))
                faces.append((v, zf, zg))

    coarse = mesh.faces.reshape(-1)
    fine = np.repeat(nv + np.arange(nf), 3)
    pool = _pool_map_from_pairs(coarse, fine, nv, len(verts))
    return TriMesh(verts, np.array(faces, dtype=np.int64)), pool


def subdivide(mesh: TriMesh, scheme: str) -> tuple[TriMesh, PoolMap]:
    """Dispatch to :func:`subdivide_ptq` or :func:`subdivide_sqrt3`."""
    if scheme == "ptq":
        return subdivide_ptq(mesh)
    if scheme == "sqrt3":
        return subdivide_sqrt3(mesh)
    raise PolyNetError(f"unknown subdivision scheme {scheme!r}")
