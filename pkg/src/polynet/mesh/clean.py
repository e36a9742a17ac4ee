"""Mesh cleanup: welding, degenerate faces, manifold repair, components.

The pipeline runs in a fixed order so that reruns are reproducible:

1. weld vertices closer than ``weld_tol`` times the bounding-box diagonal
   (clusters collapse to their centroid, iterated to a fixed point),
2. drop faces that lost an index to welding or have (near-)zero area,
3. repair edge-manifoldness by greedily removing the smallest-area face
   incident to an over-shared edge (ties broken by lowest face index),
4. keep the largest connected component (by vertex count, ties broken by
   the lowest contained vertex index),
5. drop unreferenced vertices and reindex.

A mesh that survives is edge-manifold, connected, and free of degenerate
faces; a mesh that does not raises :class:`EmptyMeshError`.
"""

from __future__ import annotations

import numpy as np

from ..errors import EmptyMeshError
from .trimesh import TriMesh

_NEIGHBOR_OFFSETS = [
    (dx, dy, dz)
    for dx in (-1, 0, 1)
    for dy in (-1, 0, 1)
    for dz in (-1, 0, 1)
]


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, i: int) -> int:
        parent = self.parent
        root = i
        while parent[root] != root:
            root = parent[root]
        while parent[i] != root:
            parent[i], i = root, parent[i]
        return root

    def union(self, i: int, j: int) -> bool:
        ri, rj = self.find(i), self.find(j)
        if ri == rj:
            return False
        # attach the larger root id under the smaller one, so representatives
        # are the lowest original index in each cluster (deterministic)
        if rj < ri:
            ri, rj = rj, ri
        self.parent[rj] = ri
        return True


def _weld_groups(verts: np.ndarray, tol: float) -> np.ndarray | None:
    """Group labels for vertices within ``tol`` of each other, or None if
    no two vertices are that close. Labels are dense and ordered by first
    occurrence."""
    n = len(verts)
    cells = np.floor(verts / tol).astype(np.int64)
    buckets: dict[tuple[int, int, int], list[int]] = {}
    for i in range(n):
        buckets.setdefault(tuple(cells[i]), []).append(i)
    uf = _UnionFind(n)
    tol2 = tol * tol
    merged = False
    for i in range(n):
        cx, cy, cz = cells[i]
        vi = verts[i]
        for dx, dy, dz in _NEIGHBOR_OFFSETS:
            bucket = buckets.get((cx + dx, cy + dy, cz + dz))
            if not bucket:
                continue
            for j in bucket:
                if j <= i:
                    continue
                d = verts[j] - vi
                if d @ d <= tol2:
                    merged |= uf.union(i, j)
    if not merged:
        return None
    roots = np.fromiter((uf.find(i) for i in range(n)), dtype=np.int64, count=n)
    _, labels = np.unique(roots, return_inverse=True)
    first_seen = np.full(labels.max() + 1, n, dtype=np.int64)
    np.minimum.at(first_seen, labels, np.arange(n))
    order = np.argsort(first_seen, kind="stable")
    remap = np.empty_like(order)
    remap[order] = np.arange(len(order))
    return remap[labels]


def _edge_keys(faces: np.ndarray, n_verts: int) -> np.ndarray:
    """Encode the three undirected edges of each face as int64 keys.

    Returns an array of shape (3F,) laid out as [edge0 of every face,
    edge1 of every face, edge2 of every face].
    """
    pairs = np.concatenate(
        [faces[:, [0, 1]], faces[:, [1, 2]], faces[:, [2, 0]]]
    )
    lo = pairs.min(axis=1)
    hi = pairs.max(axis=1)
    return lo * np.int64(n_verts) + hi


def _face_areas(verts: np.ndarray, faces: np.ndarray) -> np.ndarray:
    a = verts[faces[:, 0]]
    cross = np.cross(verts[faces[:, 1]] - a, verts[faces[:, 2]] - a)
    return 0.5 * np.linalg.norm(cross, axis=1)


def clean(mesh: TriMesh, weld_tol: float = 1e-6) -> TriMesh:
    """Normalise a raw mesh into a clean, connected, edge-manifold one.

    Parameters
    ----------
    mesh : TriMesh
        Input mesh; any garbage short of invalid indices is tolerated.
    weld_tol : float
        Welding tolerance as a fraction of the bounding-box diagonal.
        Zero disables welding entirely.

    Returns
    -------
    TriMesh
        Cleaned mesh. A mesh that is already clean comes back identical
        (same positions, same face order).

    Raises
    ------
    EmptyMeshError
        If nothing usable remains ("empty after clean").
    """
    verts = np.array(mesh.vertices, dtype=np.float64)
    faces = np.array(mesh.faces, dtype=np.int64)
    diag = mesh.bbox_diagonal()
    if not len(verts) or not len(faces) or diag <= 0.0:
        raise EmptyMeshError("empty after clean")

    # -- weld near-coincident vertices (iterate: centroids can close new gaps)
    if weld_tol > 0.0:
        tol = weld_tol * diag
        mapping = np.arange(len(verts), dtype=np.int64)
        for _ in range(16):
            groups = _weld_groups(verts, tol)
            if groups is None:
                break
            n_groups = int(groups.max()) + 1
            counts = np.bincount(groups, minlength=n_groups).astype(np.float64)
            merged = np.zeros((n_groups, 3), dtype=np.float64)
            np.add.at(merged, groups, verts)
            verts = merged / counts[:, None]
            mapping = groups[mapping]
        faces = mapping[faces]

    # -- drop faces that collapsed to fewer than three distinct vertices
    distinct = (
        (faces[:, 0] != faces[:, 1])
        & (faces[:, 1] != faces[:, 2])
        & (faces[:, 2] != faces[:, 0])
    )
    faces = faces[distinct]

    # -- drop (near-)zero-area faces
    if len(faces):
        faces = faces[_face_areas(verts, faces) > 1e-12 * diag * diag]

    # -- greedy edge-manifold repair
    while len(faces):
        keys = _edge_keys(faces, len(verts))
        uniq, inverse, counts = np.unique(keys, return_inverse=True, return_counts=True)
        over = counts[inverse] > 2  # (3F,) one flag per face-edge slot
        bad_faces = np.unique(np.flatnonzero(over) % len(faces))
        if not len(bad_faces):
            break
        areas = _face_areas(verts, faces[bad_faces])
        worst = bad_faces[np.lexsort((bad_faces, areas))[0]]
        faces = np.delete(faces, worst, axis=0)

    if not len(faces):
        raise EmptyMeshError("empty after clean")

    # -- largest connected component over face edges
    uf = _UnionFind(len(verts))
    for col in ((0, 1), (1, 2)):
        for a, b in faces[:, col]:
            uf.union(int(a), int(b))
    referenced = np.unique(faces)
    roots = np.fromiter(
        (uf.find(int(v)) for v in referenced), dtype=np.int64, count=len(referenced)
    )
    uniq_roots, inv, counts = np.unique(roots, return_inverse=True, return_counts=True)
    # ties broken by the lowest vertex index in the component: uniq_roots is
    # ascending and the union-find representative is the minimum member, so
    # a stable sort on descending count picks exactly that component.
    best_root = uniq_roots[np.argsort(-counts, kind="stable")[0]]
    keep_vertex = np.zeros(len(verts), dtype=bool)
    keep_vertex[referenced[roots == best_root]] = True
    faces = faces[keep_vertex[faces[:, 0]]]

    # -- drop unreferenced vertices, remap
    referenced = np.unique(faces)
    remap = np.full(len(verts), -1, dtype=np.int64)
    remap[referenced] = np.arange(len(referenced))
    return TriMesh(verts[referenced], remap[faces])
