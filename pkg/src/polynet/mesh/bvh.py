"""Axis-aligned bounding-volume hierarchy for exact closest-point queries.

The tree is built over face centroids with median splits along the longest
axis. Queries run batched: every query walks the tree in lock-step waves of
(query, node) pairs, with all geometry kernels vectorised across pairs.
Results are exact (no approximation) and distance ties are broken by the
lowest face index, matching a brute-force scan over faces in order.
"""

from __future__ import annotations

import numpy as np

from ..errors import PolyNetError
from .trimesh import TriMesh

_LEAF_SIZE = 8


def closest_point_on_triangles(
    p: np.ndarray, a: np.ndarray, b: np.ndarray, c: np.ndarray
) -> np.ndarray:
    """Closest point on each triangle (a, b, c) to each query p, elementwise.

    All inputs have shape (N, 3). Implements the standard Voronoi-region
    case analysis with every branch evaluated as a mask, so the function is
    fully vectorised. Degenerate triangles fall back to vertex ``a``.
    """
    ab = b - a
    ac = c - a
    ap = p - a
    d1 = np.einsum("ij,ij->i", ab, ap)
    d2 = np.einsum("ij,ij->i", ac, ap)
    bp = p - b
    d3 = np.einsum("ij,ij->i", ab, bp)
    d4 = np.einsum("ij,ij->i", ac, bp)
    cp = p - c
    d5 = np.einsum("ij,ij->i", ab, cp)
    d6 = np.einsum("ij,ij->i", ac, cp)

    vc = d1 * d4 - d3 * d2
    vb = d5 * d2 - d1 * d6
    va = d3 * d6 - d5 * d4

    def _safe_div(num, den):
        return num / np.where(den == 0.0, 1.0, den)

    v_ab = _safe_div(d1, d1 - d3)
    w_ac = _safe_div(d2, d2 - d6)
    w_bc = _safe_div(d4 - d3, (d4 - d3) + (d5 - d6))
    denom = va + vb + vc
    v_in = _safe_div(vb, denom)
    w_in = _safe_div(vc, denom)

    cond_a = (d1 <= 0.0) & (d2 <= 0.0)
    cond_b = (d3 >= 0.0) & (d4 <= d3)
    cond_c = (d6 >= 0.0) & (d5 <= d6)
    cond_ab = (vc <= 0.0) & (d1 >= 0.0) & (d3 <= 0.0)
    cond_ac = (vb <= 0.0) & (d2 >= 0.0) & (d6 <= 0.0)
    cond_bc = (va <= 0.0) & (d4 - d3 >= 0.0) & (d5 - d6 >= 0.0)
    cond_degen = denom == 0.0

    u = v_ab[:, None]
    inside = a + v_in[:, None] * ab + w_in[:, None] * ac
    result = np.where(cond_degen[:, None], a, inside)
    result = np.where(cond_bc[:, None], b + w_bc[:, None] * (c - b), result)
    result = np.where(cond_ac[:, None], a + w_ac[:, None] * ac, result)
    result = np.where(cond_ab[:, None], a + u * ab, result)
    result = np.where(cond_c[:, None], c, result)
    result = np.where(cond_b[:, None], b, result)
    result = np.where(cond_a[:, None], a, result)
    return result


class BVH:
    """Static BVH over the faces of a triangle mesh.

    Parameters
    ----------
    mesh : TriMesh
        Mesh to index. Must have at least one face.
    """

    def __init__(self, mesh: TriMesh):
        if not mesh.n_faces:
            raise PolyNetError("cannot build a BVH over an empty mesh")
        self.mesh = mesh
        tri = mesh.vertices[mesh.faces]  # (F, 3, 3)
        self._ta = np.ascontiguousarray(tri[:, 0])
        self._tb = np.ascontiguousarray(tri[:, 1])
        self._tc = np.ascontiguousarray(tri[:, 2])
        centroids = tri.mean(axis=1)
        tri_lo = tri.min(axis=1)
        tri_hi = tri.max(axis=1)

        order = np.arange(mesh.n_faces, dtype=np.int64)
        nodes_lo: list[np.ndarray] = []
        nodes_hi: list[np.ndarray] = []
        left: list[int] = []
        right: list[int] = []
        start: list[int] = []
        count: list[int] = []

        def new_node(lo: int, hi: int) -> int:
            idx = len(nodes_lo)
            sel = order[lo:hi]
            nodes_lo.append(tri_lo[sel].min(axis=0))
            nodes_hi.append(tri_hi[sel].max(axis=0))
            left.append(-1)
            right.append(-1)
            start.append(lo)
            count.append(hi - lo)
            return idx

        # iterative median-split build
        stack = [(new_node(0, mesh.n_faces), 0, mesh.n_faces)]
        while stack:
            node, lo, hi = stack.pop()
            if hi - lo <= _LEAF_SIZE:
                continue
            sel = order[lo:hi]
            cen = centroids[sel]
            axis = int(np.argmax(cen.max(axis=0) - cen.min(axis=0)))
            mid = (hi - lo) // 2
            # argsort rather than argpartition keeps the build deterministic
            local = np.argsort(cen[:, axis], kind="stable")
            order[lo:hi] = sel[local]
            count[node] = 0
            li = new_node(lo, lo + mid)
            ri = new_node(lo + mid, hi)
            left[node], right[node] = li, ri
            stack.append((li, lo, lo + mid))
            stack.append((ri, lo + mid, hi))

        self._order = order
        self._lo = np.array(nodes_lo)
        self._hi = np.array(nodes_hi)
        self._left = np.array(left, dtype=np.int64)
        self._right = np.array(right, dtype=np.int64)
        self._start = np.array(start, dtype=np.int64)
        self._count = np.array(count, dtype=np.int64)

    def _box_dist2(self, pts: np.ndarray, nodes: np.ndarray) -> np.ndarray:
        clamped = np.clip(pts, self._lo[nodes], self._hi[nodes])
        d = pts - clamped
        return np.einsum("ij,ij->i", d, d)

    def _leaf_update(self, q, nodes, pts, best_d2, best_face, best_pt):
        sizes = self._count[nodes]
        starts = self._start[nodes]
        qq = np.repeat(q, sizes)
        slots = np.repeat(starts, sizes) + _ranges(sizes)
        tri = self._order[slots]
        cp = closest_point_on_triangles(
            pts[qq], self._ta[tri], self._tb[tri], self._tc[tri]
        )
        d = pts[qq] - cp
        d2 = np.einsum("ij,ij->i", d, d)
        # reduce to the best (d2, face) candidate per query
        sel = np.lexsort((tri, d2, qq))
        qq, d2, tri, cp = qq[sel], d2[sel], tri[sel], cp[sel]
        firsts = np.ones(len(qq), dtype=bool)
        firsts[1:] = qq[1:] != qq[:-1]
        qq, d2, tri, cp = qq[firsts], d2[firsts], tri[firsts], cp[firsts]
        better = (d2 < best_d2[qq]) | (
            (d2 == best_d2[qq]) & (tri < best_face[qq])
        )
        upd = qq[better]
        best_d2[upd] = d2[better]
        best_face[upd] = tri[better]
        best_pt[upd] = cp[better]

    def closest_points(
        self, points: np.ndarray
    ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Closest surface point for each query point.

        Parameters
        ----------
        points : ndarray of shape (Q, 3)

        Returns
        -------
        (points, faces, distances)
            Surface points (Q, 3), supporting face indices (Q,), and
            Euclidean distances (Q,). Among equidistant faces the lowest
            face index wins.
        """
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        nq = len(pts)
        best_d2 = np.full(nq, np.inf)
        best_face = np.full(nq, np.iinfo(np.int64).max, dtype=np.int64)
        best_pt = np.zeros_like(pts)

        # seed pass: greedy descent to one nearby leaf per query gives a
        # tight upper bound before the full pruned traversal
        q = np.arange(nq, dtype=np.int64)
        node = np.zeros(nq, dtype=np.int64)
        while True:
            leaf = self._count[node] > 0
            if leaf.any():
                self._leaf_update(
                    q[leaf], node[leaf], pts, best_d2, best_face, best_pt
                )
            inner = ~leaf
            if not inner.any():
                break
            q = q[inner]
            node = node[inner]
            li, ri = self._left[node], self._right[node]
            dl = self._box_dist2(pts[q], li)
            dr = self._box_dist2(pts[q], ri)
            node = np.where(dl <= dr, li, ri)

        # full traversal with pruning against the current best
        q = np.arange(nq, dtype=np.int64)
        node = np.zeros(nq, dtype=np.int64)
        while len(q):
            keep = self._box_dist2(pts[q], node) <= best_d2[q]
            q, node = q[keep], node[keep]
            if not len(q):
                break
            leaf = self._count[node] > 0
            if leaf.any():
                self._leaf_update(
                    q[leaf], node[leaf], pts, best_d2, best_face, best_pt
                )
            inner = ~leaf
            q, node = q[inner], node[inner]
            q = np.concatenate([q, q])
            node = np.concatenate([self._left[node], self._right[node]])

        return best_pt, best_face, np.sqrt(best_d2)


def _ranges(sizes: np.ndarray) -> np.ndarray:
    """[0..s0), [0..s1), ... concatenated."""
    total = int(sizes.sum())
    out = np.ones(total, dtype=np.int64)
    out[0] = 0
    ends = np.cumsum(sizes)[:-1]
    out[ends] = 1 - sizes[:-1]
    return np.cumsum(out)


def closest_point(
    mesh: TriMesh, points: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """One-shot closest-point query (builds a throwaway BVH).

    For repeated queries against the same mesh, build a :class:`BVH` once
    and call :meth:`BVH.closest_points`.
    """
    return BVH(mesh).closest_points(points)
