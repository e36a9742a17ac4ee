"""Quadric-error-metric edge-collapse decimation.

Classic greedy scheme: every vertex carries the sum of its incident faces'
area-weighted plane quadrics; collapsing edge (u, v) into the position that
minimises the combined quadric costs the minimised value. Collapses are
popped cheapest-first from a lazy heap and validated just before applying:

- link condition (the collapse must keep the complex a manifold),
- no surviving face may flip its normal or degenerate,
- no two surviving faces may become identical (this also protects the
  tetrahedron, the smallest closed triangle mesh).

Rejected candidates are parked and retried once later collapses have made
progress, so the loop terminates exactly when no valid collapse remains.
"""

from __future__ import annotations

import heapq
from typing import NamedTuple

import numpy as np

from ..mesh import TriMesh
from ..mesh.clean import clean


class DecimationResult(NamedTuple):
    mesh: TriMesh
    reached_target: bool


def _face_quadric(p0, p1, p2) -> np.ndarray | None:
    cross = np.cross(p1 - p0, p2 - p0)
    norm = float(np.linalg.norm(cross))
    if norm <= 0.0:
        return None
    n = cross / norm
    plane = np.array([n[0], n[1], n[2], -float(n @ p0)])
    return (0.5 * norm) * np.outer(plane, plane)


def _optimal_position(key: np.ndarray, pu, pv) -> tuple[np.ndarray, float]:
    a = key[:3, :3]
    rhs = -key[:3, 3]
    scale = float(np.abs(a).max())
    p = None
    if scale > 0.0 and abs(float(np.linalg.det(a))) > 1e-12 * scale**3:
        p = np.linalg.solve(a, rhs)
    if p is None:
        # singular quadric: best of midpoint and the two endpoints
        best_cost = np.inf
        for cand in (0.5 * (pu + pv), pu, pv):
            h = np.append(cand, 1.0)
            cost = float(h @ key @ h)
            if cost < best_cost:
                best_cost, p = cost, cand
        return np.asarray(p), max(best_cost, 0.0)
    h = np.append(p, 1.0)
    return p, max(float(h @ key @ h), 0.0)


def decimate(mesh: TriMesh, target_vertices: int) -> DecimationResult:
    """Collapse edges until ``target_vertices`` remain (or no collapse is
    valid anymore).

    Parameters
    ----------
    mesh : TriMesh
        Clean input mesh.
    target_vertices : int
        Desired vertex count. A mesh already at or below the target is
        returned unchanged.

    Returns
    -------
    DecimationResult
        The decimated (and re-cleaned) mesh plus a flag telling whether
        the target was reached; e.g. a tetrahedron asked down to 3
        vertices comes back as a tetrahedron with the flag False.
    """
    if mesh.n_vertices <= target_vertices:
        return DecimationResult(mesh, True)

    pos = np.array(mesh.vertices)
    faces = np.array(mesh.faces)
    vert_alive = np.ones(len(pos), dtype=bool)
    face_alive = np.ones(len(faces), dtype=bool)
    vfaces: list[set[int]] = [set() for _ in range(len(pos))]
    for f, (a, b, c) in enumerate(faces):
        vfaces[a].add(f)
        vfaces[b].add(f)
        vfaces[c].add(f)

    quadrics = np.zeros((len(pos), 4, 4))
    for f, (a, b, c) in enumerate(faces):
        k = _face_quadric(pos[a], pos[b], pos[c])
        if k is not None:
            quadrics[a] += k
            quadrics[b] += k
            quadrics[c] += k

    stamps = np.zeros(len(pos), dtype=np.int64)
    heap: list[tuple] = []

    def push(u: int, v: int) -> None:
        if u > v:
            u, v = v, u
        p, cost = _optimal_position(quadrics[u] + quadrics[v], pos[u], pos[v])
        heapq.heappush(
            heap, (cost, u, v, int(stamps[u]), int(stamps[v]), tuple(p))
        )

    for u, v in mesh.edges():
        push(int(u), int(v))

    def ring(u: int) -> set[int]:
        out: set[int] = set()
        for f in vfaces[u]:
            out.update(int(x) for x in faces[f])
        out.discard(u)
        return out

    def try_collapse(u: int, v: int, p: np.ndarray) -> bool:
        shared = vfaces[u] & vfaces[v]
        if not shared or len(shared) > 2:
            return False
        opposite = set()
        for f in shared:
            opposite.update(int(x) for x in faces[f])
        opposite -= {u, v}
        if ring(u) & ring(v) != opposite:
            return False  # link condition: would pinch the surface
        surviving = (vfaces[u] | vfaces[v]) - shared
        seen: set[frozenset] = set()
        for f in surviving:
            tri = faces[f]
            old = np.cross(pos[tri[1]] - pos[tri[0]], pos[tri[2]] - pos[tri[0]])
            new_pts = [p if int(x) in (u, v) else pos[int(x)] for x in tri]
            new = np.cross(new_pts[1] - new_pts[0], new_pts[2] - new_pts[0])
            old_n = float(np.linalg.norm(old))
            new_n = float(np.linalg.norm(new))
            if new_n <= 1e-14 * max(old_n, 1e-300):
                return False  # face would degenerate
            if float(old @ new) <= 1e-10 * old_n * new_n:
                return False  # face would flip
            key = frozenset(u if int(x) == v else int(x) for x in tri)
            if key in seen:
                return False  # two faces would coincide
            seen.add(key)

        # --- apply
        for f in shared:
            face_alive[f] = False
            for x in faces[f]:
                vfaces[int(x)].discard(f)
        for f in list(vfaces[v]):
            faces[f][faces[f] == v] = u
            vfaces[u].add(f)
        vfaces[v].clear()
        vert_alive[v] = False
        pos[u] = p
        quadrics[u] = quadrics[u] + quadrics[v]
        stamps[u] += 1
        stamps[v] += 1
        for x in ring(u):
            push(u, int(x))
        return True

    alive = int(vert_alive.sum())
    parked: list[tuple] = []
    progressed = True
    while alive > target_vertices:
        if not heap:
            if parked and progressed:
                heap, parked, progressed = parked, [], False
                heapq.heapify(heap)
                continue
            break
        cost, u, v, su, sv, p = heapq.heappop(heap)
        if not (vert_alive[u] and vert_alive[v]):
            continue
        if su != stamps[u] or sv != stamps[v]:
            continue  # stale: a neighbouring collapse changed a quadric
        if try_collapse(u, v, np.asarray(p)):
            alive -= 1
            progressed = True
        else:
            parked.append((cost, u, v, su, sv, p))

    keep = np.flatnonzero(vert_alive)
    remap = np.full(len(pos), -1, dtype=np.int64)
    remap[keep] = np.arange(len(keep))
    out = TriMesh(pos[keep], remap[faces[face_alive]])
    out = clean(out, weld_tol=0.0)
    return DecimationResult(out, out.n_vertices <= target_vertices)
