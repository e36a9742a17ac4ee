"""Shared geometry builders and independent oracles for the test suite.

Everything here is deliberately naive: dict-based subdivision, per-face
candidate scans, hand-rolled accumulation loops. The point is that these
implementations share no code with the package, so agreement is meaningful.
"""

from __future__ import annotations

import math

import numpy as np

from polynet.mesh import TriMesh


def make_tetrahedron() -> TriMesh:
    """Regular tetrahedron centred at the origin, CCW outward faces."""
    verts = np.array(
        [[1.0, 1.0, 1.0], [1.0, -1.0, -1.0], [-1.0, 1.0, -1.0], [-1.0, -1.0, 1.0]]
    )
    faces = np.array([[0, 1, 2], [0, 2, 3], [0, 3, 1], [1, 3, 2]])
    return TriMesh(verts, faces)


def make_cube() -> TriMesh:
    """Unit cube [0,1]^3 triangulated so corner 6 = (1,1,1) touches exactly
    one triangle of each adjacent face (symmetric corner)."""
    verts = np.array(
        [
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [1.0, 1.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0],
            [1.0, 0.0, 1.0],
            [1.0, 1.0, 1.0],
            [0.0, 1.0, 1.0],
        ]
    )
    faces = np.array(
        [
            [0, 3, 2], [0, 2, 1],  # bottom (z = 0)
            [4, 5, 7], [5, 6, 7],  # top (z = 1)
            [0, 1, 5], [0, 5, 4],  # front (y = 0)
            [2, 3, 7], [2, 7, 6],  # back (y = 1)
            [0, 4, 7], [0, 7, 3],  # left (x = 0)
            [1, 2, 5], [2, 6, 5],  # right (x = 1)
        ]
    )
    return TriMesh(verts, faces)


def make_octahedron() -> TriMesh:
    """Regular octahedron with unit vertices; all faces equidistant from
    the origin (exact ties, integer coordinates)."""
    verts = np.array(
        [
            [1.0, 0.0, 0.0],
            [-1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, -1.0, 0.0],
            [0.0, 0.0, 1.0],
            [0.0, 0.0, -1.0],
        ]
    )
    faces = np.array(
        [
            [0, 2, 4], [2, 1, 4], [1, 3, 4], [3, 0, 4],
            [2, 0, 5], [1, 2, 5], [3, 1, 5], [0, 3, 5],
        ]
    )
    return TriMesh(verts, faces)


def make_icosahedron() -> TriMesh:
    t = (1.0 + math.sqrt(5.0)) / 2.0
    verts = np.array(
        [
            [-1, t, 0], [1, t, 0], [-1, -t, 0], [1, -t, 0],
            [0, -1, t], [0, 1, t], [0, -1, -t], [0, 1, -t],
            [t, 0, -1], [t, 0, 1], [-t, 0, -1], [-t, 0, 1],
        ],
        dtype=np.float64,
    )
    verts /= np.linalg.norm(verts, axis=1, keepdims=True)
    faces = np.array(
        [
            [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
            [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
            [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
            [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
        ]
    )
    return TriMesh(verts, faces)


def _midpoint_split(verts: np.ndarray, faces: np.ndarray):
    """Naive dict-based 1-to-4 split (independent of the package)."""
    verts = [v for v in verts]
    cache: dict[tuple[int, int], int] = {}

    def mid(a: int, b: int) -> int:
        key = (min(a, b), max(a, b))
        if key not in cache:
            cache[key] = len(verts)
            verts.append(0.5 * (verts[a] + verts[b]))
        return cache[key]

    out = []
    for a, b, c in faces:
        ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
        out.extend([(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)])
    return np.array(verts), np.array(out, dtype=np.int64)


def make_icosphere(subdivisions: int = 2) -> TriMesh:
    mesh = make_icosahedron()
    verts, faces = np.array(mesh.vertices), np.array(mesh.faces)
    for _ in range(subdivisions):
        verts, faces = _midpoint_split(verts, faces)
        verts /= np.linalg.norm(verts, axis=1, keepdims=True)
    return TriMesh(verts, faces)


def make_torus(n_major: int = 20, n_minor: int = 20, r_major: float = 1.0,
               r_minor: float = 0.4) -> TriMesh:
    """Parametric torus grid: n_major * n_minor vertices, twice as many
    faces, Euler characteristic 0."""
    verts = np.zeros((n_major * n_minor, 3))
    for i in range(n_major):
        phi = 2.0 * math.pi * i / n_major
        for j in range(n_minor):
            theta = 2.0 * math.pi * j / n_minor
            rad = r_major + r_minor * math.cos(theta)
            verts[i * n_minor + j] = (
                rad * math.cos(phi),
                rad * math.sin(phi),
                r_minor * math.sin(theta),
            )
    faces = []
    for i in range(n_major):
        for j in range(n_minor):
            v00 = i * n_minor + j
            v10 = ((i + 1) % n_major) * n_minor + j
            v01 = i * n_minor + (j + 1) % n_minor
            v11 = ((i + 1) % n_major) * n_minor + (j + 1) % n_minor
            faces.append((v00, v10, v11))
            faces.append((v00, v11, v01))
    return TriMesh(verts, np.array(faces, dtype=np.int64))


def signed_volume(mesh: TriMesh) -> float:
    """Positive for consistently outward-oriented closed surfaces."""
    a = mesh.vertices[mesh.faces[:, 0]]
    b = mesh.vertices[mesh.faces[:, 1]]
    c = mesh.vertices[mesh.faces[:, 2]]
    return float(np.einsum("ij,ij->i", np.cross(a, b), c).sum() / 6.0)


def brute_adjacency(mesh: TriMesh) -> dict[int, list[int]]:
    """One-ring adjacency via a plain dict-of-sets scan."""
    ring: dict[int, set[int]] = {v: set() for v in range(mesh.n_vertices)}
    for a, b, c in mesh.faces:
        ring[int(a)].update((int(b), int(c)))
        ring[int(b)].update((int(a), int(c)))
        ring[int(c)].update((int(a), int(b)))
    return {v: sorted(s) for v, s in ring.items()}


def closest_on_triangle_candidates(p, a, b, c):
    """Independent closest-point formula: best of the 3 vertices, the 3
    clamped edge projections, and the in-plane projection when its
    barycentric coordinates are nonnegative."""
    cands = [np.asarray(a, float), np.asarray(b, float), np.asarray(c, float)]
    p = np.asarray(p, float)
    for u, v in ((a, b), (b, c), (c, a)):
        u = np.asarray(u, float)
        v = np.asarray(v, float)
        denom = float(np.dot(v - u, v - u))
        if denom > 0.0:
            t = min(1.0, max(0.0, float(np.dot(p - u, v - u)) / denom))
            cands.append(u + t * (v - u))
    n = np.cross(np.asarray(b, float) - a, np.asarray(c, float) - a)
    nn = float(np.dot(n, n))
    if nn > 0.0:
        q = p - (float(np.dot(p - a, n)) / nn) * n
        bary = (
            float(np.dot(np.cross(np.asarray(b, float) - q, np.asarray(c, float) - q), n)),
            float(np.dot(np.cross(np.asarray(c, float) - q, np.asarray(a, float) - q), n)),
            float(np.dot(np.cross(np.asarray(a, float) - q, np.asarray(b, float) - q), n)),
        )
        if min(bary) >= 0.0:
            cands.append(q)
    dists = [float(np.linalg.norm(p - q)) for q in cands]
    k = int(np.argmin(dists))
    return dists[k], cands[k]
