"""Generated toy mesh datasets: spheres, boxes, and cylinders.

Every acceptance and smoke test can run without external data by generating
a small labeled dataset here. Meshes are closed, consistently oriented, and
randomly scaled and rotated, then written as OFF files in the directory
layout ``<root>/<class>/{train,test}/<name>.off``.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from ..mesh import TriMesh, save_mesh
from ..shape import subdivide_ptq

CLASSES = ("sphere", "box", "cylinder")


def uv_sphere(n_rings: int, n_segments: int) -> TriMesh:
    """Unit sphere triangulated from latitude rings, outward oriented."""
    verts = [(0.0, 0.0, 1.0)]
    for i in range(1, n_rings + 1):
        theta = np.pi * i / (n_rings + 1)
        for j in range(n_segments):
            phi = 2.0 * np.pi * j / n_segments
            verts.append(
                (
                    np.sin(theta) * np.cos(phi),
                    np.sin(theta) * np.sin(phi),
                    np.cos(theta),
                )
            )
    verts.append((0.0, 0.0, -1.0))
    south = len(verts) - 1

    def ring(i, j):
        return 1 + i * n_segments + j % n_segments

    faces = []
    for j in range(n_segments):
        faces.append((0, ring(0, j), ring(0, j + 1)))
    for i in range(n_rings - 1):
        for j in range(n_segments):
            ul, ur = ring(i, j), ring(i, j + 1)
            ll, lr = ring(i + 1, j), ring(i + 1, j + 1)
            faces.append((ul, ll, lr))
            faces.append((ul, lr, ur))
    for j in range(n_segments):
        faces.append((south, ring(n_rings - 1, j + 1), ring(n_rings - 1, j)))
    return TriMesh(np.array(verts), np.array(faces, dtype=np.int64))


_BOX_CORNERS = np.array(
    [
        [-1.0, -1.0, -1.0],
        [1.0, -1.0, -1.0],
        [1.0, 1.0, -1.0],
        [-1.0, 1.0, -1.0],
        [-1.0, -1.0, 1.0],
        [1.0, -1.0, 1.0],
        [1.0, 1.0, 1.0],
        [-1.0, 1.0, 1.0],
    ]
)
_BOX_FACES = np.array(
    [
        (0, 3, 2), (0, 2, 1),
        (4, 5, 6), (4, 6, 7),
        (0, 1, 5), (0, 5, 4),
        (2, 3, 7), (2, 7, 6),
        (0, 4, 7), (0, 7, 3),
        (1, 2, 6), (1, 6, 5),
    ],
    dtype=np.int64,
)


def box(half_extents=(1.0, 1.0, 1.0), refine: int = 1) -> TriMesh:
    """Axis-aligned box, optionally refined so it carries more vertices."""
    mesh = TriMesh(_BOX_CORNERS * np.asarray(half_extents, dtype=np.float64), _BOX_FACES)
    for _ in range(refine):
        mesh, _ = subdivide_ptq(mesh)
    return mesh


def cylinder(n_segments: int) -> TriMesh:
    """Closed unit cylinder (radius 1, z in [-1, 1]) with fan caps."""
    top_c, bot_c = 0, 1
    verts = [(0.0, 0.0, 1.0), (0.0, 0.0, -1.0)]
    for j in range(n_segments):
        phi = 2.0 * np.pi * j / n_segments
        verts.append((np.cos(phi), np.sin(phi), 1.0))
    for j in range(n_segments):
        phi = 2.0 * np.pi * j / n_segments
        verts.append((np.cos(phi), np.sin(phi), -1.0))

    def top(j):
        return 2 + j % n_segments

    def bot(j):
        return 2 + n_segments + j % n_segments

    faces = []
    for j in range(n_segments):
        faces.append((top_c, top(j), top(j + 1)))
        faces.append((bot_c, bot(j + 1), bot(j)))
        faces.append((top(j), bot(j), bot(j + 1)))
        faces.append((top(j), bot(j + 1), top(j + 1)))
    return TriMesh(np.array(verts), np.array(faces, dtype=np.int64))


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    """Uniformly distributed proper rotation via QR of a Gaussian matrix."""
    q, r = np.linalg.qr(rng.standard_normal((3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def random_mesh(class_name: str, rng: np.random.Generator) -> TriMesh:
    """One randomly sized, randomly rotated instance of the named class."""
    if class_name == "sphere":
        mesh = uv_sphere(int(rng.integers(7, 11)), int(rng.integers(10, 15)))
        scale = np.full(3, rng.uniform(0.5, 1.5))
    elif class_name == "box":
        mesh = box(rng.uniform(0.4, 1.2, size=3), refine=1)
        scale = np.ones(3)
    elif class_name == "cylinder":
        mesh = cylinder(int(rng.integers(10, 17)))
        scale = np.array([1.0, 1.0, rng.uniform(0.6, 2.5)]) * rng.uniform(0.5, 1.2)
    else:
        raise ValueError(f"unknown mesh class {class_name!r}")
    verts = (mesh.vertices * scale) @ random_rotation(rng).T
    return TriMesh(verts, mesh.faces)


def synthesize_mesh_dataset(
    out_dir,
    n_train: int = 20,
    n_test: int = 10,
    seed: int = 0,
    classes=CLASSES,
) -> dict:
    """Write a labeled OFF dataset; returns {class: {split: [paths]}}."""
    out_dir = Path(out_dir)
    rng = np.random.default_rng(seed)
    written = {}
    for class_name in classes:
        written[class_name] = {}
        for split, count in (("train", n_train), ("test", n_test)):
            split_dir = out_dir / class_name / split
            split_dir.mkdir(parents=True, exist_ok=True)
            paths = []
            for k in range(count):
                mesh = random_mesh(class_name, rng)
                path = split_dir / f"{class_name}_{k:04d}.off"
                save_mesh(mesh, path, fmt="off")
                paths.append(path)
            written[class_name][split] = paths
    return written
