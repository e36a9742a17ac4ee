"""ASCII mesh file I/O (OFF and Wavefront OBJ).

Both readers fan-triangulate polygonal faces with more than three vertices
and report parse failures with the 1-based line number. Both writers emit
coordinates with 17 significant digits, which round-trips float64 exactly.
"""

from __future__ import annotations

import os

import numpy as np

from ..errors import EmptyMeshError, MeshParseError
from .trimesh import TriMesh

_FORMATS = ("off", "obj")


def _fan_triangulate(indices: list[int]) -> list[tuple[int, int, int]]:
    """Split a polygon into triangles (0, k, k+1), dropping slivers that
    repeat an index (they encode zero area and would violate the mesh
    invariants)."""
    tris = []
    for k in range(1, len(indices) - 1):
        tri = (indices[0], indices[k], indices[k + 1])
        if tri[0] != tri[1] and tri[1] != tri[2] and tri[2] != tri[0]:
            tris.append(tri)
    return tris


def _parse_floats(parts: list[str], count: int, lineno: int) -> list[float]:
    if len(parts) < count:
        raise MeshParseError(f"expected {count} numbers, got {len(parts)}", lineno)
    try:
        return [float(p) for p in parts[:count]]
    except ValueError as exc:
        raise MeshParseError(f"bad number: {exc}", lineno) from None


def _load_off(path: str) -> TriMesh:
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.readlines()

    def records():
        for lineno, raw in enumerate(lines, start=1):
            text = raw.split("#", 1)[0].strip()
            if text:
                yield lineno, text

    rec = records()
    try:
        lineno, header = next(rec)
    except StopIteration:
        raise MeshParseError("empty file", 1) from None
    parts = header.split()
    if parts[0] != "OFF":
        raise MeshParseError("missing OFF header", lineno)
    counts = parts[1:]
    if not counts:
        try:
            lineno, text = next(rec)
        except StopIteration:
            raise MeshParseError("missing element counts", lineno) from None
        counts = text.split()
    if len(counts) < 2:
        raise MeshParseError("element count line needs at least V and F", lineno)
    try:
        n_verts, n_faces = int(counts[0]), int(counts[1])
    except ValueError:
        raise MeshParseError("element counts must be integers", lineno) from None

    verts = np.zeros((n_verts, 3), dtype=np.float64)
    for i in range(n_verts):
        try:
            lineno, text = next(rec)
        except StopIteration:
            raise MeshParseError(
                f"expected {n_verts} vertices, file ended after {i}", len(lines)
            ) from None
        verts[i] = _parse_floats(text.split(), 3, lineno)

    faces: list[tuple[int, int, int]] = []
    for i in range(n_faces):
        try:
            lineno, text = next(rec)
        except StopIteration:
            raise MeshParseError(
                f"expected {n_faces} faces, file ended after {i}", len(lines)
            ) from None
        parts = text.split()
        try:
            arity = int(parts[0])
        except ValueError:
            raise MeshParseError("face arity must be an integer", lineno) from None
        if arity < 3 or len(parts) < 1 + arity:
            raise MeshParseError(f"face needs {arity} indices", lineno)
        try:
            idx = [int(p) for p in parts[1 : 1 + arity]]
        except ValueError:
            raise MeshParseError("face index must be an integer", lineno) from None
        for j in idx:
            if j < 0 or j >= n_verts:
                raise MeshParseError(f"face index {j} out of range", lineno)
        faces.extend(_fan_triangulate(idx))

    if n_verts == 0 or not faces:
        raise EmptyMeshError(f"{path}: mesh has no usable geometry")
    return TriMesh(verts, np.array(faces, dtype=np.int64))


def _load_obj(path: str) -> TriMesh:
    verts: list[list[float]] = []
    faces: list[tuple[int, int, int]] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            text = raw.split("#", 1)[0].strip()
            if not text:
                continue
            parts = text.split()
            tag = parts[0]
            if tag == "v":
                verts.append(_parse_floats(parts[1:], 3, lineno))
            elif tag == "f":
                if len(parts) < 4:
                    raise MeshParseError("face needs at least 3 indices", lineno)
                idx = []
                for token in parts[1:]:
                    head = token.split("/", 1)[0]
                    try:
                        j = int(head)
                    except ValueError:
                        raise MeshParseError(
                            f"bad face index {token!r}", lineno
                        ) from None
                    if j < 0:
                        j = len(verts) + j  # relative to the last vertex read
                    else:
                        j = j - 1  # OBJ is 1-based
                    if j < 0 or j >= len(verts):
                        raise MeshParseError(
                            f"face index {token} out of range", lineno
                        )
                    idx.append(j)
                faces.extend(_fan_triangulate(idx))
            # all other record types (vn, vt, usemtl, o, g, s, ...) are ignored
    if not verts or not faces:
        raise EmptyMeshError(f"{path}: mesh has no usable geometry")
    return TriMesh(np.array(verts, dtype=np.float64), np.array(faces, dtype=np.int64))


def _infer_format(path: str, fmt: str | None) -> str:
    if fmt is None:
        fmt = os.path.splitext(path)[1].lstrip(".").lower()
    fmt = fmt.lower()
    if fmt not in _FORMATS:
        raise MeshParseError(f"unsupported mesh format {fmt!r} for {path!r}")
    return fmt


def load_mesh(path: str, fmt: str | None = None) -> TriMesh:
    """Load an ASCII OFF or OBJ file.

    Parameters
    ----------
    path : str
        File to read.
    fmt : {"off", "obj"}, optional
        Override the format inferred from the extension.

    Returns
    -------
    TriMesh
        Satisfies the index invariants but is otherwise raw: duplicate
        vertices, degenerate or non-manifold structure may all survive
        loading. Run :func:`polynet.mesh.clean` before geometry processing.
    """
    fmt = _infer_format(path, fmt)
    return _load_off(path) if fmt == "off" else _load_obj(path)


def save_mesh(mesh: TriMesh, path: str, fmt: str | None = None) -> None:
    """Write a mesh as ASCII OFF or OBJ (17 significant digits)."""
    fmt = _infer_format(path, fmt)
    chunks: list[str] = []
    if fmt == "off":
        n_edges = len(mesh.edges())
        chunks.append("OFF\n")
        chunks.append(f"{mesh.n_vertices} {mesh.n_faces} {n_edges}\n")
        for x, y, z in mesh.vertices:
            chunks.append(f"{x:.17g} {y:.17g} {z:.17g}\n")
        for a, b, c in mesh.faces:
            chunks.append(f"3 {a} {b} {c}\n")
    else:
        for x, y, z in mesh.vertices:
            chunks.append(f"v {x:.17g} {y:.17g} {z:.17g}\n")
        for a, b, c in mesh.faces:
            chunks.append(f"f {a + 1} {b + 1} {c + 1}\n")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("".join(chunks))
