"""Mesh dataset ingestion: raw OFF/OBJ trees to serialized pyramid shapes.

Input follows the common class-per-directory layout ``root/<class>/{train,
test}/<file>``. Every mesh is cleaned, normalized into the unit cube,
decimated to a coarse base, and subdivided back up with projection onto the
original surface. Each result is saved as a directory of per-level meshes
plus pooling maps, and a manifest records per-file status with vertex/face
counts per level. Failures of individual meshes are recorded and skipped;
only an unusable root is fatal.
"""

from __future__ import annotations

import json
import logging
from pathlib import Path

import numpy as np

from ..errors import PolyNetError
from ..mesh import adjacency, clean, load_mesh, normalize, vertex_normals
from ..nn import NetworkInput
from ..shape import (
    MultiResShape,
    build_polyshape,
    load_multires,
    save_multires,
)

log = logging.getLogger("polynet.ingest")

MESH_SUFFIXES = (".off", ".obj")
SPLITS = ("train", "test")


def mesh_features(mesh) -> np.ndarray:
    """Per-vertex input features: position channels then normal channels."""
    return np.hstack([mesh.vertices, vertex_normals(mesh)])


def shape_input(shape: MultiResShape, label=None, sample_id: str = "") -> NetworkInput:
    """Wire a pyramid into a network sample, finest level first."""
    finest = shape.finest
    return NetworkInput(
        features=mesh_features(finest),
        adjacencies=[adjacency(level) for level in reversed(shape.levels)],
        pools=list(reversed(shape.pools)),
        label=label,
        sample_id=sample_id,
    )


def list_classes(root) -> list:
    root = Path(root)
    if not root.is_dir():
        raise FileNotFoundError(f"dataset root {root} is not a directory")
    classes = sorted(d.name for d in root.iterdir() if d.is_dir())
    if not classes:
        raise PolyNetError(f"dataset root {root} holds no class directories")
    return classes


def process_mesh_dataset(
    in_root,
    out_root,
    scheme: str = "sqrt3",
    levels: int = 3,
    coarse_target: int = 400,
) -> dict:
    """Process a raw mesh tree; returns the manifest (also written to disk)."""
    in_root = Path(in_root)
    out_root = Path(out_root)
    classes = list_classes(in_root)
    samples = []
    n_failed = 0
    for class_name in classes:
        for split in SPLITS:
            split_dir = in_root / class_name / split
            if not split_dir.is_dir():
                continue
            files = sorted(
                p for p in split_dir.iterdir() if p.suffix.lower() in MESH_SUFFIXES
            )
            for path in files:
                rel = path.relative_to(in_root)
                entry = {
                    "source": str(rel),
                    "class": class_name,
                    "split": split,
                    "id": path.stem,
                }
                try:
                    mesh = normalize(clean(load_mesh(path)))
                    shape = build_polyshape(
                        mesh,
                        scheme=scheme,
                        levels=levels,
                        coarse_target=coarse_target,
                        source=str(rel),
                    )
                except ValueError as exc:  # PolyNetError and friends included
                    n_failed += 1
                    entry["status"] = "failed"
                    entry["error"] = str(exc)
                    log.warning("skipping %s: %s", rel, exc)
                else:
                    out_dir = out_root / class_name / split / path.stem
                    save_multires(shape, out_dir)
                    entry["status"] = "ok"
                    entry["counts"] = [list(c) for c in shape.counts()]
                    entry["reached_target"] = shape.reached_target
                samples.append(entry)
    manifest = {
        "schema_version": 1,
        "scheme": scheme,
        "levels": levels,
        "coarse_target": coarse_target,
        "classes": classes,
        "n_ok": len(samples) - n_failed,
        "n_failed": n_failed,
        "samples": samples,
    }
    out_root.mkdir(parents=True, exist_ok=True)
    (out_root / "manifest.json").write_text(
        json.dumps(manifest, sort_keys=True, indent=1) + "\n", encoding="utf-8"
    )
    return manifest


def load_processed_dataset(root, split: str):
    """Load one split of a processed tree.

    Returns (inputs, class_names) where inputs is a list of NetworkInput
    with labels assigned by sorted class order.
    """
    root = Path(root)
    manifest_path = root / "manifest.json"
    if not manifest_path.is_file():
        raise FileNotFoundError(f"no manifest under {root}")
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    classes = manifest["classes"]
    inputs = []
    for entry in manifest["samples"]:
        if entry["split"] != split or entry["status"] != "ok":
            continue
        shape_dir = root / entry["class"] / split / entry["id"]
        shape = load_multires(shape_dir)
        inputs.append(
            shape_input(
                shape,
                label=classes.index(entry["class"]),
                sample_id=entry["id"],
            )
        )
    if not inputs:
        raise PolyNetError(f"split {split!r} under {root} holds no usable samples")
    return inputs, classes
