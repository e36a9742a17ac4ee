"""Superpixel graphs from raster digit images.

Each image is segmented into a fixed number of clusters by a grid-seeded
Lloyd iteration over (intensity, row, column) space, in the spirit of SLIC.
Every cluster becomes a graph vertex carrying its mean intensity (rescaled
to [-1, 1]) and its centroid position (rescaled to [-1, 1] per axis); edges
connect clusters that touch along the 4-neighbor pixel grid. The whole
construction is deterministic: fixed seeding grid, fixed iteration count,
lowest-index tie breaking, and a farthest-pixel rule for empty clusters.

The bundled dataset builder draws from scikit-learn's 8x8 digit set,
upscaled so an image has comfortably more pixels than clusters. It stands in
for larger published superpixel benchmarks; the JSON graph format below
allows dropping in other data.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import PolyNetError, ShapeMismatchError
from ..mesh import VertexAdjacency
from ..nn import NetworkInput


@dataclass
class GraphSample:
    """One labeled graph: per-vertex intensity features plus 2D positions."""

    features: np.ndarray  # (N, C) in [-1, 1]
    positions: np.ndarray  # (N, 2) in [-1, 1]
    edges: np.ndarray  # (E, 2) vertex index pairs
    label: int
    sample_id: str = ""

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.positions = np.asarray(self.positions, dtype=np.float64)
        self.edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        n = self.features.shape[0]
        if self.positions.shape != (n, 2):
            raise ShapeMismatchError(
                f"shape mismatch: {n} features vs positions {self.positions.shape}"
            )
        if self.edges.size and (
            self.edges.min() < 0 or self.edges.max() >= n
        ):
            raise PolyNetError("edge endpoint out of range")

    @property
    def n_vertices(self) -> int:
        return self.features.shape[0]

    def feature_matrix(self) -> np.ndarray:
        """Intensity channels with the position channels appended."""
        return np.hstack([self.features, self.positions])

    def to_network_input(self) -> NetworkInput:
        adj = VertexAdjacency.from_edges(self.edges, self.n_vertices)
        return NetworkInput(
            self.feature_matrix(),
            adjacencies=[adj],
            pools=[],
            label=self.label,
            sample_id=self.sample_id,
        )

    def save(self, path) -> None:
        payload = {
            "nodes": [
                {
                    "feat": [float(v) for v in self.features[i]],
                    "pos": [float(self.positions[i, 0]), float(self.positions[i, 1])],
                }
                for i in range(self.n_vertices)
            ],
            "edges": [[int(u), int(v)] for u, v in self.edges],
            "label": int(self.label),
        }
        Path(path).write_text(
            json.dumps(payload, sort_keys=True, separators=(",", ":")) + "\n",
            encoding="utf-8",
        )

    @classmethod
    def load(cls, path) -> "GraphSample":
        path = Path(path)
        payload = json.loads(path.read_text(encoding="utf-8"))
        nodes = payload["nodes"]
        return cls(
            features=np.array([n["feat"] for n in nodes], dtype=np.float64),
            positions=np.array([n["pos"] for n in nodes], dtype=np.float64),
            edges=np.array(payload["edges"], dtype=np.int64).reshape(-1, 2),
            label=int(payload["label"]),
            sample_id=path.stem,
        )


def upscale(image: np.ndarray, factor: int) -> np.ndarray:
    """Nearest-neighbor upscaling by pixel replication."""
    return np.kron(image, np.ones((factor, factor)))


def superpixel_graph(
    image: np.ndarray,
    label: int = 0,
    n_nodes: int = 75,
    lloyd_iters: int = 10,
    sample_id: str = "",
) -> GraphSample:
    """Segment one grayscale image (values in [0, 1]) into a GraphSample."""
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 2:
        raise ShapeMismatchError(f"shape mismatch: expected a 2-d image, got {image.shape}")
    h, w = image.shape
    if h * w < n_nodes:
        raise PolyNetError(
            f"image has {h * w} pixels, fewer than {n_nodes} clusters"
        )
    rows, cols = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
    intensity_scale = np.sqrt(h * w / n_nodes)
    points = np.column_stack(
        [
            image.ravel() * intensity_scale,
            rows.ravel().astype(np.float64),
            cols.ravel().astype(np.float64),
        ]
    )

    # grid seeding: the first n_nodes cells of the smallest square grid
    grid = int(np.ceil(np.sqrt(n_nodes)))
    seed_rows = ((np.arange(grid) + 0.5) * h / grid)[:, None]
    seed_cols = ((np.arange(grid) + 0.5) * w / grid)[None, :]
    seeds_rc = np.column_stack(
        [
            np.broadcast_to(seed_rows, (grid, grid)).ravel(),
            np.broadcast_to(seed_cols, (grid, grid)).ravel(),
        ]
    )[:n_nodes]
    nearest = (
        np.minimum(seeds_rc[:, 0].astype(np.int64), h - 1) * w
        + np.minimum(seeds_rc[:, 1].astype(np.int64), w - 1)
    )
    centers = np.column_stack([points[nearest, 0], seeds_rc])

    labels = None
    for _ in range(lloyd_iters):
        d2 = ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        labels = d2.argmin(axis=1)
        counts = np.bincount(labels, minlength=n_nodes)
        sums = np.zeros((n_nodes, 3))
        np.add.at(sums, labels, points)
        filled = counts > 0
        centers[filled] = sums[filled] / counts[filled, None]
        if not filled.all():
            # deterministic reseed: hand each empty cluster the pixel
            # currently farthest from its own center
            own = d2[np.arange(points.shape[0]), labels]
            order = np.argsort(-own, kind="stable")
            for rank, empty in enumerate(np.flatnonzero(~filled)):
                centers[empty] = points[order[rank]]

    d2 = ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    labels = d2.argmin(axis=1)
    counts = np.bincount(labels, minlength=n_nodes)
    while (counts == 0).any():
        empty = int(np.flatnonzero(counts == 0)[0])
        own = d2[np.arange(points.shape[0]), labels]
        own[counts[labels] <= 1] = -np.inf  # do not empty a singleton
        moved = int(np.argmax(own))
        labels[moved] = empty
        counts = np.bincount(labels, minlength=n_nodes)

    sums = np.zeros((n_nodes, 3))
    np.add.at(sums, labels, points)
    means = sums / counts[:, None]
    # the mean of a run of identical values can drift past the endpoint by
    # an ulp through the scale/sum/divide round trip; clamp at the contract
    intensity = means[:, 0] / intensity_scale
    features = np.clip(2.0 * intensity - 1.0, -1.0, 1.0)[:, None]
    positions = np.clip(
        np.column_stack(
            [
                2.0 * means[:, 2] / max(w - 1, 1) - 1.0,
                2.0 * means[:, 1] / max(h - 1, 1) - 1.0,
            ]
        ),
        -1.0,
        1.0,
    )

    label_img = labels.reshape(h, w)
    pairs = np.concatenate(
        [
            np.column_stack([label_img[:, :-1].ravel(), label_img[:, 1:].ravel()]),
            np.column_stack([label_img[:-1, :].ravel(), label_img[1:, :].ravel()]),
        ]
    )
    pairs = pairs[pairs[:, 0] != pairs[:, 1]]
    pairs = np.unique(np.sort(pairs, axis=1), axis=0)
    return GraphSample(features, positions, pairs, label=label, sample_id=sample_id)


def digit_images():
    """The scikit-learn 8x8 digit set as (images in [0, 1], labels)."""
    from sklearn.datasets import load_digits

    bunch = load_digits()
    return bunch.images / 16.0, bunch.target.astype(np.int64)


def synthesize_graph_dataset(
    out_dir,
    n_train: int = 200,
    n_test: int = 50,
    seed: int = 0,
    n_nodes: int = 75,
    upscale_factor: int = 4,
) -> dict:
    """Write labeled superpixel graphs under <root>/{train,test}/*.json."""
    images, targets = digit_images()
    if n_train + n_test > len(images):
        raise PolyNetError(
            f"requested {n_train + n_test} samples, dataset has {len(images)}"
        )
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(images))
    out_dir = Path(out_dir)
    manifest = {"schema_version": 1, "n_nodes": n_nodes, "splits": {}}
    cursor = 0
    for split, count in (("train", n_train), ("test", n_test)):
        split_dir = out_dir / split
        split_dir.mkdir(parents=True, exist_ok=True)
        entries = []
        for k in range(count):
            idx = int(order[cursor])
            cursor += 1
            image = upscale(images[idx], upscale_factor)
            sample_id = f"digit_{idx:05d}"
            graph = superpixel_graph(
                image,
                label=int(targets[idx]),
                n_nodes=n_nodes,
                sample_id=sample_id,
            )
            graph.save(split_dir / f"{sample_id}.json")
            entries.append(
                {"id": sample_id, "label": int(targets[idx]), "n_vertices": graph.n_vertices}
            )
        manifest["splits"][split] = entries
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest, sort_keys=True, indent=1) + "\n", encoding="utf-8"
    )
    return manifest


def load_graph_dataset(root, split: str) -> list:
    """All GraphSamples of one split, ordered by file name."""
    split_dir = Path(root) / split
    if not split_dir.is_dir():
        raise FileNotFoundError(f"no such split directory: {split_dir}")
    samples = [GraphSample.load(p) for p in sorted(split_dir.glob("*.json"))]
    if not samples:
        raise PolyNetError(f"split {split!r} under {root} holds no graphs")
    return samples
