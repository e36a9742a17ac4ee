"""Multi-resolution shapes: build, pool, and (de)serialise.

A :class:`MultiResShape` holds a hierarchy of meshes from coarse to fine,
produced by decimating a clean normalised mesh to a target vertex count and
then subdividing back up a fixed number of times, re-fitting every level to
the original surface by closest-point projection. Because each level is a
subdivision of the previous one, pooling patches between adjacent levels
come for free (see :class:`.subdivide.PoolMap`), and max-pooling over those
patches plays the role that strided pooling plays on image grids.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from ..errors import PolyNetError
from ..mesh import BVH, TriMesh, load_mesh, save_mesh
from .decimate import decimate
from .subdivide import SCHEMES, PoolMap, subdivide

_POOLS_FILE = "pools.json"
_META_FILE = "meta.json"


def fit_to_reference(mesh: TriMesh, reference: BVH) -> TriMesh:
    """Project every vertex onto the closest point of the reference surface."""
    projected, _, _ = reference.closest_points(mesh.vertices)
    return mesh.with_vertices(projected)


@dataclass(frozen=True)
class MultiResShape:
    """Mesh hierarchy plus the pooling maps between adjacent levels.

    ``levels[0]`` is the coarsest mesh; ``levels[-1]`` the finest.
    ``pools[k]`` maps level ``k + 1`` (fine) onto level ``k`` (coarse).
    """

    levels: tuple[TriMesh, ...]
    pools: tuple[PoolMap, ...]
    scheme: str
    coarse_target: int
    reached_target: bool = True
    source: str | None = None

    def __post_init__(self):
        if len(self.levels) != len(self.pools) + 1:
            raise PolyNetError("need exactly one pool map per level pair")
        for k, pm in enumerate(self.pools):
            if pm.n_coarse != self.levels[k].n_vertices:
                raise PolyNetError(f"pool map {k} does not match coarse level")
            if pm.n_fine != self.levels[k + 1].n_vertices:
                raise PolyNetError(f"pool map {k} does not match fine level")

    @property
    def finest(self) -> TriMesh:
        return self.levels[-1]

    @property
    def n_levels(self) -> int:
        return len(self.levels)

    def counts(self) -> list[list[int]]:
        return [[m.n_vertices, m.n_faces] for m in self.levels]


def build_polyshape(
    mesh: TriMesh,
    scheme: str = "sqrt3",
    levels: int = 3,
    coarse_target: int = 400,
    fit: bool = True,
    source: str | None = None,
) -> MultiResShape:
    """Decimate to ``coarse_target`` vertices, then subdivide ``levels``
    times, fitting each level back onto the input surface.

    Parameters
    ----------
    mesh : TriMesh
        Clean, normalised input; it acts as the projection reference.
    scheme : {"sqrt3", "ptq"}
    levels : int
        Number of subdivision steps (so ``levels + 1`` meshes total).
    coarse_target : int
        Vertex budget for the decimated base mesh.
    fit : bool
        Disable to keep raw subdivision positions (mostly for tests).

    Notes
    -----
    Fitted positions are clipped to [-1, 1]; for a normalised reference
    this only ever trims floating-point dust, and it keeps the network's
    input-range contract airtight.
    """
    if scheme not in SCHEMES:
        raise PolyNetError(f"unknown subdivision scheme {scheme!r}")
    if levels < 1:
        raise PolyNetError("need at least one subdivision level")
    reference = BVH(mesh) if fit else None

    def _fit(m: TriMesh) -> TriMesh:
        if reference is None:
            return m
        fitted = fit_to_reference(m, reference)
        return fitted.with_vertices(np.clip(fitted.vertices, -1.0, 1.0))

    base, reached = decimate(mesh, coarse_target)
    level_meshes = [_fit(base)]
    pool_maps = []
    for _ in range(levels):
        finer, pm = subdivide(level_meshes[-1], scheme)
        level_meshes.append(_fit(finer))
        pool_maps.append(pm)
    return MultiResShape(
        levels=tuple(level_meshes),
        pools=tuple(pool_maps),
        scheme=scheme,
        coarse_target=coarse_target,
        reached_target=reached,
        source=source,
    )


def poly_pool(
    features: np.ndarray, pool: PoolMap
) -> tuple[np.ndarray, np.ndarray]:
    """Max-pool fine-level features over inverse-subdivision patches.

    Parameters
    ----------
    features : ndarray of shape (V_fine, C)
    pool : PoolMap

    Returns
    -------
    (pooled, source)
        ``pooled`` has shape (V_coarse, C); ``source[v, c]`` is the fine
        vertex whose value was taken (for gradient routing). Among equal
        maxima the lowest fine vertex index wins.
    """
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or len(features) != pool.n_fine:
        raise PolyNetError(
            f"features shape {features.shape} does not match pool map"
        )
    gathered = features[pool.indices]  # (P, C)
    starts = pool.offsets[:-1]
    pooled = np.maximum.reduceat(gathered, starts, axis=0)
    is_max = gathered == np.repeat(pooled, np.diff(pool.offsets), axis=0)
    candidate = np.where(is_max, pool.indices[:, None], np.iinfo(np.int64).max)
    source = np.minimum.reduceat(candidate, starts, axis=0)
    return pooled, source


def poly_pool_backward(
    grad_pooled: np.ndarray, source: np.ndarray, n_fine: int
) -> np.ndarray:
    """Route pooled gradients back to the selected fine vertices."""
    grad_pooled = np.asarray(grad_pooled, dtype=np.float64)
    grad = np.zeros((n_fine, grad_pooled.shape[1]))
    cols = np.broadcast_to(
        np.arange(grad_pooled.shape[1]), grad_pooled.shape
    )
    np.add.at(grad, (source, cols), grad_pooled)
    return grad


def save_multires(shape: MultiResShape, directory: str) -> None:
    """Serialise a shape as ``level_k.obj`` files + pools.json + meta.json.

    Positions are written with 17 significant digits (exact float64
    round-trip); connectivity and pooling patches are stored as plain JSON
    integers, so a load gives back bit-identical structure.
    """
    os.makedirs(directory, exist_ok=True)
    for k, mesh in enumerate(shape.levels):
        save_mesh(mesh, os.path.join(directory, f"level_{k}.obj"))
    pools_doc = {
        "schema_version": 1,
        "maps": [
            {"n_fine": pm.n_fine, "patches": pm.to_lists()} for pm in shape.pools
        ],
    }
    meta_doc = {
        "schema_version": 1,
        "scheme": shape.scheme,
        "num_levels": shape.n_levels,
        "counts": shape.counts(),
        "coarse_target": shape.coarse_target,
        "reached_target": bool(shape.reached_target),
        "source": shape.source,
    }
    with open(os.path.join(directory, _POOLS_FILE), "w", encoding="utf-8") as fh:
        json.dump(pools_doc, fh, sort_keys=True)
        fh.write("\n")
    with open(os.path.join(directory, _META_FILE), "w", encoding="utf-8") as fh:
        json.dump(meta_doc, fh, sort_keys=True, indent=1)
        fh.write("\n")


def load_multires(directory: str) -> MultiResShape:
    """Inverse of :func:`save_multires`."""
    with open(os.path.join(directory, _META_FILE), "r", encoding="utf-8") as fh:
        meta = json.load(fh)
    with open(os.path.join(directory, _POOLS_FILE), "r", encoding="utf-8") as fh:
        pools_doc = json.load(fh)
    levels = tuple(
        load_mesh(os.path.join(directory, f"level_{k}.obj"))
        for k in range(meta["num_levels"])
    )
    pools = tuple(
        PoolMap.from_lists(entry["patches"], entry["n_fine"])
        for entry in pools_doc["maps"]
    )
    return MultiResShape(
        levels=levels,
        pools=pools,
        scheme=meta["scheme"],
        coarse_target=meta["coarse_target"],
        reached_target=meta["reached_target"],
        source=meta.get("source"),
    )
