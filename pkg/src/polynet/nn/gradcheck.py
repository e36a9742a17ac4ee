"""Central finite-difference verification of the analytic gradients.

Runs on synthesized random graphs and pooling maps, so it needs no mesh
data. Reported numbers are the worst relative error over every parameter,
where the relative error of a pair (a, n) is |a - n| / max(|a|, |n|, 1e-3).
"""

from __future__ import annotations

import numpy as np

from ..mesh import VertexAdjacency
from ..polyconv import ConvLayerSpec, conv_backward, conv_forward
from ..shape import PoolMap
from .loss import cross_entropy
from .network import NetConfig, Network, NetworkInput

FD_STEP = 1e-5


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-3)
    return float(np.max(np.abs(analytic - numeric) / denom)) if analytic.size else 0.0


def random_adjacency(rng: np.random.Generator, n: int, extra: int = 3):
    """A spanning path plus a few random chords, as a patch table."""
    edges = {(i, i + 1) for i in range(n - 1)}
    target = min(n - 1 + extra, n * (n - 1) // 2)
    while len(edges) < target:
        u, v = sorted(rng.choice(n, size=2, replace=False))
        edges.add((int(u), int(v)))
    return VertexAdjacency.from_edges(np.array(sorted(edges)), n)


def random_pool_map(rng: np.random.Generator, n_fine: int, n_coarse: int) -> PoolMap:
    """Every coarse vertex keeps itself; remaining fine vertices are spread
    randomly, mirroring how subdivision patches nest."""
    patches = [[v] for v in range(n_coarse)]
    for u in range(n_coarse, n_fine):
        patches[int(rng.integers(n_coarse))].append(u)
    return PoolMap.from_lists([sorted(p) for p in patches], n_fine)


def synthesize_sample(
    rng: np.random.Generator, config: NetConfig, n_finest: int, label: int
) -> NetworkInput:
    sizes = [n_finest]
    for _ in range(config.pools):
        sizes.append(max(2, sizes[-1] // 2))
    adjacencies = [random_adjacency(rng, n) for n in sizes]
    pools = [
        random_pool_map(rng, sizes[i], sizes[i + 1]) for i in range(config.pools)
    ]
    features = rng.uniform(-0.9, 0.9, size=(n_finest, config.in_channels))
    return NetworkInput(features, adjacencies, pools, label=label)


def check_conv_gradients(
    degree: int = 2, squeezed: bool = False, seed: int = 0
) -> float:
    """Worst relative FD error over one convolution layer's parameters and
    input features."""
    rng = np.random.default_rng(seed)
    n = 10
    adj = random_adjacency(rng, n)
    spec = ConvLayerSpec(2, 3, degree=degree, squeezed=squeezed, ridge=1e-6)
    params = spec.init_params(rng)
    feats = rng.uniform(-0.9, 0.9, size=(n, 2))
    weights = rng.standard_normal((n, 3))

    def value(p, f):
        out, _ = conv_forward(spec, p, f, adj.patch_offsets, adj.patch_indices)
        return float(np.sum(weights * out))

    _, cache = conv_forward(spec, params, feats, adj.patch_offsets, adj.patch_indices)
    grad_params, grad_feats = conv_backward(spec, cache, weights)

    fd_params = np.empty_like(grad_params)
    for k in range(params.size):
        bumped = params.copy()
        bumped[k] += FD_STEP
        up = value(bumped, feats)
        bumped[k] -= 2 * FD_STEP
        fd_params[k] = (up - value(bumped, feats)) / (2 * FD_STEP)
    fd_feats = np.empty_like(grad_feats)
    for idx in np.ndindex(feats.shape):
        bumped = feats.copy()
        bumped[idx] += FD_STEP
        up = value(params, bumped)
        bumped[idx] -= 2 * FD_STEP
        fd_feats[idx] = (up - value(params, bumped)) / (2 * FD_STEP)
    return max(
        relative_error(grad_params, fd_params), relative_error(grad_feats, fd_feats)
    )


def check_network_gradients(
    variant: str = "unsqueezed", degree: int = 2, seed: int = 0
) -> float:
    """Worst relative FD error over every parameter of a small end-to-end
    network, using the cross-entropy loss on a synthesized batch."""
    config = NetConfig(
        num_classes=3,
        in_channels=2,
        degree=degree,
        variant=variant,
        conv_channels=(3, 4, 5),
        fc_channels=(4,),
        pools=2,
        seed=seed,
    )
    rng = np.random.default_rng(seed + 1)
    network = Network(config)
    batch = [
        synthesize_sample(rng, config, n_finest=12, label=int(rng.integers(3)))
        for _ in range(3)
    ]
    labels = np.array([s.label for s in batch])

    buffers = network.buffer_state()
    logits = network.forward(batch, train=True)
    _, grad_logits = cross_entropy(logits, labels)
    grad = network.backward(grad_logits)
    network.set_buffer_state(buffers)

    def value() -> float:
        out = network.forward(batch, train=True)
        network._tape = None
        network.set_buffer_state(buffers)
        return cross_entropy(out, labels)[0]

    fd = np.empty_like(grad)
    for k in range(network.param_count):
        network.params[k] += FD_STEP
        up = value()
        network.params[k] -= 2 * FD_STEP
        fd[k] = (up - value()) / (2 * FD_STEP)
        network.params[k] += FD_STEP
    return relative_error(grad, fd)
