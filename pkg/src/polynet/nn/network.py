"""The classification network: convolution trunk, pooled pyramid, dense head.

One sample is a multi-resolution graph: vertex features at the finest level,
one adjacency per level, and one pooling map per level transition. The trunk
alternates polynomial-density convolution, instance normalization, tanh, and
max pooling down the pyramid; convolution blocks past the pooled prefix stay
at the coarsest level (a flat graph with no pooling at all is the ``pools=0``
case), and global average pooling yields a fixed-width embedding. The head is
a small dense network with batch normalization that maps embeddings to class
logits.

All learnable parameters live in a single flat float64 vector; each layer is
handed a view into it. Training forwards record a tape that the backward pass
consumes; evaluation forwards record nothing, and asking for gradients after
one is an error.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ..errors import PolyNetError, ShapeMismatchError
from ..polyconv import ConvLayerSpec, conv_backward, conv_forward
from ..shape import PoolMap, poly_pool, poly_pool_backward
from .layers import (
    BatchNorm,
    Dense,
    InstanceNorm,
    global_average_pool,
    global_average_pool_backward,
    relu_backward,
    relu_forward,
    tanh_backward,
    tanh_forward,
)

VARIANTS = ("unsqueezed", "squeezed")


@dataclass(frozen=True)
class NetConfig:
    """Static architecture description; hashable content for checkpoints."""

    num_classes: int
    in_channels: int = 6
    degree: int = 2
    variant: str = "unsqueezed"
    conv_channels: tuple = (64, 128, 256, 512)
    fc_channels: tuple = (256, 128)
    pools: int = 3
    ridge: float = 1e-6
    tanh_before_pool: bool = True
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "conv_channels", tuple(self.conv_channels))
        object.__setattr__(self, "fc_channels", tuple(self.fc_channels))
        if self.num_classes < 2:
            raise PolyNetError(f"need at least two classes, got {self.num_classes}")
        if self.variant not in VARIANTS:
            raise PolyNetError(
                f"variant must be one of {VARIANTS}, got {self.variant!r}"
            )
        if not self.conv_channels:
            raise PolyNetError("need at least one convolution layer")
        if not 0 <= self.pools <= len(self.conv_channels) - 1:
            raise PolyNetError(
                f"{self.pools} pooling steps do not fit "
                f"{len(self.conv_channels)} convolution layers"
            )

    def to_dict(self) -> dict:
        return {
            "num_classes": self.num_classes,
            "in_channels": self.in_channels,
            "degree": self.degree,
            "variant": self.variant,
            "conv_channels": list(self.conv_channels),
            "fc_channels": list(self.fc_channels),
            "pools": self.pools,
            "ridge": self.ridge,
            "tanh_before_pool": self.tanh_before_pool,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "NetConfig":
        return cls(**data)


@dataclass
class NetworkInput:
    """One multi-resolution sample, finest level first.

    ``adjacencies`` holds one patch table per level (anything exposing
    ``patch_offsets`` and ``patch_indices``, or a plain (offsets, indices)
    pair). ``pools`` holds one PoolMap per transition; pools[i] maps level i
    down to level i + 1.
    """

    features: np.ndarray
    adjacencies: Sequence
    pools: Sequence[PoolMap]
    label: Optional[int] = None
    sample_id: str = ""


def _patch_table(adj):
    if hasattr(adj, "patch_offsets"):
        return adj.patch_offsets, adj.patch_indices
    offsets, indices = adj
    return np.asarray(offsets, dtype=np.int64), np.asarray(indices, dtype=np.int64)


class Network:
    """Trunk + head with a flat parameter vector and explicit tape."""

    def __init__(self, config: NetConfig):
        self.config = config
        squeezed = config.variant == "squeezed"
        self.conv_specs = []
        self.inorms = []
        width = config.in_channels
        for out_width in config.conv_channels:
            self.conv_specs.append(
                ConvLayerSpec(
                    width,
                    out_width,
                    degree=config.degree,
                    squeezed=squeezed,
                    ridge=config.ridge,
                )
            )
            self.inorms.append(InstanceNorm(out_width))
            width = out_width
        self.denses = []
        self.bnorms = []
        for fc_width in config.fc_channels:
            self.denses.append(Dense(width, fc_width))
            self.bnorms.append(BatchNorm(fc_width))
            width = fc_width
        self.head_out = Dense(width, config.num_classes)

        blocks = []
        for i, (conv, norm) in enumerate(zip(self.conv_specs, self.inorms)):
            blocks.append((f"conv{i}", conv))
            blocks.append((f"inorm{i}", norm))
        for j, (dense, bnorm) in enumerate(zip(self.denses, self.bnorms)):
            blocks.append((f"fc{j}", dense))
            blocks.append((f"bnorm{j}", bnorm))
        blocks.append(("fc_out", self.head_out))

        rng = np.random.default_rng(config.seed)
        self._slices = {}
        chunks = []
        start = 0
        for name, block in blocks:
            chunk = block.init_params(rng)
            assert chunk.size == block.param_count
            self._slices[name] = (start, start + chunk.size)
            start += chunk.size
            chunks.append(chunk)
        self.params = np.concatenate(chunks)
        self._tape = None

    # ---- parameter bookkeeping ------------------------------------------

    @property
    def param_count(self) -> int:
        return self.params.size

    @property
    def conv_param_count(self) -> int:
        """Parameters held by the convolution layers alone (the part the
        squeezed variant shrinks)."""
        return sum(spec.param_count for spec in self.conv_specs)

    def view(self, name: str, params: Optional[np.ndarray] = None) -> np.ndarray:
        lo, hi = self._slices[name]
        return (self.params if params is None else params)[lo:hi]

    def buffer_state(self) -> dict:
        out = {}
        for j, bnorm in enumerate(self.bnorms):
            out[f"bnorm{j}.running_mean"] = bnorm.running_mean.copy()
            out[f"bnorm{j}.running_var"] = bnorm.running_var.copy()
        return out

    def set_buffer_state(self, state: dict) -> None:
        for j, bnorm in enumerate(self.bnorms):
            bnorm.running_mean[...] = state[f"bnorm{j}.running_mean"]
            bnorm.running_var[...] = state[f"bnorm{j}.running_var"]

    # ---- forward ----------------------------------------------------------

    def _check_sample(self, sample: NetworkInput):
        feats = np.asarray(sample.features, dtype=np.float64)
        if feats.ndim != 2 or feats.shape[1] != self.config.in_channels:
            raise ShapeMismatchError(
                f"shape mismatch: expected features (V, "
                f"{self.config.in_channels}), got {feats.shape}"
            )
        if len(sample.adjacencies) != self.config.pools + 1:
            raise ShapeMismatchError(
                f"shape mismatch: expected {self.config.pools + 1} adjacency "
                f"levels, got {len(sample.adjacencies)}"
            )
        if len(sample.pools) != self.config.pools:
            raise ShapeMismatchError(
                f"shape mismatch: expected {self.config.pools} pooling maps, "
                f"got {len(sample.pools)}"
            )
        n = feats.shape[0]
        for i in range(self.config.pools + 1):
            offsets, _ = _patch_table(sample.adjacencies[i])
            if offsets.size != n + 1:
                raise ShapeMismatchError(
                    f"shape mismatch: level {i} adjacency covers "
                    f"{offsets.size - 1} vertices, expected {n}"
                )
            if i < self.config.pools:
                pool = sample.pools[i]
                if pool.n_fine != n:
                    raise ShapeMismatchError(
                        f"shape mismatch: pooling map {i} reads {pool.n_fine} "
                        f"fine vertices, expected {n}"
                    )
                n = pool.n_coarse
        return feats

    def _embed_one(self, sample: NetworkInput, record: bool):
        feats = self._check_sample(sample)
        tape = [] if record else None
        x = feats
        for i, (conv, norm) in enumerate(zip(self.conv_specs, self.inorms)):
            level = min(i, self.config.pools)
            offsets, indices = _patch_table(sample.adjacencies[level])
            x, conv_cache = conv_forward(conv, self.view(f"conv{i}"), x, offsets, indices)
            x, norm_cache = norm.forward(self.view(f"inorm{i}"), x)
            act_cache = None
            if self.config.tanh_before_pool:
                x, act_cache = tanh_forward(x)
            pool_source = None
            if i < self.config.pools:
                x, pool_source = poly_pool(x, sample.pools[i])
            if not self.config.tanh_before_pool:
                x, act_cache = tanh_forward(x)
            if record:
                tape.append((conv_cache, norm_cache, act_cache, pool_source))
        embedding, n_last = global_average_pool(x)
        return embedding, (tape, n_last)

    def embed(self, sample: NetworkInput) -> np.ndarray:
        """Evaluation-mode embedding (the global average pooled trunk output)."""
        embedding, _ = self._embed_one(sample, record=False)
        return embedding

    def head_forward(self, embeddings: np.ndarray, train: bool = False):
        """Dense head over a batch of embeddings; returns (logits, tape)."""
        x = np.asarray(embeddings, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.config.conv_channels[-1]:
            raise ShapeMismatchError(
                f"shape mismatch: expected embeddings (B, "
                f"{self.config.conv_channels[-1]}), got {x.shape}"
            )
        tape = [] if train else None
        for j, (dense, bnorm) in enumerate(zip(self.denses, self.bnorms)):
            x, fc_cache = dense.forward(self.view(f"fc{j}"), x)
            x, bn_cache = bnorm.forward(self.view(f"bnorm{j}"), x, train)
            x, relu_cache = relu_forward(x)
            if train:
                tape.append((fc_cache, bn_cache, relu_cache))
        logits, out_cache = self.head_out.forward(self.view("fc_out"), x)
        if train:
            tape.append(out_cache)
        return logits, tape

    def forward(self, batch: Sequence[NetworkInput], train: bool = False) -> np.ndarray:
        """Logits for a batch of samples, shape (len(batch), num_classes)."""
        if not batch:
            raise PolyNetError("forward needs a nonempty batch")
        embeddings = []
        trunk_tapes = []
        for sample in batch:
            embedding, tape = self._embed_one(sample, record=train)
            embeddings.append(embedding)
            trunk_tapes.append(tape)
        embeddings = np.stack(embeddings)
        logits, head_tape = self.head_forward(embeddings, train=train)
        self._tape = (list(batch), trunk_tapes, head_tape) if train else None
        return logits

    # ---- backward ---------------------------------------------------------

    def backward(self, grad_logits: np.ndarray) -> np.ndarray:
        """Gradient of a scalar loss wrt the flat parameter vector.

        Consumes the tape of the most recent training forward.
        """
        if self._tape is None:
            raise PolyNetError(
                "no training tape: run forward(batch, train=True) before backward"
            )
        batch, trunk_tapes, head_tape = self._tape
        self._tape = None
        grad_logits = np.asarray(grad_logits, dtype=np.float64)
        if grad_logits.shape != (len(batch), self.config.num_classes):
            raise ShapeMismatchError(
                f"shape mismatch: expected logits gradient "
                f"{(len(batch), self.config.num_classes)}, got {grad_logits.shape}"
            )
        grad = np.zeros_like(self.params)

        g_params, g = self.head_out.backward(
            self.view("fc_out"), head_tape[-1], grad_logits
        )
        self.view("fc_out", grad)[...] += g_params
        for j in reversed(range(len(self.denses))):
            fc_cache, bn_cache, relu_cache = head_tape[j]
            g = relu_backward(relu_cache, g)
            g_bn, g = self.bnorms[j].backward(bn_cache, g)
            self.view(f"bnorm{j}", grad)[...] += g_bn
            g_fc, g = self.denses[j].backward(self.view(f"fc{j}"), fc_cache, g)
            self.view(f"fc{j}", grad)[...] += g_fc

        for sample, (tape, n_last), g_embed in zip(batch, trunk_tapes, g):
            gx = global_average_pool_backward(n_last, g_embed)
            for i in reversed(range(len(self.conv_specs))):
                conv_cache, norm_cache, act_cache, pool_source = tape[i]
                if not self.config.tanh_before_pool:
                    gx = tanh_backward(act_cache, gx)
                if pool_source is not None:
                    n_fine = sample.pools[i].n_fine
                    gx = poly_pool_backward(gx, pool_source, n_fine)
                if self.config.tanh_before_pool:
                    gx = tanh_backward(act_cache, gx)
                g_norm, gx = self.inorms[i].backward(norm_cache, gx)
                self.view(f"inorm{i}", grad)[...] += g_norm
                g_conv, gx = conv_backward(self.conv_specs[i], conv_cache, gx)
                self.view(f"conv{i}", grad)[...] += g_conv
        return grad
