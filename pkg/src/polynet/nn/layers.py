"""Dense and normalization layers with explicit forward/backward passes.

Every layer works on plain float64 arrays and a flat parameter slice, so the
network can keep one contiguous parameter vector and hand each layer a view.
Forward passes return ``(output, cache)`` and the matching backward takes
``(cache, upstream)`` and returns ``(grad_params, grad_input)``.
"""

from __future__ import annotations

import numpy as np

from ..errors import PolyNetError


class InstanceNorm:
    """Per-channel normalization over the vertex axis of a single sample.

    Uses the biased variance and a learned affine rescale, so each channel of
    each sample leaves with mean beta and spread gamma regardless of mesh
    size or feature scale.
    """

    def __init__(self, channels: int, eps: float = 1e-5):
        self.channels = channels
        self.eps = eps

    @property
    def param_count(self) -> int:
        return 2 * self.channels

    def init_params(self, rng=None) -> np.ndarray:
        return np.concatenate([np.ones(self.channels), np.zeros(self.channels)])

    def forward(self, params, x):
        gamma = params[: self.channels]
        beta = params[self.channels :]
        mean = x.mean(axis=0)
        var = x.var(axis=0)
        inv = 1.0 / np.sqrt(var + self.eps)
        xhat = (x - mean) * inv
        return gamma * xhat + beta, (xhat, inv, gamma)

    def backward(self, cache, grad):
        xhat, inv, gamma = cache
        n = xhat.shape[0]
        g_gamma = (grad * xhat).sum(axis=0)
        g_beta = grad.sum(axis=0)
        gx = (gamma * inv / n) * (n * grad - g_beta - xhat * g_gamma)
        return np.concatenate([g_gamma, g_beta]), gx


class BatchNorm:
    """Batch normalization over the sample axis with running statistics.

    Training normalizes with the biased batch variance and folds the
    unbiased variance into the running buffers; evaluation normalizes with
    the buffers alone. A training batch of one sample has no variance to
    speak of and is rejected.
    """

    def __init__(self, channels: int, eps: float = 1e-5, momentum: float = 0.1):
        self.channels = channels
        self.eps = eps
        self.momentum = momentum
        self.running_mean = np.zeros(channels)
        self.running_var = np.ones(channels)

    @property
    def param_count(self) -> int:
        return 2 * self.channels

    def init_params(self, rng=None) -> np.ndarray:
        return np.concatenate([np.ones(self.channels), np.zeros(self.channels)])

    def forward(self, params, x, train: bool):
        gamma = params[: self.channels]
        beta = params[self.channels :]
        if train:
            n = x.shape[0]
            if n < 2:
                raise PolyNetError(
                    "batch normalization needs at least two samples per "
                    "training batch"
                )
            mean = x.mean(axis=0)
            var = x.var(axis=0)
            m = self.momentum
            self.running_mean *= 1.0 - m
            self.running_mean += m * mean
            self.running_var *= 1.0 - m
            self.running_var += m * var * (n / (n - 1.0))
            inv = 1.0 / np.sqrt(var + self.eps)
            xhat = (x - mean) * inv
            return gamma * xhat + beta, (xhat, inv, gamma)
        inv = 1.0 / np.sqrt(self.running_var + self.eps)
        xhat = (x - self.running_mean) * inv
        return gamma * xhat + beta, None

    def backward(self, cache, grad):
        if cache is None:
            raise PolyNetError(
                "no training tape: batch normalization ran in evaluation mode"
            )
        xhat, inv, gamma = cache
        n = xhat.shape[0]
        g_gamma = (grad * xhat).sum(axis=0)
        g_beta = grad.sum(axis=0)
        gx = (gamma * inv / n) * (n * grad - g_beta - xhat * g_gamma)
        return np.concatenate([g_gamma, g_beta]), gx


class Dense:
    """Affine map x @ W + b with Glorot-normal weight initialization."""

    def __init__(self, in_features: int, out_features: int):
        self.in_features = in_features
        self.out_features = out_features

    @property
    def param_count(self) -> int:
        return self.in_features * self.out_features + self.out_features

    def init_params(self, rng: np.random.Generator) -> np.ndarray:
        std = np.sqrt(2.0 / (self.in_features + self.out_features))
        w = rng.normal(0.0, std, size=(self.in_features, self.out_features))
        return np.concatenate([w.ravel(), np.zeros(self.out_features)])

    def split(self, params):
        n = self.in_features * self.out_features
        return params[:n].reshape(self.in_features, self.out_features), params[n:]

    def forward(self, params, x):
        w, b = self.split(params)
        return x @ w + b, x

    def backward(self, params, cache, grad):
        w, _ = self.split(params)
        x = cache
        g_w = x.T @ grad
        g_b = grad.sum(axis=0)
        return np.concatenate([g_w.ravel(), g_b]), grad @ w.T


def tanh_forward(x):
    out = np.tanh(x)
    return out, out


def tanh_backward(cache, grad):
    return grad * (1.0 - cache * cache)


def relu_forward(x):
    return np.maximum(x, 0.0), x > 0.0


def relu_backward(cache, grad):
    return grad * cache


def global_average_pool(x):
    """(V, C) -> (C,), averaging over vertices."""
    return x.mean(axis=0), x.shape[0]


def global_average_pool_backward(n_vertices, grad):
    return np.broadcast_to(grad / n_vertices, (n_vertices, grad.shape[0])).copy()
