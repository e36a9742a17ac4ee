"""Cross-entropy over logits, numerically stabilized."""

from __future__ import annotations

import numpy as np

from ..errors import ShapeMismatchError


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax with max subtraction."""
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def cross_entropy(logits: np.ndarray, labels: np.ndarray):
    """Mean negative log-likelihood and its gradient wrt the logits.

    Returns ``(loss, grad)`` where grad is (softmax - onehot) / batch, the
    exact gradient of the mean loss.
    """
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if logits.ndim != 2 or labels.shape != (logits.shape[0],):
        raise ShapeMismatchError(
            f"shape mismatch: logits {logits.shape} vs labels {labels.shape}"
        )
    n, k = logits.shape
    if labels.min() < 0 or labels.max() >= k:
        raise ShapeMismatchError(
            f"shape mismatch: labels must lie in [0, {k}), got "
            f"[{labels.min()}, {labels.max()}]"
        )
    z = logits - logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(z).sum(axis=1, keepdims=True))
    log_probs = z - log_norm
    loss = -float(log_probs[np.arange(n), labels].mean())
    grad = np.exp(log_probs)
    grad[np.arange(n), labels] -= 1.0
    grad /= n
    return loss, grad
