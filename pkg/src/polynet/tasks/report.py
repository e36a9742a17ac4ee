"""Figure rendering for training and evaluation outputs.

Every CSV the drivers emit gets a PNG sibling: training curves next to the
metrics log, a confusion matrix next to the prediction dump, and a
precision profile next to retrieval scores. Rendering is headless (Agg)
and file-to-file so it composes with the CLI without a display.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from ..errors import PolyNetError
from .evaluate import RetrievalResult, read_predictions
from .train import read_metrics


def render_training_curves(metrics_path, out_path) -> Path:
    """Loss and accuracy per epoch, train and validation side by side."""
    rows = read_metrics(metrics_path)
    if not rows:
        raise PolyNetError(f"{metrics_path} holds no epochs to plot")
    epochs = [r["epoch"] for r in rows]
    fig, (ax_loss, ax_acc) = plt.subplots(1, 2, figsize=(9, 3.5))
    ax_loss.plot(epochs, [r["train_loss"] for r in rows], label="train")
    ax_acc.plot(epochs, [r["train_acc"] for r in rows], label="train")
    if rows[0]["val_loss"] is not None:
        ax_loss.plot(epochs, [r["val_loss"] for r in rows], label="validation")
        ax_acc.plot(epochs, [r["val_acc"] for r in rows], label="validation")
    ax_loss.set_xlabel("epoch")
    ax_loss.set_ylabel("cross-entropy")
    ax_acc.set_xlabel("epoch")
    ax_acc.set_ylabel("accuracy")
    ax_acc.set_ylim(0.0, 1.02)
    ax_loss.legend()
    fig.tight_layout()
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out_path, dpi=120)
    plt.close(fig)
    return out_path


def render_confusion_matrix(predictions_path, out_path, class_names=None) -> Path:
    """Row-normalized confusion matrix from a prediction dump."""
    _, labels, preds, logits = read_predictions(predictions_path)
    n_classes = logits.shape[1]
    matrix = np.zeros((n_classes, n_classes))
    for label, pred in zip(labels, preds):
        matrix[label, pred] += 1
    row_sums = matrix.sum(axis=1, keepdims=True)
    shown = np.divide(matrix, row_sums, out=np.zeros_like(matrix), where=row_sums > 0)

    fig, ax = plt.subplots(figsize=(4.5, 4.0))
    image = ax.imshow(shown, vmin=0.0, vmax=1.0, cmap="viridis")
    fig.colorbar(image, ax=ax, fraction=0.046)
    names = class_names if class_names else [str(k) for k in range(n_classes)]
    ax.set_xticks(range(n_classes), names, rotation=45, ha="right")
    ax.set_yticks(range(n_classes), names)
    ax.set_xlabel("predicted")
    ax.set_ylabel("true")
    for i in range(n_classes):
        for j in range(n_classes):
            if matrix[i, j]:
                ax.text(
                    j,
                    i,
                    f"{int(matrix[i, j])}",
                    ha="center",
                    va="center",
                    color="white" if shown[i, j] < 0.5 else "black",
                    fontsize=8,
                )
    fig.tight_layout()
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out_path, dpi=120)
    plt.close(fig)
    return out_path


def render_retrieval_summary(result: RetrievalResult, out_path) -> Path:
    """Histogram of per-query average precision with the mAP marked."""
    ap = np.asarray(result.ap, dtype=np.float64)
    finite = ap[np.isfinite(ap)]
    fig, ax = plt.subplots(figsize=(5.0, 3.5))
    if finite.size:
        ax.hist(finite, bins=np.linspace(0.0, 1.0, 21), edgecolor="black")
        ax.axvline(
            result.mean_ap,
            color="crimson",
            linestyle="--",
            label=f"mAP = {result.mean_ap:.3f}",
        )
        ax.legend()
    ax.set_xlabel("average precision")
    ax.set_ylabel("queries")
    fig.tight_layout()
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out_path, dpi=120)
    plt.close(fig)
    return out_path
