"""Evaluation drivers: classification metrics, prediction dumps, L1
retrieval with mean average precision, and the two-scheme ensemble."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from ..errors import PolyNetError, ShapeMismatchError
from ..nn import Network, NetworkInput, softmax


def predict(
    network: Network, inputs: Sequence[NetworkInput], batch_size: int = 32
):
    """Evaluation-mode logits for a sample list.

    Returns (logits, labels, sample_ids); labels is None-free only when every
    sample carries one, otherwise the missing entries are -1.
    """
    if not inputs:
        raise PolyNetError("predict needs at least one sample")
    chunks = []
    for lo in range(0, len(inputs), batch_size):
        chunks.append(network.forward(inputs[lo : lo + batch_size], train=False))
    logits = np.vstack(chunks)
    labels = np.array(
        [-1 if s.label is None else int(s.label) for s in inputs], dtype=np.int64
    )
    ids = [s.sample_id for s in inputs]
    return logits, labels, ids


def predicted_classes(logits: np.ndarray) -> np.ndarray:
    """Argmax per row; ties resolve to the lowest class index."""
    return np.argmax(np.asarray(logits, dtype=np.float64), axis=1)


def classification_metrics(labels, logits) -> dict:
    """Per-instance accuracy plus per-class accuracies.

    Classes absent from ``labels`` get ``nan`` so the caller can tell
    "never tested" from "always wrong".
    """
    labels = np.asarray(labels, dtype=np.int64)
    logits = np.asarray(logits, dtype=np.float64)
    if logits.ndim != 2 or labels.shape != (logits.shape[0],):
        raise ShapeMismatchError(
            f"shape mismatch: labels {labels.shape} vs logits {logits.shape}"
        )
    preds = predicted_classes(logits)
    correct = preds == labels
    n_classes = logits.shape[1]
    per_class = np.full(n_classes, np.nan)
    for k in range(n_classes):
        mask = labels == k
        if mask.any():
            per_class[k] = float(np.mean(correct[mask]))
    return {
        "accuracy": float(np.mean(correct)),
        "per_class": per_class.tolist(),
        "n_samples": int(labels.size),
        "predictions": preds,
    }


def max_vote_metrics(sample_ids, labels, logits) -> dict:
    """Accuracy after majority-voting instances that share a sample id.

    Datasets that process one source shape into several instances (for
    example one per subdivision scheme) score each id once: the group's
    prediction is the most common per-instance argmax, ties to the lowest
    class. With unique ids this reduces to per-instance accuracy.
    """
    labels = np.asarray(labels, dtype=np.int64)
    preds = predicted_classes(logits)
    n_classes = np.asarray(logits).shape[1]
    groups: dict = {}
    for sid, label, pred in zip(sample_ids, labels, preds):
        groups.setdefault(sid, (int(label), []))[1].append(int(pred))
    correct = 0
    for label, votes in groups.values():
        counts = np.bincount(votes, minlength=n_classes)
        if label == int(np.argmax(counts)):
            correct += 1
    return {"accuracy": correct / len(groups), "n_groups": len(groups)}


# ---- prediction dumps ------------------------------------------------------


def write_predictions(path, sample_ids, labels, logits) -> None:
    """CSV dump: sample_id,label,pred,logit_0..logit_{K-1}.

    Logits are written with ``repr`` so a read-back is bitwise exact.
    """
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    preds = predicted_classes(logits)
    n_classes = logits.shape[1]
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["sample_id", "label", "pred"]
            + [f"logit_{k}" for k in range(n_classes)]
        )
        for sid, label, pred, row in zip(sample_ids, labels, preds, logits):
            writer.writerow(
                [sid, int(label), int(pred)] + [repr(float(v)) for v in row]
            )


def read_predictions(path):
    """Inverse of write_predictions: (sample_ids, labels, preds, logits)."""
    with Path(path).open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    header = rows[0]
    n_classes = len(header) - 3
    if n_classes < 1 or header[:3] != ["sample_id", "label", "pred"]:
        raise PolyNetError(f"{path} is not a prediction dump")
    ids = [r[0] for r in rows[1:]]
    labels = np.array([int(r[1]) for r in rows[1:]], dtype=np.int64)
    preds = np.array([int(r[2]) for r in rows[1:]], dtype=np.int64)
    logits = np.array([[float(v) for v in r[3:]] for r in rows[1:]])
    return ids, labels, preds, logits


# ---- retrieval -------------------------------------------------------------


@dataclass
class RetrievalResult:
    """Ranked gallery per query plus average precision scores.

    ``order[q]`` lists gallery indices from nearest to farthest;
    ``ap[q]`` is nan for queries with no relevant gallery item, and
    ``mean_ap`` averages over the remaining queries.
    """

    order: np.ndarray
    distances: np.ndarray
    ap: np.ndarray
    mean_ap: float


def descriptors_from_logits(logits: np.ndarray) -> np.ndarray:
    """Retrieval descriptor: the softmax class distribution."""
    return softmax(np.asarray(logits, dtype=np.float64))


def l1_rank(query_desc: np.ndarray, gallery_desc: np.ndarray):
    """Sort the gallery by L1 distance to each query, ties by gallery index."""
    query_desc = np.asarray(query_desc, dtype=np.float64)
    gallery_desc = np.asarray(gallery_desc, dtype=np.float64)
    if gallery_desc.size == 0:
        raise PolyNetError("retrieval gallery is empty")
    if query_desc.shape[1] != gallery_desc.shape[1]:
        raise ShapeMismatchError(
            f"shape mismatch: query width {query_desc.shape[1]} vs gallery "
            f"width {gallery_desc.shape[1]}"
        )
    dist = np.abs(query_desc[:, None, :] - gallery_desc[None, :, :]).sum(axis=2)
    order = np.argsort(dist, axis=1, kind="stable")
    return order, np.take_along_axis(dist, order, axis=1)


def average_precision(relevant_in_rank_order: np.ndarray) -> float:
    """Mean of precision@k over the ranks k holding a relevant item."""
    rel = np.asarray(relevant_in_rank_order, dtype=bool)
    if not rel.any():
        return float("nan")
    precision = np.cumsum(rel) / np.arange(1, rel.size + 1)
    return float(np.mean(precision[rel]))


def retrieve(
    query_desc,
    gallery_desc,
    query_labels=None,
    gallery_labels=None,
) -> RetrievalResult:
    """Rank the gallery for each query; score AP when labels are given."""
    order, distances = l1_rank(query_desc, gallery_desc)
    n_queries = order.shape[0]
    ap = np.full(n_queries, np.nan)
    if query_labels is not None and gallery_labels is not None:
        query_labels = np.asarray(query_labels, dtype=np.int64)
        gallery_labels = np.asarray(gallery_labels, dtype=np.int64)
        for q in range(n_queries):
            rel = gallery_labels[order[q]] == query_labels[q]
            ap[q] = average_precision(rel)
    with np.errstate(invalid="ignore"):
        mean_ap = float(np.nanmean(ap)) if np.any(np.isfinite(ap)) else float("nan")
    return RetrievalResult(order=order, distances=distances, ap=ap, mean_ap=mean_ap)


def retrieval_eval(
    network: Network,
    queries: Sequence[NetworkInput],
    gallery: Sequence[NetworkInput],
    batch_size: int = 32,
) -> RetrievalResult:
    """End-to-end retrieval: logits, softmax descriptors, L1 ranking, mAP."""
    q_logits, q_labels, _ = predict(network, queries, batch_size)
    g_logits, g_labels, _ = predict(network, gallery, batch_size)
    return retrieve(
        descriptors_from_logits(q_logits),
        descriptors_from_logits(g_logits),
        q_labels,
        g_labels,
    )


# ---- two-scheme ensemble ---------------------------------------------------

ENSEMBLE_HEADS = ("sqrt3", "ptq")


def ensemble_logits(
    network_ptq: Network,
    network_sqrt3: Network,
    inputs_ptq: Sequence[NetworkInput],
    inputs_sqrt3: Sequence[NetworkInput],
    head: str = "sqrt3",
) -> np.ndarray:
    """Average the pooled trunk features of both networks, then apply one
    network's dense head.

    The two input lists must pair up element-wise (same source shape
    processed under each scheme). The head defaults to the sqrt3 model's;
    pass ``head="ptq"`` for the alternative.
    """
    if head not in ENSEMBLE_HEADS:
        raise PolyNetError(f"unknown ensemble head {head!r}")
    if len(inputs_ptq) != len(inputs_sqrt3) or not inputs_ptq:
        raise ShapeMismatchError(
            f"shape mismatch: {len(inputs_ptq)} ptq inputs vs "
            f"{len(inputs_sqrt3)} sqrt3 inputs"
        )
    width_ptq = network_ptq.config.conv_channels[-1]
    width_sqrt3 = network_sqrt3.config.conv_channels[-1]
    if width_ptq != width_sqrt3:
        raise ShapeMismatchError(
            f"shape mismatch: trunk widths differ ({width_ptq} vs {width_sqrt3})"
        )
    emb = np.stack(
        [
            0.5 * (network_ptq.embed(a) + network_sqrt3.embed(b))
            for a, b in zip(inputs_ptq, inputs_sqrt3)
        ]
    )
    head_net = network_sqrt3 if head == "sqrt3" else network_ptq
    logits, _ = head_net.head_forward(emb, train=False)
    return logits


def ensemble_eval(
    network_ptq: Network,
    network_sqrt3: Network,
    inputs_ptq: Sequence[NetworkInput],
    inputs_sqrt3: Sequence[NetworkInput],
    head: str = "sqrt3",
) -> dict:
    """Classification metrics for the averaged-feature ensemble."""
    logits = ensemble_logits(
        network_ptq, network_sqrt3, inputs_ptq, inputs_sqrt3, head
    )
    labels = np.array(
        [-1 if s.label is None else int(s.label) for s in inputs_sqrt3],
        dtype=np.int64,
    )
    metrics = classification_metrics(labels, logits)
    metrics["logits"] = logits
    return metrics
