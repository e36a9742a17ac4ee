"""Command-line surface: dataset synthesis, processing, training,
evaluation, retrieval, the two-scheme ensemble, and a gradient self-check.

Exit codes: 0 success, 1 environment or I/O problem (unreadable input,
refusing to overwrite), 2 contract violation (shape mismatch, bad config,
failed gradient check). ``--json`` swaps the human summary on stdout for a
single JSON document; logs always go to stderr, at the level named by the
``POLYNET_LOG`` environment variable.

``--threads N`` caps the math-library thread pools. The cap is applied by
scanning the command line before heavy imports, because BLAS pools size
themselves at import time; ``--threads 1`` makes runs byte-for-byte
reproducible. The package's own compute is sequential Python, so the flag
never changes results beyond floating-point reduction order inside BLAS.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from pathlib import Path

from .errors import PolyNetError

SCHEMA_VERSION = 1

_THREAD_ENV = (
    "OMP_NUM_THREADS",
    "OPENBLAS_NUM_THREADS",
    "MKL_NUM_THREADS",
    "NUMEXPR_NUM_THREADS",
    "VECLIB_MAXIMUM_THREADS",
)

log = logging.getLogger("polynet.cli")

# train options that may come from a config file, with their defaults;
# command-line flags override file values, which override these
TRAIN_DEFAULTS = {
    "epochs": 30,
    "lr": None,
    "batch": 10,
    "seed": 0,
    "degree": 2,
    "variant": "unsqueezed",
    "conv_channels": [16, 16, 16, 24],
    "fc_channels": [16],
    "val_fraction": 0.2,
    "lr_decay": 0.0,
}


def _cap_threads(argv) -> None:
    value = None
    for i, token in enumerate(argv):
        if token == "--threads" and i + 1 < len(argv):
            value = argv[i + 1]
        elif token.startswith("--threads="):
            value = token.split("=", 1)[1]
    if value is None:
        return
    try:
        n = max(1, int(value))
    except ValueError:
        return  # argparse will reject it with a proper message later
    for name in _THREAD_ENV:
        os.environ[name] = str(n)


def _configure_logging() -> None:
    level_name = os.environ.get("POLYNET_LOG", "info").upper()
    level = getattr(logging, level_name, None)
    if not isinstance(level, int):
        level = logging.INFO
    logging.basicConfig(
        stream=sys.stderr, level=level, format="%(levelname)s %(name)s: %(message)s"
    )


def _jsonable(value):
    """Strict-JSON copy: non-finite floats become null."""
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def _emit(args, payload: dict, human_lines) -> None:
    if args.json:
        document = {"schema_version": SCHEMA_VERSION, **payload}
        print(json.dumps(_jsonable(document), sort_keys=True))
    else:
        for line in human_lines:
            print(line)


def _refuse_existing(path: Path, force: bool) -> None:
    if path.is_dir():
        occupied = any(path.iterdir())
    else:
        occupied = path.exists()
    if not occupied:
        return
    if not force:
        raise FileExistsError(f"output exists: {path} (pass --force to replace)")
    import shutil

    if path.is_dir():
        shutil.rmtree(path)
    else:
        path.unlink()


def _parse_widths(value):
    """Channel widths from a flag ("16,32,64") or a config list ([16, 32])."""
    if isinstance(value, (list, tuple)):
        tokens = list(value)
    else:
        tokens = [tok for tok in str(value).replace(" ", "").split(",") if tok]
    try:
        widths = [int(tok) for tok in tokens]
    except (TypeError, ValueError):
        raise PolyNetError(f"bad channel list {value!r}; expected e.g. 16,32,64")
    if not widths or min(widths) < 1:
        raise PolyNetError(f"bad channel list {value!r}; widths must be positive")
    return widths


def _load_split(root: Path, split: str):
    """Open either dataset flavor; returns (inputs, class_names)."""
    manifest_path = root / "manifest.json"
    if not manifest_path.is_file():
        raise FileNotFoundError(f"no manifest under {root}")
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    if "scheme" in manifest:  # processed mesh tree
        from .tasks import load_processed_dataset

        return load_processed_dataset(root, split)
    from .tasks import load_graph_dataset

    samples = load_graph_dataset(root, split)
    n_classes = 1 + max(
        entry["label"] for entries in manifest["splits"].values() for entry in entries
    )
    inputs = [g.to_network_input() for g in samples]
    return inputs, [str(k) for k in range(n_classes)]


# ---- commands --------------------------------------------------------------


def cmd_synth_meshes(args) -> int:
    from .tasks import synthesize_mesh_dataset

    out = Path(args.out)
    _refuse_existing(out, args.force)
    paths = synthesize_mesh_dataset(
        out, n_train=args.train, n_test=args.test, seed=args.seed
    )
    counts = {c: {s: len(v) for s, v in per.items()} for c, per in paths.items()}
    _emit(
        args,
        {"command": "synth-meshes", "out": str(out), "counts": counts},
        [f"wrote {sum(sum(s.values()) for s in counts.values())} meshes under {out}"],
    )
    return 0


def cmd_synth_graphs(args) -> int:
    from .tasks import synthesize_graph_dataset

    out = Path(args.out)
    _refuse_existing(out, args.force)
    manifest = synthesize_graph_dataset(
        out, n_train=args.train, n_test=args.test, seed=args.seed
    )
    counts = {s: len(v) for s, v in manifest["splits"].items()}
    _emit(
        args,
        {"command": "synth-graphs", "out": str(out), "counts": counts},
        [f"wrote {counts} superpixel graphs under {out}"],
    )
    return 0


def cmd_process(args) -> int:
    from .tasks import process_mesh_dataset

    out = Path(args.out)
    _refuse_existing(out, args.force)
    schemes = ["ptq", "sqrt3"] if args.scheme == "both" else [args.scheme]
    results = {}
    for scheme in schemes:
        target = out / scheme if args.scheme == "both" else out
        manifest = process_mesh_dataset(
            Path(args.input),
            target,
            scheme=scheme,
            levels=args.levels,
            coarse_target=args.coarse,
        )
        results[scheme] = {
            "out": str(target),
            "n_ok": manifest["n_ok"],
            "n_failed": manifest["n_failed"],
        }
    lines = [
        f"{scheme}: {r['n_ok']} ok, {r['n_failed']} failed -> {r['out']}"
        for scheme, r in results.items()
    ]
    _emit(args, {"command": "process", "schemes": results}, lines)
    return 0


def _train_settings(args) -> dict:
    settings = dict(TRAIN_DEFAULTS)
    if args.config:
        raw = json.loads(Path(args.config).read_text(encoding="utf-8"))
        unknown = sorted(set(raw) - set(TRAIN_DEFAULTS))
        if unknown:
            raise PolyNetError(
                f"unknown config keys {unknown}; valid: {sorted(TRAIN_DEFAULTS)}"
            )
        settings.update(raw)
    for key in TRAIN_DEFAULTS:
        flag = getattr(args, key, None)
        if flag is not None:
            settings[key] = flag
    settings["conv_channels"] = _parse_widths(settings["conv_channels"])
    settings["fc_channels"] = _parse_widths(settings["fc_channels"])
    return settings


def cmd_train(args) -> int:
    from .nn import NetConfig
    from .tasks import render_training_curves, train_network

    settings = _train_settings(args)
    inputs, classes = _load_split(Path(args.data), "train")
    sample = inputs[0]
    config = NetConfig(
        num_classes=len(classes),
        in_channels=sample.features.shape[1],
        degree=settings["degree"],
        variant=settings["variant"],
        conv_channels=tuple(settings["conv_channels"]),
        fc_channels=tuple(settings["fc_channels"]),
        pools=len(sample.pools),
        seed=settings["seed"],
    )
    ckpt = Path(args.out)
    metrics_path = ckpt.parent / "metrics.csv"
    result = train_network(
        inputs,
        config,
        epochs=settings["epochs"],
        lr=settings["lr"],
        batch_size=settings["batch"],
        seed=settings["seed"],
        val_fraction=settings["val_fraction"],
        lr_decay=settings["lr_decay"],
        checkpoint_path=ckpt,
        metrics_path=metrics_path,
    )
    payload = {
        "command": "train",
        "checkpoint": str(ckpt),
        "metrics": str(metrics_path),
        "epochs": settings["epochs"],
        "best_epoch": result.best_epoch,
        "best_score": result.best_score,
        "classes": classes,
    }
    lines = [
        f"trained {settings['epochs']} epochs on {len(inputs)} samples",
        f"best epoch {result.best_epoch} (selection score {result.best_score:.4f})",
        f"checkpoint -> {ckpt}",
        f"metrics    -> {metrics_path}",
    ]
    if result.metrics:
        curves = ckpt.parent / "curves.png"
        render_training_curves(metrics_path, curves)
        payload["curves"] = str(curves)
        lines.append(f"curves     -> {curves}")
    _emit(args, payload, lines)
    return 0


def cmd_eval(args) -> int:
    from .nn import load_checkpoint
    from .tasks import (
        classification_metrics,
        max_vote_metrics,
        predict,
        render_confusion_matrix,
        write_predictions,
    )

    network, _, _ = load_checkpoint(args.checkpoint)
    inputs, classes = _load_split(Path(args.data), args.split)
    logits, labels, ids = predict(network, inputs)
    metrics = classification_metrics(labels, logits)
    voted = max_vote_metrics(ids, labels, logits)
    payload = {
        "command": "eval",
        "split": args.split,
        "n_samples": metrics["n_samples"],
        "accuracy": metrics["accuracy"],
        "per_class": dict(zip(classes, metrics["per_class"])),
        "max_vote_accuracy": voted["accuracy"],
    }
    lines = [
        f"accuracy {metrics['accuracy']:.4f} on {metrics['n_samples']} "
        f"{args.split} samples (max-vote {voted['accuracy']:.4f})"
    ]
    lines += [
        f"  {name:<12} {acc:.4f}"
        for name, acc in zip(classes, metrics["per_class"])
    ]
    if args.out:
        out = Path(args.out)
        pred_csv = out / "predictions.csv"
        write_predictions(pred_csv, ids, labels, logits)
        conf_png = out / "confusion.png"
        render_confusion_matrix(pred_csv, conf_png, class_names=classes)
        payload["predictions_csv"] = str(pred_csv)
        payload["confusion_png"] = str(conf_png)
        lines += [f"predictions -> {pred_csv}", f"confusion   -> {conf_png}"]
    _emit(args, payload, lines)
    return 0


def cmd_retrieve(args) -> int:
    from .nn import load_checkpoint
    from .tasks import (
        descriptors_from_logits,
        predict,
        render_retrieval_summary,
        retrieve,
    )

    network, _, _ = load_checkpoint(args.checkpoint)
    queries, _ = _load_split(Path(args.data), args.query_split)
    gallery, _ = _load_split(Path(args.data), args.gallery_split)
    q_logits, q_labels, q_ids = predict(network, queries)
    g_logits, g_labels, _ = predict(network, gallery)
    result = retrieve(
        descriptors_from_logits(q_logits),
        descriptors_from_logits(g_logits),
        q_labels,
        g_labels,
    )
    payload = {
        "command": "retrieve",
        "query_split": args.query_split,
        "gallery_split": args.gallery_split,
        "n_queries": len(queries),
        "n_gallery": len(gallery),
        "mean_ap": result.mean_ap,
    }
    lines = [
        f"mAP {result.mean_ap:.4f} over {len(queries)} queries "
        f"against {len(gallery)} gallery items"
    ]
    if args.out:
        import csv

        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        ap_csv = out / "retrieval.csv"
        with ap_csv.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["query_id", "label", "ap"])
            for sid, label, ap in zip(q_ids, q_labels, result.ap):
                writer.writerow([sid, int(label), repr(float(ap))])
        ret_png = out / "retrieval.png"
        render_retrieval_summary(result, ret_png)
        payload["retrieval_csv"] = str(ap_csv)
        payload["retrieval_png"] = str(ret_png)
        lines += [f"per-query AP -> {ap_csv}", f"histogram    -> {ret_png}"]
    _emit(args, payload, lines)
    return 0


def cmd_ensemble(args) -> int:
    from .nn import load_checkpoint
    from .tasks import (
        descriptors_from_logits,
        ensemble_eval,
        ensemble_logits,
        retrieve,
    )

    net_ptq, _, _ = load_checkpoint(args.checkpoint_ptq)
    net_sqrt3, _, _ = load_checkpoint(args.checkpoint_sqrt3)
    test_ptq, classes = _load_split(Path(args.data_ptq), args.split)
    test_sqrt3, _ = _load_split(Path(args.data_sqrt3), args.split)
    metrics = ensemble_eval(net_ptq, net_sqrt3, test_ptq, test_sqrt3, head=args.head)
    payload = {
        "command": "ensemble",
        "split": args.split,
        "head": args.head,
        "accuracy": metrics["accuracy"],
        "per_class": dict(zip(classes, metrics["per_class"])),
    }
    lines = [
        f"ensemble accuracy {metrics['accuracy']:.4f} on "
        f"{metrics['n_samples']} {args.split} samples (head: {args.head})"
    ]
    gallery_split = "train"
    try:
        gal_ptq, _ = _load_split(Path(args.data_ptq), gallery_split)
        gal_sqrt3, _ = _load_split(Path(args.data_sqrt3), gallery_split)
    except (FileNotFoundError, PolyNetError):
        log.info("no %s split for a retrieval gallery; skipping mAP", gallery_split)
    else:
        import numpy as np

        q_desc = descriptors_from_logits(metrics["logits"])
        g_desc = descriptors_from_logits(
            ensemble_logits(net_ptq, net_sqrt3, gal_ptq, gal_sqrt3, head=args.head)
        )
        q_labels = np.array([s.label for s in test_sqrt3])
        g_labels = np.array([s.label for s in gal_sqrt3])
        result = retrieve(q_desc, g_desc, q_labels, g_labels)
        payload["mean_ap"] = result.mean_ap
        lines.append(
            f"ensemble mAP {result.mean_ap:.4f} ({args.split} queries vs "
            f"{gallery_split} gallery)"
        )
    _emit(args, payload, lines)
    return 0


def cmd_gradcheck(args) -> int:
    from .nn import check_conv_gradients, check_network_gradients

    variants = (
        ("unsqueezed", "squeezed") if args.variant == "both" else (args.variant,)
    )
    degrees = (2, 4) if args.degree == "both" else (int(args.degree),)
    checks = {}
    worst = 0.0
    for variant in variants:
        for degree in degrees:
            conv_err = check_conv_gradients(
                degree=degree, squeezed=variant == "squeezed", seed=args.seed
            )
            net_err = check_network_gradients(
                variant=variant, degree=degree, seed=args.seed
            )
            checks[f"conv/{variant}/d{degree}"] = conv_err
            checks[f"network/{variant}/d{degree}"] = net_err
            worst = max(worst, conv_err, net_err)
    passed = worst < 1e-4
    payload = {
        "command": "gradcheck",
        "checks": checks,
        "max_relative_error": worst,
        "tolerance": 1e-4,
        "passed": passed,
    }
    lines = [f"  {name:<24} {err:.3e}" for name, err in checks.items()]
    lines.append(
        f"max relative error {worst:.3e} "
        f"({'PASS' if passed else 'FAIL'} at 1e-4)"
    )
    _emit(args, payload, lines)
    return 0 if passed else 2


# ---- parser ----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="polynet",
        description="Polynomial-PDF graph convolutions on meshes and graphs.",
    )
    from . import __version__

    parser.add_argument("--version", action="version", version=f"polynet {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, force=False):
        p.add_argument("--json", action="store_true", help="machine output on stdout")
        p.add_argument(
            "--threads",
            type=int,
            default=None,
            help="cap math-library threads (1 = fully deterministic)",
        )
        if force:
            p.add_argument(
                "--force", action="store_true", help="replace existing output"
            )

    p = sub.add_parser("synth-meshes", help="generate the toy 3-class mesh dataset")
    p.add_argument("out")
    p.add_argument("--train", type=int, default=20, help="meshes per class")
    p.add_argument("--test", type=int, default=10, help="meshes per class")
    p.add_argument("--seed", type=int, default=0)
    common(p, force=True)
    p.set_defaults(func=cmd_synth_meshes)

    p = sub.add_parser("synth-graphs", help="generate superpixel digit graphs")
    p.add_argument("out")
    p.add_argument("--train", type=int, default=200, help="total training graphs")
    p.add_argument("--test", type=int, default=50, help="total test graphs")
    p.add_argument("--seed", type=int, default=0)
    common(p, force=True)
    p.set_defaults(func=cmd_synth_graphs)

    p = sub.add_parser("process", help="build multi-resolution shapes from meshes")
    p.add_argument("input", help="raw dataset root (class/{train,test}/*.off)")
    p.add_argument("out")
    p.add_argument("--scheme", choices=("ptq", "sqrt3", "both"), default="sqrt3")
    p.add_argument("--levels", type=int, default=3)
    p.add_argument("--coarse", type=int, default=400, help="base-level vertex budget")
    common(p, force=True)
    p.set_defaults(func=cmd_process)

    p = sub.add_parser("train", help="train a classifier on a processed dataset")
    p.add_argument("data", help="processed mesh tree or graph dataset root")
    p.add_argument("--out", default="checkpoint.json", help="checkpoint path")
    p.add_argument("--config", help="JSON file with training settings")
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--batch", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--degree", type=int, choices=(2, 4), default=None)
    p.add_argument("--variant", choices=("unsqueezed", "squeezed"), default=None)
    p.add_argument("--conv-channels", dest="conv_channels", default=None)
    p.add_argument("--fc-channels", dest="fc_channels", default=None)
    p.add_argument("--val-fraction", dest="val_fraction", type=float, default=None)
    p.add_argument(
        "--lr-decay",
        dest="lr_decay",
        type=float,
        default=None,
        help="linear step-size anneal over the run (0 = constant)",
    )
    common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="score a checkpoint on a dataset split")
    p.add_argument("checkpoint")
    p.add_argument("data")
    p.add_argument("--split", default="test")
    p.add_argument("--out", help="directory for predictions.csv and confusion.png")
    common(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("retrieve", help="L1 retrieval with mean average precision")
    p.add_argument("checkpoint")
    p.add_argument("data")
    p.add_argument("--query-split", dest="query_split", default="test")
    p.add_argument("--gallery-split", dest="gallery_split", default="train")
    p.add_argument("--out", help="directory for retrieval.csv and retrieval.png")
    common(p)
    p.set_defaults(func=cmd_retrieve)

    p = sub.add_parser(
        "ensemble", help="average PTQ and sqrt3 trunk features, score once"
    )
    p.add_argument("checkpoint_ptq")
    p.add_argument("checkpoint_sqrt3")
    p.add_argument("data_ptq")
    p.add_argument("data_sqrt3")
    p.add_argument("--split", default="test")
    p.add_argument("--head", choices=("sqrt3", "ptq"), default="sqrt3")
    common(p)
    p.set_defaults(func=cmd_ensemble)

    p = sub.add_parser("gradcheck", help="finite-difference gradient self-check")
    p.add_argument(
        "--variant", choices=("unsqueezed", "squeezed", "both"), default="both"
    )
    p.add_argument("--degree", choices=("2", "4", "both"), default="2")
    p.add_argument("--seed", type=int, default=0)
    common(p)
    p.set_defaults(func=cmd_gradcheck)

    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    _cap_threads(argv)
    _configure_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except PolyNetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileExistsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (FileNotFoundError, NotADirectoryError, PermissionError, IsADirectoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except json.JSONDecodeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
