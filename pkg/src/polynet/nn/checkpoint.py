"""Single-file JSON checkpoints with bitwise-exact parameter round trips.

Parameters and buffers are stored as base64-encoded little-endian float64
bytes, so a load reproduces the saved network exactly, down to the last bit.
The architecture travels with the weights; a hash of the canonical config
JSON guards against a checkpoint edited out from under its weights.
"""

from __future__ import annotations

import base64
import hashlib
import json
from pathlib import Path
from typing import Optional

import numpy as np

from ..errors import PolyNetError, ShapeMismatchError
from .adam import Adam
from .network import NetConfig, Network

SCHEMA_VERSION = 1


def _encode(arr: np.ndarray) -> str:
    return base64.b64encode(np.ascontiguousarray(arr, dtype="<f8").tobytes()).decode(
        "ascii"
    )


def _decode(text: str, expected: int, what: str) -> np.ndarray:
    raw = base64.b64decode(text.encode("ascii"))
    arr = np.frombuffer(raw, dtype="<f8").astype(np.float64)
    if arr.size != expected:
        raise ShapeMismatchError(
            f"shape mismatch: checkpoint stores {arr.size} values for {what}, "
            f"expected {expected}"
        )
    return arr


def config_hash(config: NetConfig) -> str:
    canon = json.dumps(config.to_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def save_checkpoint(
    path,
    network: Network,
    optimizer: Optional[Adam] = None,
    extra: Optional[dict] = None,
) -> None:
    payload = {
        "schema_version": SCHEMA_VERSION,
        "config": network.config.to_dict(),
        "config_hash": config_hash(network.config),
        "rng_seed": network.config.seed,
        "params": _encode(network.params),
        "buffers": {k: _encode(v) for k, v in network.buffer_state().items()},
    }
    if optimizer is not None:
        state = optimizer.state_dict()
        payload["adam"] = {
            "lr": state["lr"],
            "beta1": state["beta1"],
            "beta2": state["beta2"],
            "eps": state["eps"],
            "t": state["t"],
            "m": _encode(state["m"]),
            "v": _encode(state["v"]),
        }
    if extra:
        payload["extra"] = extra
    text = json.dumps(payload, sort_keys=True, indent=1)
    Path(path).write_text(text + "\n", encoding="utf-8")


def load_checkpoint(path):
    """Rebuild (network, optimizer-or-None, extra-dict) from a checkpoint file."""
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise PolyNetError(f"checkpoint is not valid JSON: {exc}") from exc
    if payload.get("schema_version") != SCHEMA_VERSION:
        raise PolyNetError(
            f"unsupported checkpoint schema {payload.get('schema_version')!r}"
        )
    config = NetConfig.from_dict(payload["config"])
    if payload.get("config_hash") != config_hash(config):
        raise PolyNetError("checkpoint config hash does not match its config")
    network = Network(config)
    network.params[...] = _decode(payload["params"], network.param_count, "parameters")
    buffers = network.buffer_state()
    stored = payload.get("buffers", {})
    if set(stored) != set(buffers):
        raise ShapeMismatchError(
            "shape mismatch: checkpoint buffers do not match the architecture"
        )
    restored = {
        name: _decode(stored[name], buffers[name].size, name) for name in buffers
    }
    network.set_buffer_state(restored)

    optimizer = None
    if "adam" in payload:
        blob = payload["adam"]
        optimizer = Adam.from_state(
            {
                "lr": blob["lr"],
                "beta1": blob["beta1"],
                "beta2": blob["beta2"],
                "eps": blob["eps"],
                "t": blob["t"],
                "m": _decode(blob["m"], network.param_count, "first moment"),
                "v": _decode(blob["v"], network.param_count, "second moment"),
            }
        )
    return network, optimizer, payload.get("extra", {})
