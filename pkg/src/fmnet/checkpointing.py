"""Checkpoint persistence: a torch parameter blob plus a JSON sidecar.

The sidecar records the architecture fingerprints, completed training phase,
master seed and a metric snapshot; loading refuses blobs whose fingerprints
do not match the requesting model's architecture.
"""

from __future__ import annotations

import json
from pathlib import Path

import torch


class CheckpointError(RuntimeError):
    """Raised for missing, incompatible or out-of-order checkpoints."""


def save_checkpoint(prefix: Path | str, state: dict, meta: dict) -> dict:
    """Write `<prefix>.pt` (tensor state) and `<prefix>.json` (metadata)."""
    prefix = Path(prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    torch.save(state, prefix.with_suffix(".pt"))
    prefix.with_suffix(".json").write_text(json.dumps(meta, sort_keys=True, indent=2) + "\n")
    return {"blob": str(prefix.with_suffix(".pt")), "sidecar": str(prefix.with_suffix(".json"))}


def peek_meta(prefix: Path | str) -> dict:
    """Read only the JSON sidecar of a checkpoint."""
    sidecar = Path(prefix).with_suffix(".json")
    if not sidecar.exists():
        raise CheckpointError(f"no checkpoint sidecar at {sidecar}")
    return json.loads(sidecar.read_text())


def load_checkpoint(prefix: Path | str, expected_arch_hash: dict | str | None = None) -> tuple[dict, dict]:
    prefix = Path(prefix)
    blob = prefix.with_suffix(".pt")
    sidecar = prefix.with_suffix(".json")
    if not blob.exists() or not sidecar.exists():
        raise CheckpointError(f"no checkpoint at {prefix} (need {blob.name} and {sidecar.name})")
    meta = json.loads(sidecar.read_text())
    if expected_arch_hash is not None and meta.get("arch_hash") != expected_arch_hash:
        raise CheckpointError(
            f"architecture mismatch for {prefix}: checkpoint arch_hash "
            f"{meta.get('arch_hash')} != expected {expected_arch_hash}"
        )
    state = torch.load(blob, map_location="cpu", weights_only=True)
    return state, meta
