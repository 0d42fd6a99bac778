"""Checkpoint and run-manifest persistence.

Checkpoints are a small binary container: a fixed magic, a
length-prefixed canonical JSON header (format version, model kind,
embedded config, vocabulary hash, tensor names and shapes), then the
tensors' float64 little-endian payloads in header order.  Tensors are
stored sorted by name and the header JSON is canonicalized, so
save -> load -> save reproduces the file byte for byte.

Manifests record what produced a set of artifacts: command, config
snapshot, seeds, input and output hashes.  Timestamps live only here;
every other artifact is a pure function of its inputs.
"""

from __future__ import annotations

import hashlib
import json
import os
import struct
import tempfile
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .autodiff import Tensor

__all__ = [
    "FORMAT_VERSION",
    "Checkpoint",
    "CheckpointError",
    "MANIFEST_NAME",
    "atomic_write_bytes",
    "atomic_write_text",
    "checkpoint_bytes",
    "load_checkpoint",
    "load_manifest",
    "save_checkpoint",
    "sha256_bytes",
    "sha256_file",
    "write_manifest",
]

MAGIC = b"QGCK"
FORMAT_VERSION = 1
MODEL_KINDS = ("classifier", "qg")
MANIFEST_NAME = "manifest.json"


class CheckpointError(ValueError):
    pass


@dataclass
class Checkpoint:
    version: int
    kind: str
    config: dict
    tensors: dict[str, Tensor]
    vocab_hash: str


def _canonical_json(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode("utf-8")


def checkpoint_bytes(kind: str, config: dict, tensors: dict[str, Tensor],
                     vocab_hash: str) -> bytes:
    if kind not in MODEL_KINDS:
        raise CheckpointError(f"unknown model kind {kind!r}")
    names = sorted(tensors)
    header = _canonical_json({
        "version": FORMAT_VERSION,
        "kind": kind,
        "config": config,
        "vocab_hash": vocab_hash,
        "tensors": [{"name": n, "shape": list(tensors[n].shape)} for n in names],
    })
    parts = [MAGIC, struct.pack("<Q", len(header)), header]
    for n in names:
        parts.append(np.ascontiguousarray(tensors[n].data, dtype="<f8").tobytes())
    return b"".join(parts)


def save_checkpoint(path: str | Path, kind: str, config: dict,
                    tensors: dict[str, Tensor], vocab_hash: str) -> None:
    atomic_write_bytes(path, checkpoint_bytes(kind, config, tensors, vocab_hash))


def load_checkpoint(path: str | Path) -> Checkpoint:
    blob = Path(path).read_bytes()
    if blob[:4] != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint file")
    if len(blob) < 12:
        raise CheckpointError(f"{path}: truncated header")
    (header_len,) = struct.unpack("<Q", blob[4:12])
    header_end = 12 + header_len
    if len(blob) < header_end:
        raise CheckpointError(f"{path}: truncated header")
    header = json.loads(blob[12:header_end].decode("utf-8"))
    version = header.get("version")
    if version != FORMAT_VERSION:
        raise CheckpointError(
            f"{path}: unsupported checkpoint format version {version!r}"
        )
    kind = header.get("kind")
    if kind not in MODEL_KINDS:
        raise CheckpointError(f"{path}: unknown model kind {kind!r}")
    tensors: dict[str, Tensor] = {}
    offset = header_end
    for entry in header["tensors"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        nbytes = count * 8
        if offset + nbytes > len(blob):
            raise CheckpointError(f"{path}: truncated tensor payload")
        data = np.frombuffer(blob, dtype="<f8", count=count, offset=offset)
        tensors[entry["name"]] = Tensor(
            data.reshape(shape).astype(np.float64, copy=True), name=entry["name"]
        )
        offset += nbytes
    if offset != len(blob):
        raise CheckpointError(f"{path}: trailing bytes after tensor payload")
    return Checkpoint(version=version, kind=kind, config=header["config"],
                      tensors=tensors, vocab_hash=header["vocab_hash"])


# ---------------------------------------------------------------------------
# Atomic file writes and content hashes.
# ---------------------------------------------------------------------------


def atomic_write_bytes(path: str | Path, data: bytes) -> None:
    """Write via a temp file in the target directory + rename, so a
    failure never leaves a partial file at ``path``."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path: str | Path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def sha256_file(path: str | Path) -> str:
    return sha256_bytes(Path(path).read_bytes())


# ---------------------------------------------------------------------------
# Run manifests.
# ---------------------------------------------------------------------------


def write_manifest(
    out_dir: str | Path,
    command: str,
    config: dict,
    seeds: list[int],
    inputs: dict[str, str],
    artifacts: dict[str, str],
) -> Path:
    """Record a command's full provenance next to its artifacts.

    ``inputs`` and ``artifacts`` map file names to sha256 hashes.  The
    timestamp is confined to this file; artifacts stay byte-reproducible
    and reference the manifest by its stable file name."""
    path = Path(out_dir) / MANIFEST_NAME
    body = {
        "command": command,
        "config": config,
        "seeds": seeds,
        "inputs": inputs,
        "artifacts": artifacts,
        "created": datetime.now(timezone.utc).isoformat(),
    }
    atomic_write_text(path, json.dumps(body, indent=2, sort_keys=True) + "\n")
    return path


def load_manifest(path: str | Path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))
