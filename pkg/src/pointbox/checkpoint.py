"""Flat binary checkpoint container.

Layout::

    b"PBXCKPT\\n"                     8-byte magic
    uint64 little-endian              header length H
    H bytes UTF-8 JSON header         {"version": 1, "meta": {...},
                                       "entries": [{"name", "shape", "offset"}]}
    float64 little-endian payload     entries concatenated in header order

``offset`` counts float64 elements from the start of the payload.
"""
from __future__ import annotations

import json
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .errors import VersionMismatch

MAGIC = b"PBXCKPT\n"
FORMAT_VERSION = 1


def atomic_write_bytes(path: str | os.PathLike, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path: str | os.PathLike, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def save_checkpoint(path, tensors: dict[str, np.ndarray], meta: dict | None = None) -> None:
    """Write named float64 arrays (parameters and optimizer moments) atomically."""
    entries, chunks, offset = [], [], 0
    for name, arr in tensors.items():
        arr = np.ascontiguousarray(arr, dtype="<f8")
        entries.append({"name": name, "shape": list(arr.shape), "offset": offset})
        chunks.append(arr.tobytes())
        offset += arr.size
    header = json.dumps({"version": FORMAT_VERSION, "meta": meta or {}, "entries": entries},
                        sort_keys=True).encode("utf-8")
    atomic_write_bytes(path, MAGIC + struct.pack("<Q", len(header)) + header + b"".join(chunks))


def load_checkpoint(path) -> tuple[dict[str, np.ndarray], dict]:
    data = Path(path).read_bytes()
    if not data.startswith(MAGIC):
        raise VersionMismatch(f"{path}: not a checkpoint file")
    try:
        (hlen,) = struct.unpack("<Q", data[8:16])
        header = json.loads(data[16:16 + hlen].decode("utf-8"))
    except (struct.error, UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise VersionMismatch(f"{path}: corrupt checkpoint header") from exc
    if header.get("version") != FORMAT_VERSION:
        raise VersionMismatch(f"{path}: checkpoint version {header.get('version')}, "
                              f"expected {FORMAT_VERSION}")
    start = 16 + hlen
    payload = np.frombuffer(data, dtype="<f8", offset=min(start, len(data)),
                            count=max(len(data) - start, 0) // 8)
    tensors = {}
    for e in header["entries"]:
        n = int(np.prod(e["shape"])) if e["shape"] else 1
        if e["offset"] + n > payload.size:
            raise VersionMismatch(f"{path}: truncated payload for {e['name']}")
        tensors[e["name"]] = payload[e["offset"]:e["offset"] + n].reshape(e["shape"]).astype(np.float64)
    return tensors, header["meta"]
