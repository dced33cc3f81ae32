"""
Binary checkpoint container.

Layout::

    b"SGM1" | header length (uint64 LE) | UTF-8 JSON header | float32 LE payload

The header holds the format version, the model config, the vocabulary, the
preprocessing stages, free-form metadata and a manifest of
``{name, shape, offset, nbytes}`` entries addressing the payload.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    CheckpointFormatError,
    CheckpointManifestError,
    CheckpointPayloadError,
    CheckpointVersionError,
)

MAGIC = b"SGM1"
FORMAT_VERSION = 1
_DTYPE = np.dtype("<f4")


@dataclass
class Checkpoint:
    config: dict
    vocab: list
    params: dict  # name -> ndarray, insertion order is the payload order
    pipeline: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)
    format_version: int = FORMAT_VERSION


def _header_bytes(ck: Checkpoint) -> tuple[bytes, list]:
    manifest, offset = [], 0
    for name, arr in ck.params.items():
        nbytes = int(np.prod(arr.shape, dtype=np.int64)) * _DTYPE.itemsize
        manifest.append({"name": name, "shape": list(arr.shape), "offset": offset, "nbytes": nbytes})
        offset += nbytes
    header = {
        "format_version": ck.format_version,
        "config": ck.config,
        "vocab": list(ck.vocab),
        "pipeline": list(ck.pipeline),
        "metadata": ck.metadata,
        "manifest": manifest,
        "payload_bytes": offset,
    }
    text = json.dumps(header, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
    return text.encode("utf-8"), manifest


def dumps(ck: Checkpoint) -> bytes:
    header, _ = _header_bytes(ck)
    payload = b"".join(np.ascontiguousarray(a, dtype=_DTYPE).tobytes() for a in ck.params.values())
    return MAGIC + struct.pack("<Q", len(header)) + header + payload


def save(ck: Checkpoint, path):
    Path(path).write_bytes(dumps(ck))


def _check_manifest(manifest, payload_bytes):
    spans = []
    names = set()
    for entry in manifest:
        try:
            name, shape, offset, nbytes = entry["name"], entry["shape"], entry["offset"], entry["nbytes"]
        except (KeyError, TypeError):
            raise CheckpointManifestError(f"malformed manifest entry {entry!r}") from None
        if name in names:
            raise CheckpointManifestError(f"duplicate parameter {name!r} in manifest")
        names.add(name)
        if any((not isinstance(s, int)) or s < 0 for s in shape):
            raise CheckpointManifestError(f"{name}: invalid shape {shape}")
        expected = int(np.prod(shape, dtype=np.int64)) * _DTYPE.itemsize
        if nbytes != expected:
            raise CheckpointManifestError(f"{name}: {nbytes} bytes recorded for shape {shape} (expected {expected})")
        if offset < 0 or offset + nbytes > payload_bytes:
            raise CheckpointManifestError(f"{name}: bytes [{offset}, {offset + nbytes}) outside payload of {payload_bytes}")
        spans.append((offset, offset + nbytes, name))
    spans.sort()
    for (s0, e0, n0), (s1, e1, n1) in zip(spans, spans[1:]):
        if s1 < e0:
            raise CheckpointManifestError(f"{n0} and {n1} overlap in the payload")


def loads(blob: bytes, source: str = "<bytes>") -> Checkpoint:
    if len(blob) < 12 or blob[:4] != MAGIC:
        raise CheckpointFormatError(f"{source}: not a checkpoint (bad magic)")
    (hlen,) = struct.unpack("<Q", blob[4:12])
    if 12 + hlen > len(blob):
        raise CheckpointPayloadError(f"{source}: truncated header ({len(blob) - 12} of {hlen} bytes)")
    try:
        header = json.loads(blob[12:12 + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointFormatError(f"{source}: unreadable header: {exc}") from None
    version = header.get("format_version")
    if version != FORMAT_VERSION:
        raise CheckpointVersionError(
            f"{source}: checkpoint format_version {version} is not supported (this build reads {FORMAT_VERSION})"
        )
    payload = blob[12 + hlen:]
    payload_bytes = header.get("payload_bytes")
    if not isinstance(payload_bytes, int):
        raise CheckpointManifestError(f"{source}: payload_bytes missing from header")
    if len(payload) < payload_bytes:
        raise CheckpointPayloadError(f"{source}: truncated payload ({len(payload)} of {payload_bytes} bytes)")
    if len(payload) > payload_bytes:
        raise CheckpointPayloadError(f"{source}: {len(payload) - payload_bytes} trailing bytes after payload")
    manifest = header.get("manifest", [])
    _check_manifest(manifest, payload_bytes)
    params = {}
    for entry in manifest:
        raw = payload[entry["offset"]:entry["offset"] + entry["nbytes"]]
        params[entry["name"]] = np.frombuffer(raw, dtype=_DTYPE).reshape(entry["shape"]).astype(np.float64)
    return Checkpoint(
        config=header.get("config", {}),
        vocab=header.get("vocab", []),
        params=params,
        pipeline=header.get("pipeline", []),
        metadata=header.get("metadata", {}),
        format_version=version,
    )


def load(path) -> Checkpoint:
    return loads(Path(path).read_bytes(), source=str(path))
