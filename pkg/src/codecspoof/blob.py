"""Versioned binary container: a JSON header followed by raw little-endian arrays.

Byte-for-byte deterministic for identical inputs (sorted keys, no timestamps).
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"CSPB"
_PREFIX = struct.Struct("<4sHI")


class BlobError(ValueError):
    pass


def dumps(kind: str, version: int, meta: dict, arrays: dict[str, np.ndarray]) -> bytes:
    specs = []
    chunks = []
    offset = 0
    for name in sorted(arrays):
        a = np.ascontiguousarray(arrays[name], dtype="<f8")
        raw = a.tobytes()
        specs.append({"name": name, "shape": list(a.shape), "offset": offset})
        chunks.append(raw)
        offset += len(raw)
    header = json.dumps({"kind": kind, "meta": meta, "arrays": specs}, sort_keys=True).encode()
    return _PREFIX.pack(MAGIC, version, len(header)) + header + b"".join(chunks)


def loads(data: bytes, kind: str, version: int) -> tuple[dict, dict[str, np.ndarray]]:
    if len(data) < _PREFIX.size:
        raise BlobError("truncated blob")
    magic, ver, hlen = _PREFIX.unpack_from(data, 0)
    if magic != MAGIC:
        raise BlobError("bad magic")
    if ver != version:
        raise BlobError(f"unsupported version {ver} (expected {version})")
    header = json.loads(data[_PREFIX.size : _PREFIX.size + hlen])
    if header["kind"] != kind:
        raise BlobError(f"expected a {kind} blob, got {header['kind']}")
    base = _PREFIX.size + hlen
    arrays = {}
    for spec in header["arrays"]:
        count = int(np.prod(spec["shape"], dtype=np.int64))
        a = np.frombuffer(data, dtype="<f8", count=count, offset=base + spec["offset"])
        arrays[spec["name"]] = a.reshape(spec["shape"]).astype(np.float64)
    return header["meta"], arrays


def save(path, kind: str, version: int, meta: dict, arrays: dict) -> None:
    Path(path).write_bytes(dumps(kind, version, meta, arrays))


def load(path, kind: str, version: int):
    return loads(Path(path).read_bytes(), kind, version)
