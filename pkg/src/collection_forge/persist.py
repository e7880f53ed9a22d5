"""On-disk formats: CFM1 matrices, canonical JSON, atomic writes.

The CFM1 matrix format is: magic b"CFM1", u32-LE rows, u32-LE cols,
then rows*cols float64 little-endian values, row-major.  Everything
else is canonical JSON (sorted keys, no whitespace drift) or JSON
lines, so repeated runs with the same config are byte-identical.
"""

from __future__ import annotations

import hashlib
import json
import os
import struct
import tempfile

import numpy as np

from .errors import ParseError

CFM_MAGIC = b"CFM1"
_CFM_HEADER = struct.Struct("<4sII")


def atomic_write_bytes(path, data: bytes) -> None:
    """Write via a sibling temp file + rename so readers never see partials."""
    path = os.fspath(path)
    d = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def matrix_to_bytes(arr) -> bytes:
    arr = np.ascontiguousarray(arr, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got ndim={arr.ndim}")
    rows, cols = arr.shape
    return _CFM_HEADER.pack(CFM_MAGIC, rows, cols) + arr.astype("<f8").tobytes()


def matrix_from_bytes(data: bytes, offset: int = 0) -> tuple[np.ndarray, int]:
    """Parse one CFM1 matrix starting at `offset`; return (matrix, next offset)."""
    if len(data) - offset < _CFM_HEADER.size:
        raise ParseError("truncated CFM1 header")
    magic, rows, cols = _CFM_HEADER.unpack_from(data, offset)
    if magic != CFM_MAGIC:
        raise ParseError(f"bad matrix magic {magic!r}")
    body = data[offset + _CFM_HEADER.size : offset + _CFM_HEADER.size + 8 * rows * cols]
    if len(body) != 8 * rows * cols:
        raise ParseError("truncated CFM1 body")
    mat = np.frombuffer(body, dtype="<f8").reshape(rows, cols).astype(np.float64)
    return mat, offset + _CFM_HEADER.size + 8 * rows * cols


def write_matrix(path, arr) -> None:
    atomic_write_bytes(path, matrix_to_bytes(arr))


def read_matrix(path) -> np.ndarray:
    with open(path, "rb") as fh:
        data = fh.read()
    mat, end = matrix_from_bytes(data)
    if end != len(data):
        raise ParseError("trailing bytes after CFM1 matrix")
    return mat


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=True)


def write_json(path, obj) -> None:
    atomic_write_bytes(path, (canonical_json(obj) + "\n").encode())


def read_json(path):
    with open(path, "rb") as fh:
        return json.loads(fh.read().decode())


def write_jsonl(path, records) -> None:
    text = "".join(canonical_json(r) + "\n" for r in records)
    atomic_write_bytes(path, text.encode())


def read_jsonl(path) -> list:
    out = []
    with open(path, "rb") as fh:
        for line in fh.read().decode().splitlines():
            if line.strip():
                out.append(json.loads(line))
    return out


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(canonical_json(cfg).encode()).hexdigest()[:16]
