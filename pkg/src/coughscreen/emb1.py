"""EMB1 embedding file format.

Layout: 4-byte magic ``EMB1``, u32 LE row count, u32 LE column count, then
rows*cols float32 LE values, row-major.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import UnreadableFile

MAGIC = b"EMB1"
_HEADER = struct.Struct("<4sII")


def write_emb1(path: str | Path, matrix: np.ndarray) -> None:
    mat = np.ascontiguousarray(matrix, dtype="<f4")
    if mat.ndim != 2:
        raise ValueError("EMB1 stores 2-D matrices")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, mat.shape[0], mat.shape[1]))
        fh.write(mat.tobytes())


def read_emb1(path: str | Path) -> np.ndarray:
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise UnreadableFile(f"cannot read {path}: {exc}") from exc
    if len(raw) < _HEADER.size:
        raise UnreadableFile(f"{path}: too short for an EMB1 header")
    magic, rows, cols = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise UnreadableFile(f"{path}: bad magic {magic!r}")
    expected = _HEADER.size + 4 * rows * cols
    if len(raw) != expected:
        raise UnreadableFile(
            f"{path}: expected {expected} bytes for {rows}x{cols}, got {len(raw)}")
    data = np.frombuffer(raw, dtype="<f4", offset=_HEADER.size)
    return data.reshape(rows, cols).astype(np.float32)
