"""Binary tensor container: magic "GMFF", little-endian, float32 payloads.

Layout: magic (4 bytes), format version (u32), tensor count (u32); then per
tensor: name length (u16) + UTF-8 name, rank (u8), one u32 per dimension, and
the row-major float32 payload.  Tensors are written in sorted name order so
identical contents serialize to identical bytes.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import FormatError

MAGIC = b"GMFF"
FORMAT_VERSION = 1


def save_tensors(tensors: dict[str, np.ndarray], path) -> None:
    """Write named tensors to ``path``; values are cast to float32."""
    names = sorted(tensors)
    with open(Path(path), "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", FORMAT_VERSION, len(names)))
        for name in names:
            arr = np.ascontiguousarray(tensors[name], dtype="<f4")
            encoded = name.encode("utf-8")
            if len(encoded) > 0xFFFF:
                raise FormatError(f"tensor name too long: {name[:40]}...")
            if arr.ndim > 0xFF:
                raise FormatError(f"tensor rank {arr.ndim} exceeds format limit")
            fh.write(struct.pack("<H", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<B", arr.ndim))
            for dim in arr.shape:
                fh.write(struct.pack("<I", dim))
            fh.write(arr.tobytes())


def _read_exact(fh, n: int, path, what: str) -> bytes:
    data = fh.read(n)
    if len(data) != n:
        raise FormatError(f"{path}: truncated file while reading {what}")
    return data


def load_tensors(path) -> dict[str, np.ndarray]:
    """Read a tensor container; returns float32 arrays keyed by name."""
    path = Path(path)
    with open(path, "rb") as fh:
        magic = _read_exact(fh, 4, path, "magic")
        if magic != MAGIC:
            raise FormatError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
        version, count = struct.unpack("<II", _read_exact(fh, 8, path, "header"))
        if version != FORMAT_VERSION:
            raise FormatError(
                f"{path}: unsupported container version {version}, "
                f"expected {FORMAT_VERSION}"
            )
        tensors: dict[str, np.ndarray] = {}
        for _ in range(count):
            (name_len,) = struct.unpack("<H", _read_exact(fh, 2, path, "name length"))
            name = _read_exact(fh, name_len, path, "name").decode("utf-8")
            (rank,) = struct.unpack("<B", _read_exact(fh, 1, path, "rank"))
            dims = struct.unpack(
                f"<{rank}I", _read_exact(fh, 4 * rank, path, f"dims of {name}")
            )
            size = int(np.prod(dims, dtype=np.int64)) if rank else 1
            payload = _read_exact(fh, 4 * size, path, f"payload of {name}")
            if name in tensors:
                raise FormatError(f"{path}: duplicate tensor name {name!r}")
            tensors[name] = np.frombuffer(payload, dtype="<f4").reshape(dims).copy()
        trailing = fh.read(1)
        if trailing:
            raise FormatError(f"{path}: trailing bytes after last tensor")
    return tensors
