"""Reader and writer for the ELNA embedding archive format.

Layout: the magic bytes ``ELNA``, then three little-endian u32 fields
(version, dimension, entry count), then fixed-size entries sorted by key.
Each entry is the 32-byte SHA-256 of the UTF-8 text followed by ``dim``
little-endian float32 components.
"""

from __future__ import annotations

import hashlib
import struct
from pathlib import Path

import numpy as np

MAGIC = b"ELNA"
VERSION = 1
_HEADER = struct.Struct("<III")


class ArchiveError(Exception):
    """Raised when an archive file is malformed."""


def text_key(text: str) -> bytes:
    """Return the 32-byte lookup key for a text."""
    return hashlib.sha256(text.encode("utf-8")).digest()


def write_archive(path: Path, dim: int, entries: dict[str, np.ndarray]) -> None:
    """Write texts and their vectors to an archive, keyed by text digest.

    Entries are sorted by key so the file layout is independent of the
    insertion order of ``entries``.
    """
    if dim < 1:
        raise ValueError(f"archive dimension must be positive, got {dim}")
    rows = []
    for text, vector in entries.items():
        arr = np.asarray(vector, dtype="<f4")
        if arr.shape != (dim,):
            raise ValueError(
                f"vector for {text!r} has shape {arr.shape}, expected ({dim},)"
            )
        rows.append((text_key(text), arr))
    rows.sort(key=lambda row: row[0])
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(_HEADER.pack(VERSION, dim, len(rows)))
        for key, arr in rows:
            fh.write(key)
            fh.write(arr.tobytes())


def read_archive(path: Path) -> tuple[int, dict[bytes, np.ndarray]]:
    """Load an archive, returning its dimension and key-to-vector table."""
    blob = Path(path).read_bytes()
    if blob[:4] != MAGIC:
        raise ArchiveError(f"{path}: bad magic {blob[:4]!r}")
    if len(blob) < 4 + _HEADER.size:
        raise ArchiveError(f"{path}: truncated header")
    version, dim, count = _HEADER.unpack_from(blob, 4)
    if version != VERSION:
        raise ArchiveError(f"{path}: unsupported version {version}")
    entry_size = 32 + 4 * dim
    body = blob[4 + _HEADER.size :]
    if len(body) != count * entry_size:
        raise ArchiveError(
            f"{path}: expected {count * entry_size} payload bytes, got {len(body)}"
        )
    table: dict[bytes, np.ndarray] = {}
    for i in range(count):
        chunk = body[i * entry_size : (i + 1) * entry_size]
        table[chunk[:32]] = np.frombuffer(chunk[32:], dtype="<f4").copy()
    return dim, table
