"""Flat binary tensor files (magic "MCSR1").

Record layout per tensor, after the 5-byte magic: name length (uint64 LE),
name (utf-8), rank (uint64 LE), dims (uint64 LE each), data (float64 LE,
row-major). Insertion order is preserved on round trip.
"""

from __future__ import annotations

import struct

import numpy as np

MAGIC = b"MCSR1"

__all__ = ["MAGIC", "load_tensors", "save_tensors"]


def save_tensors(path, tensors):
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        for name, arr in tensors.items():
            arr = np.asarray(arr, dtype=np.float64)
            raw = name.encode("utf-8")
            fh.write(struct.pack("<Q", len(raw)))
            fh.write(raw)
            fh.write(struct.pack("<Q", arr.ndim))
            for d in arr.shape:
                fh.write(struct.pack("<Q", d))
            fh.write(arr.astype("<f8").tobytes())


def load_tensors(path):
    out = {}
    with open(path, "rb") as fh:
        magic = fh.read(len(MAGIC))
        if magic != MAGIC:
            raise ValueError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
        while True:
            head = fh.read(8)
            if not head:
                break
            (nlen,) = struct.unpack("<Q", head)
            name = fh.read(nlen).decode("utf-8")
            (rank,) = struct.unpack("<Q", fh.read(8))
            dims = [struct.unpack("<Q", fh.read(8))[0] for _ in range(rank)]
            count = int(np.prod(dims)) if dims else 1
            buf = fh.read(8 * count)
            if len(buf) != 8 * count:
                raise ValueError(f"{path}: truncated record for tensor '{name}'")
            arr = np.frombuffer(buf, dtype="<f8").astype(np.float64).reshape(dims)
            out[name] = arr
    return out
