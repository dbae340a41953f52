"""Image files: 16-bit binary PGM and raw float64 with a one-line header."""

from __future__ import annotations

import numpy as np

__all__ = ["load_image", "read_pgm16", "read_raw", "write_pgm16", "write_raw"]

RAW_MAGIC = b"MCSRIMG"


def write_pgm16(path, image) -> None:
    """Write a [0, 1] image as big-endian 16-bit binary PGM."""
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 2:
        raise ValueError(f"expected a 2-D image, got shape {image.shape}")
    q = np.clip(np.rint(image * 65535.0), 0, 65535).astype(">u2")
    with open(path, "wb") as fh:
        fh.write(f"P5\n{image.shape[1]} {image.shape[0]}\n65535\n".encode("ascii"))
        fh.write(q.tobytes())


def read_pgm16(path) -> np.ndarray:
    with open(path, "rb") as fh:
        data = fh.read()
    if not data.startswith(b"P5"):
        raise ValueError(f"{path}: not a binary PGM file")
    fields = []
    pos = 2
    while len(fields) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":  # comment line
            pos = data.index(b"\n", pos) + 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        fields.append(int(data[start:pos]))
    pos += 1  # single whitespace after maxval
    width, height, maxval = fields
    if maxval > 65535 or maxval <= 0:
        raise ValueError(f"{path}: unsupported maxval {maxval}")
    dtype = ">u2" if maxval > 255 else "u1"
    raw = np.frombuffer(data, dtype=dtype, count=height * width, offset=pos)
    return raw.reshape(height, width).astype(np.float64) / float(maxval)


def write_raw(path, image) -> None:
    """Write float64 little-endian pixels after a "MCSRIMG H W" header line."""
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 2:
        raise ValueError(f"expected a 2-D image, got shape {image.shape}")
    with open(path, "wb") as fh:
        fh.write(f"MCSRIMG {image.shape[0]} {image.shape[1]}\n".encode("ascii"))
        fh.write(image.astype("<f8").tobytes())


def read_raw(path) -> np.ndarray:
    with open(path, "rb") as fh:
        header = fh.readline()
        parts = header.split()
        if len(parts) != 3 or parts[0] != RAW_MAGIC:
            raise ValueError(f"{path}: bad raw image header {header!r}")
        h, w = int(parts[1]), int(parts[2])
        buf = fh.read(8 * h * w)
    if len(buf) != 8 * h * w:
        raise ValueError(f"{path}: truncated raw image")
    return np.frombuffer(buf, dtype="<f8").astype(np.float64).reshape(h, w)


def load_image(path) -> np.ndarray:
    """Dispatch on file magic: PGM or MCSRIMG raw."""
    with open(path, "rb") as fh:
        magic = fh.read(7)
    if magic.startswith(b"P5"):
        return read_pgm16(path)
    if magic == RAW_MAGIC:
        return read_raw(path)
    raise ValueError(f"{path}: unsupported image format")
