"""Binary PGM (P5) image files, 16-bit big-endian.

Intensities map linearly between [0, 1] floats in memory and [0, maxval]
integers on disk.  Files are always written with maxval 65535; readers accept
8-bit files as well since the format permits them.
"""

import numpy as np

_MAXVAL = 65535


def write_pgm(path, image: np.ndarray) -> None:
    """Write a float image in [0, 1] as a 16-bit binary PGM."""
    arr = np.asarray(image, dtype=float)
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-D image, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise ValueError("image contains non-finite values")
    height, width = arr.shape
    quantized = np.round(np.clip(arr, 0.0, 1.0) * _MAXVAL).astype(">u2")
    with open(path, "wb") as fh:
        fh.write(f"P5\n{width} {height}\n{_MAXVAL}\n".encode("ascii"))
        fh.write(quantized.tobytes())


def read_pgm(path) -> np.ndarray:
    """Read a binary PGM into a float image scaled to [0, 1]."""
    with open(path, "rb") as fh:
        data = fh.read()

    pos = 0

    def next_token() -> bytes:
        nonlocal pos
        while pos < len(data):
            ch = data[pos : pos + 1]
            if ch == b"#":
                while pos < len(data) and data[pos : pos + 1] != b"\n":
                    pos += 1
            elif ch.isspace():
                pos += 1
            else:
                break
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ValueError(f"{path}: truncated PGM header")
        return data[start:pos]

    magic = next_token()
    if magic != b"P5":
        raise ValueError(f"{path}: not a binary PGM (magic {magic!r})")
    width = int(next_token())
    height = int(next_token())
    maxval = int(next_token())
    if width <= 0 or height <= 0:
        raise ValueError(f"{path}: bad dimensions {width}x{height}")
    if not 0 < maxval < 65536:
        raise ValueError(f"{path}: bad maxval {maxval}")
    pos += 1  # single whitespace byte separates header from samples

    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    count = width * height
    raster = data[pos : pos + count * dtype.itemsize]
    if len(raster) != count * dtype.itemsize:
        raise ValueError(f"{path}: truncated raster data")
    samples = np.frombuffer(raster, dtype=dtype).reshape(height, width)
    return samples.astype(float) / maxval
