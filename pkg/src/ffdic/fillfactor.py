"""Fill-factor resampling schemes.

Each scheme maps a full-resolution image of even dimensions to a half-size
image, emulating a sensor whose photosensitive area covers 100%, 50%, or 25%
of each (larger) pixel:

* ff100 averages each 2x2 cell,
* ff50 averages row pairs and keeps even-indexed columns,
* ff25 keeps even-indexed rows and columns.

Even indices are 0-based.  Sums run in float64 before the division.
"""

import numpy as np

SCHEMES = ("ff100", "ff50", "ff25")


def _checked(image: np.ndarray) -> np.ndarray:
    arr = np.asarray(image, dtype=float)
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-D image, got shape {arr.shape}")
    height, width = arr.shape
    if height % 2 or width % 2:
        raise ValueError(
            f"image dimensions must be even for fill-factor resampling, got {width}x{height}"
        )
    return arr


def resample_ff100(image: np.ndarray) -> np.ndarray:
    """Average every 2x2 cell (100% fill factor)."""
    a = _checked(image)
    return (a[0::2, 0::2] + a[0::2, 1::2] + a[1::2, 0::2] + a[1::2, 1::2]) / 4.0


def resample_ff50(image: np.ndarray) -> np.ndarray:
    """Average row pairs, keep even columns (50% fill factor)."""
    a = _checked(image)
    return (a[0::2, 0::2] + a[1::2, 0::2]) / 2.0


def resample_ff25(image: np.ndarray) -> np.ndarray:
    """Keep even rows and columns (25% fill factor)."""
    a = _checked(image)
    return a[0::2, 0::2].copy()


_BY_NAME = {
    "ff100": resample_ff100,
    "ff50": resample_ff50,
    "ff25": resample_ff25,
}


def resample(image: np.ndarray, scheme: str) -> np.ndarray:
    """Apply the named fill-factor scheme (one of SCHEMES)."""
    try:
        fn = _BY_NAME[scheme]
    except KeyError:
        raise ValueError(f"unknown fill-factor scheme {scheme!r}, expected one of {SCHEMES}") from None
    return fn(image)
