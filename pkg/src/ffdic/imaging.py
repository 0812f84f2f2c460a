"""Synthetic speckle pattern generation.

Patterns are unions of opaque circular dots dropped uniformly at random on a
rectangular domain.  Dots are rasterized by area sampling so the pattern can be
rendered at an exact real-valued translation, which gives experiments a ground
truth that is not quantized to the pixel grid.
"""

import json
import math
from dataclasses import dataclass, field, asdict

import numpy as np
from scipy import ndimage

# Coverage of a pixel is estimated on a fixed grid of subcell centers.
SUBCELLS_PER_AXIS = 10

_RASTER_BAND_ROWS = 64


@dataclass(frozen=True)
class SpeckleSpec:
    """Parameters of a synthetic speckle pattern, in full-resolution pixels.

    ``foreground`` is the intensity inside a dot, ``background`` outside.
    ``blur_sigma`` and ``noise_sigma`` describe optional optical blur and
    additive sensor noise applied after rasterization.
    """

    dot_diameter: float
    mean_spacing: float
    foreground: float = 0.0
    background: float = 1.0
    blur_sigma: float = 0.0
    noise_sigma: float = 0.005
    seed: int = 0

    def __post_init__(self):
        if not self.dot_diameter > 0:
            raise ValueError(f"dot_diameter must be > 0, got {self.dot_diameter}")
        if not self.mean_spacing > 0:
            raise ValueError(f"mean_spacing must be > 0, got {self.mean_spacing}")
        for name in ("foreground", "background"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {value}")
        if self.foreground == self.background:
            raise ValueError("foreground and background intensities must differ")
        if self.blur_sigma < 0:
            raise ValueError(f"blur_sigma must be >= 0, got {self.blur_sigma}")
        if self.noise_sigma < 0:
            raise ValueError(f"noise_sigma must be >= 0, got {self.noise_sigma}")
        if self.seed < 0:
            raise ValueError(f"seed must be a non-negative integer, got {self.seed}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SpeckleSpec":
        return cls(**d)


@dataclass
class DotSet:
    """Dot centers (n, 2) as (x, y), a common radius, and the (w, h) domain."""

    centers: np.ndarray
    radius: float
    domain: tuple[int, int]
    spec: SpeckleSpec | None = field(default=None, repr=False)

    def __post_init__(self):
        self.centers = np.asarray(self.centers, dtype=float).reshape(-1, 2)
        if not np.isfinite(self.centers).all():
            raise ValueError("dot centers must be finite")
        if not self.radius > 0:
            raise ValueError(f"dot radius must be > 0, got {self.radius}")

    def __len__(self) -> int:
        return self.centers.shape[0]

    def save(self, path) -> None:
        payload = {
            "radius": self.radius,
            "domain": [int(self.domain[0]), int(self.domain[1])],
            "centers": self.centers.tolist(),
        }
        with open(path, "w", encoding="ascii") as fh:
            json.dump(payload, fh)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "DotSet":
        with open(path, "r", encoding="ascii") as fh:
            payload = json.load(fh)
        return cls(
            centers=np.asarray(payload["centers"], dtype=float),
            radius=float(payload["radius"]),
            domain=(int(payload["domain"][0]), int(payload["domain"][1])),
        )


def generate_dots(spec: SpeckleSpec, width: int, height: int) -> DotSet:
    """Draw dot centers uniformly at random over [0, width) x [0, height).

    The dot count is floor(width * height / mean_spacing**2), so the average
    center-to-center spacing matches ``spec.mean_spacing``.  Drawing is
    deterministic in ``spec.seed``.
    """
    if width <= 0 or height <= 0:
        raise ValueError(f"domain must be positive, got {width}x{height}")
    count = int(math.floor(width * height / spec.mean_spacing**2))
    if count < 1:
        raise ValueError(
            f"mean_spacing {spec.mean_spacing} is too large for a "
            f"{width}x{height} domain (zero dots)"
        )
    rng = np.random.default_rng(spec.seed)
    centers = rng.random((count, 2)) * np.array([width, height], dtype=float)
    return DotSet(centers=centers, radius=spec.dot_diameter / 2.0, domain=(width, height), spec=spec)


def rasterize(
    dots: DotSet,
    shift: tuple[float, float] = (0.0, 0.0),
    width: int | None = None,
    height: int | None = None,
    foreground: float = 0.0,
    background: float = 1.0,
) -> np.ndarray:
    """Render dots translated by ``shift`` into a (height, width) float image.

    Pixel (i, j) covers the unit cell [j, j+1) x [i, i+1).  Its value is
    ``background + (foreground - background) * c`` where c is the covered area
    fraction, estimated from a fixed grid of subcell centers
    (SUBCELLS_PER_AXIS per axis).  Because the disks are analytic, any
    real-valued shift is exact; there is no resampling of a source image.
    """
    if width is None:
        width = int(dots.domain[0])
    if height is None:
        height = int(dots.domain[1])
    if width <= 0 or height <= 0:
        raise ValueError(f"image dimensions must be positive, got {width}x{height}")

    k = SUBCELLS_PER_AXIS
    counts = np.zeros((height, width), dtype=np.int32)
    if len(dots):
        # Work in subcell units so a dot at (x, y) has center k*(x + dx).
        ux = (dots.centers[:, 0] + shift[0]) * k
        uy = (dots.centers[:, 1] + shift[1]) * k
        rk = dots.radius * k
        order = np.argsort(uy, kind="stable")
        ux, uy = ux[order], uy[order]

        # The supersampled coverage mask is built in horizontal bands so memory
        # stays bounded by one band, not one full-resolution k x k buffer.
        for row0 in range(0, height, _RASTER_BAND_ROWS):
            row1 = min(row0 + _RASTER_BAND_ROWS, height)
            band_lo, band_hi = row0 * k, row1 * k
            first = np.searchsorted(uy, band_lo - rk, side="left")
            last = np.searchsorted(uy, band_hi + rk, side="right")
            if first == last:
                continue
            buf = np.zeros((band_hi - band_lo, width * k), dtype=bool)
            for cx, cy in zip(ux[first:last], uy[first:last]):
                sx0 = max(int(math.floor(cx - rk)) - 1, 0)
                sx1 = min(int(math.ceil(cx + rk)) + 2, width * k)
                sy0 = max(int(math.floor(cy - rk)) - 1, band_lo)
                sy1 = min(int(math.ceil(cy + rk)) + 2, band_hi)
                if sx0 >= sx1 or sy0 >= sy1:
                    continue
                dx2 = (np.arange(sx0, sx1) + 0.5 - cx) ** 2
                dy2 = (np.arange(sy0, sy1) + 0.5 - cy) ** 2
                inside = dy2[:, None] + dx2[None, :] <= rk * rk
                buf[sy0 - band_lo : sy1 - band_lo, sx0:sx1] |= inside
            rows = row1 - row0
            counts[row0:row1] = buf.reshape(rows, k, width, k).sum(axis=(1, 3))

    coverage = counts / float(k * k)
    return background + (foreground - background) * coverage


def gaussian_blur(image: np.ndarray, sigma: float) -> np.ndarray:
    """Separable Gaussian blur with a unit-sum kernel truncated at ceil(4*sigma).

    Edges are handled by mirror reflection, which preserves the global mean
    for a symmetric kernel.  ``sigma`` of zero returns the image unchanged.
    """
    image = np.asarray(image, dtype=float)
    if image.ndim != 2:
        raise ValueError(f"expected a 2-D image, got shape {image.shape}")
    if sigma < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    if sigma == 0:
        return image.copy()
    radius = int(math.ceil(4.0 * sigma))
    offsets = np.arange(-radius, radius + 1, dtype=float)
    kernel = np.exp(-0.5 * (offsets / sigma) ** 2)
    kernel /= kernel.sum()
    out = ndimage.convolve1d(image, kernel, axis=0, mode="reflect")
    return ndimage.convolve1d(out, kernel, axis=1, mode="reflect")


def add_noise(image: np.ndarray, sigma: float, seed: int) -> np.ndarray:
    """Add i.i.d. Gaussian noise and clamp to [0, 1], deterministic in seed."""
    image = np.asarray(image, dtype=float)
    if sigma < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    if sigma == 0:
        return image.copy()
    rng = np.random.default_rng(seed)
    return np.clip(image + rng.normal(0.0, sigma, size=image.shape), 0.0, 1.0)
