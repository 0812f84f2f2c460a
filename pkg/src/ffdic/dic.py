"""Subset-based digital image correlation.

A square subset around each grid point is located in the deformed image by an
exhaustive integer-pixel ZNCC search, then refined to subpixel precision with
an inverse-compositional Gauss-Newton (IC-GN) iteration on a first-order
affine shape function.  The optimization criterion is the ZNSSD, which is
invariant to affine intensity changes; the reported quality metric is the
equivalent ZNCC.
"""

import csv
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, asdict

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

# Bicubic interpolation reads a 4x4 neighborhood, so warped subset windows
# need two pixels of slack beyond the integer search range.
INTERP_MARGIN = 2

DEFAULT_ROI_SIDE = 400


class SubsetError(ValueError):
    """A subset cannot be matched (degenerate contrast, singular system, ...)."""


class InterpolationRangeError(SubsetError):
    """A warped sample fell outside the interpolable interior of the image."""


class GridError(ValueError):
    """No valid subset centers exist for the given ROI and margins."""


@dataclass(frozen=True)
class DicParams:
    """Correlation parameters.  Lengths are in pixels of the analyzed image.

    ``roi`` is (x0, y0, width, height); None selects a centered square of
    side DEFAULT_ROI_SIDE.  ``initial_guess`` is the nominal displacement used
    to center the integer search window.
    """

    subset_size: int = 41
    step: int = 20
    roi: tuple[int, int, int, int] | None = None
    initial_guess: tuple[float, float] = (0.0, 0.0)
    search_radius: int = 10
    max_iterations: int = 50
    convergence_tol: float = 1e-4
    interpolation: str = "bicubic"

    def __post_init__(self):
        if self.subset_size < 3 or self.subset_size % 2 == 0:
            raise ValueError(f"subset_size must be odd and >= 3, got {self.subset_size}")
        if self.step < 1:
            raise ValueError(f"step must be >= 1, got {self.step}")
        if self.search_radius < 1:
            raise ValueError(f"search_radius must be >= 1, got {self.search_radius}")
        if self.max_iterations < 1:
            raise ValueError(f"max_iterations must be >= 1, got {self.max_iterations}")
        if not self.convergence_tol > 0:
            raise ValueError(f"convergence_tol must be > 0, got {self.convergence_tol}")
        if self.interpolation != "bicubic":
            raise ValueError(f"unsupported interpolation {self.interpolation!r}")
        if self.roi is not None:
            x0, y0, w, h = self.roi
            if w < 1 or h < 1 or x0 < 0 or y0 < 0:
                raise ValueError(f"invalid roi {self.roi}")

    @property
    def half_subset(self) -> int:
        return (self.subset_size - 1) // 2

    def to_dict(self) -> dict:
        d = asdict(self)
        d["roi"] = None if self.roi is None else list(self.roi)
        d["initial_guess"] = list(self.initial_guess)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "DicParams":
        d = dict(d)
        if d.get("roi") is not None:
            d["roi"] = tuple(int(v) for v in d["roi"])
        if "initial_guess" in d:
            d["initial_guess"] = tuple(float(v) for v in d["initial_guess"])
        return cls(**d)


@dataclass
class SubsetGrid:
    """Regular lattice of subset centers; points are row-major over ys x xs."""

    xs: np.ndarray
    ys: np.ndarray

    def __post_init__(self):
        self.xs = np.asarray(self.xs, dtype=int)
        self.ys = np.asarray(self.ys, dtype=int)

    @property
    def rows(self) -> int:
        return len(self.ys)

    @property
    def cols(self) -> int:
        return len(self.xs)

    def __len__(self) -> int:
        return self.rows * self.cols

    @property
    def points(self) -> np.ndarray:
        """(n, 2) array of (x, y) centers, row-major."""
        gx, gy = np.meshgrid(self.xs, self.ys)
        return np.column_stack([gx.ravel(), gy.ravel()])


def build_grid(params: DicParams, image_shape: tuple[int, int]) -> SubsetGrid:
    """Lay out subset centers inside the ROI.

    Centers start half a subset in from the ROI origin and advance by
    ``params.step``.  A center is retained only if its subset window, expanded
    by the search radius plus the interpolation margin, stays inside the image
    for both the reference position and the position offset by the (rounded)
    initial guess.  Raises GridError if nothing survives.
    """
    height, width = image_shape
    half = params.half_subset
    margin = half + params.search_radius + INTERP_MARGIN
    if params.roi is not None:
        x0, y0, rw, rh = params.roi
    else:
        side = min(DEFAULT_ROI_SIDE, width, height)
        x0, y0 = (width - side) // 2, (height - side) // 2
        rw = rh = side
    if x0 + rw > width or y0 + rh > height:
        raise GridError(f"roi {(x0, y0, rw, rh)} exceeds image bounds {width}x{height}")

    gx = int(round(params.initial_guess[0]))
    gy = int(round(params.initial_guess[1]))

    def axis_centers(origin: int, extent: int, dim: int, guess: int) -> np.ndarray:
        lo = max(margin, margin - guess)
        hi = min(dim - 1 - margin, dim - 1 - margin - guess)
        lattice = np.arange(origin + half, origin + extent, params.step)
        return lattice[(lattice >= lo) & (lattice <= hi)]

    xs = axis_centers(x0, rw, width, gx)
    ys = axis_centers(y0, rh, height, gy)
    if len(xs) == 0 or len(ys) == 0:
        raise GridError(
            f"no subset centers fit: roi {(x0, y0, rw, rh)}, subset {params.subset_size}, "
            f"search {params.search_radius}, image {width}x{height}"
        )
    return SubsetGrid(xs=xs, ys=ys)


@dataclass
class DisplacementField:
    """Per-grid-point displacement results, aligned with ``grid.points``."""

    grid: SubsetGrid
    u: np.ndarray
    v: np.ndarray
    zncc: np.ndarray
    iterations: np.ndarray
    converged: np.ndarray
    params: DicParams | None = field(default=None, repr=False)

    def __post_init__(self):
        n = len(self.grid)
        for name in ("u", "v", "zncc", "iterations", "converged"):
            arr = np.asarray(getattr(self, name))
            if arr.shape != (n,):
                raise ValueError(f"{name} must have shape ({n},), got {arr.shape}")


def zncc(a: np.ndarray, b: np.ndarray) -> float:
    """Zero-mean normalized cross-correlation of two equal-size patches.

    Returns a value in [-1, 1], or NaN if either patch has zero variance.
    """
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.size != b.size:
        raise ValueError(f"size mismatch: {a.size} vs {b.size}")
    if a.size < 2:
        raise ValueError("patches must contain at least 2 samples")
    da = a - a.mean()
    db = b - b.mean()
    na = math.sqrt(float(da @ da))
    nb = math.sqrt(float(db @ db))
    if na == 0.0 or nb == 0.0:
        return float("nan")
    return float(da @ db) / (na * nb)


def _cubic_weights(t: np.ndarray):
    """Keys bicubic convolution weights (a = -0.5) for taps at -1, 0, 1, 2."""
    t2 = t * t
    t3 = t2 * t
    w0 = 0.5 * (-t3 + 2.0 * t2 - t)
    w1 = 0.5 * (3.0 * t3 - 5.0 * t2 + 2.0)
    w2 = 0.5 * (-3.0 * t3 + 4.0 * t2 + t)
    w3 = 0.5 * (t3 - t2)
    return w0, w1, w2, w3


def _sample_bicubic(image: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Evaluate the bicubic interpolant at real-valued (xs, ys) positions."""
    height, width = image.shape
    jx = np.floor(xs).astype(np.intp)
    iy = np.floor(ys).astype(np.intp)
    if (
        jx.min() < 1
        or jx.max() > width - 3
        or iy.min() < 1
        or iy.max() > height - 3
    ):
        raise InterpolationRangeError("sample position outside interpolable interior")
    wx = _cubic_weights(xs - jx)
    wy = _cubic_weights(ys - iy)
    out = np.zeros(xs.shape, dtype=float)
    for m in range(4):
        row = iy + (m - 1)
        acc = wx[0] * image[row, jx - 1]
        acc += wx[1] * image[row, jx]
        acc += wx[2] * image[row, jx + 1]
        acc += wx[3] * image[row, jx + 2]
        out += wy[m] * acc
    return out


def interpolate(image: np.ndarray, x: float, y: float) -> float:
    """Bicubic intensity at a real-valued position (x right, y down).

    The position must be at least two pixels inside the image border.
    """
    image = np.asarray(image, dtype=float)
    value = _sample_bicubic(image, np.array([x], dtype=float), np.array([y], dtype=float))
    return float(value[0])


def integer_search(
    ref: np.ndarray,
    deformed: np.ndarray,
    point: tuple[int, int],
    params: DicParams,
) -> tuple[int, int, float]:
    """Best integer displacement by exhaustive ZNCC over the search window.

    The window spans the rounded initial guess +- search_radius on both axes.
    Ties pick the smallest (dv, du) lexicographically.  Raises SubsetError if
    every candidate (or the reference subset) has zero variance.
    """
    x, y = point
    half = params.half_subset
    radius = params.search_radius
    gx = int(round(params.initial_guess[0]))
    gy = int(round(params.initial_guess[1]))

    subset = ref[y - half : y + half + 1, x - half : x + half + 1]
    da = subset - subset.mean()
    na2 = float((da * da).sum())
    if na2 == 0.0:
        raise SubsetError(f"reference subset at {point} has zero variance")

    patch = deformed[
        y + gy - half - radius : y + gy + half + radius + 1,
        x + gx - half - radius : x + gx + half + radius + 1,
    ]
    span = 2 * (half + radius) + 1
    if patch.shape != (span, span):
        raise SubsetError(f"search window at {point} leaves the image")

    windows = sliding_window_view(patch, (2 * half + 1, 2 * half + 1))
    npix = (2 * half + 1) ** 2
    sums = windows.sum(axis=(2, 3))
    sqsums = np.einsum("ijkl,ijkl->ij", windows, windows)
    cross = np.tensordot(windows, da, axes=([2, 3], [0, 1]))
    var = np.maximum(sqsums - sums * sums / npix, 0.0)
    valid = var > 0.0
    if not valid.any():
        raise SubsetError(f"all search candidates at {point} have zero variance")
    scores = np.full_like(var, -np.inf)
    np.divide(cross, np.sqrt(na2 * var), out=scores, where=valid)
    flat = int(np.argmax(scores))
    row, col = divmod(flat, scores.shape[1])
    return gx + col - radius, gy + row - radius, float(scores[row, col])


def _warp_matrix(p: np.ndarray) -> np.ndarray:
    u, ux, uy, v, vx, vy = p
    return np.array(
        [
            [1.0 + ux, uy, u],
            [vx, 1.0 + vy, v],
            [0.0, 0.0, 1.0],
        ]
    )


def _warp_params(m: np.ndarray) -> np.ndarray:
    return np.array([m[0, 2], m[0, 0] - 1.0, m[0, 1], m[1, 2], m[1, 0], m[1, 1] - 1.0])


@dataclass
class IcgnResult:
    p: np.ndarray  # (u, du/dx, du/dy, v, dv/dx, dv/dy)
    zncc: float
    iterations: int
    converged: bool

    @property
    def u(self) -> float:
        return float(self.p[0])

    @property
    def v(self) -> float:
        return float(self.p[3])


def icgn_refine(
    ref: np.ndarray,
    deformed: np.ndarray,
    point: tuple[int, int],
    p0: tuple[float, float] | np.ndarray,
    params: DicParams,
) -> IcgnResult:
    """Subpixel refinement of one subset by inverse-compositional Gauss-Newton.

    ``p0`` is either an integer (du, dv) estimate or a full 6-component shape
    parameter vector.  The reference subset, its central-difference gradients,
    the steepest-descent images, and the 6x6 Hessian are assembled once; each
    iteration only resamples the deformed image under the current warp and
    solves for an update, which is composed inversely onto the warp.
    Convergence is declared when the (u, v) part of the update drops to
    ``params.convergence_tol``.

    Failure (flat subset, singular Hessian, samples leaving the image, or a
    drift beyond search_radius + 1 from the initial guess) returns the last
    accepted parameters with ``converged=False``; it never raises for
    per-subset numerical trouble except SubsetError for degenerate input.
    """
    x0, y0 = point
    half = params.half_subset

    f = ref[y0 - half : y0 + half + 1, x0 - half : x0 + half + 1].astype(float)
    fbar = f.mean()
    df = (f - fbar).ravel()
    nf = math.sqrt(float(df @ df))
    if nf == 0.0:
        raise SubsetError(f"reference subset at {point} has zero variance")

    fx = (
        ref[y0 - half : y0 + half + 1, x0 - half + 1 : x0 + half + 2]
        - ref[y0 - half : y0 + half + 1, x0 - half - 1 : x0 + half]
    ) / 2.0
    fy = (
        ref[y0 - half + 1 : y0 + half + 2, x0 - half : x0 + half + 1]
        - ref[y0 - half - 1 : y0 + half, x0 - half : x0 + half + 1]
    ) / 2.0

    offsets = np.arange(-half, half + 1, dtype=float)
    xi, eta = np.meshgrid(offsets, offsets)
    p0 = np.asarray(p0, dtype=float)
    if p0.shape == (2,):
        p = np.array([p0[0], 0.0, 0.0, p0[1], 0.0, 0.0])
    elif p0.shape == (6,):
        p = p0.copy()
    else:
        raise ValueError(f"p0 must have 2 or 6 components, got shape {p0.shape}")

    jac = np.column_stack(
        [
            fx.ravel(),
            (fx * xi).ravel(),
            (fx * eta).ravel(),
            fy.ravel(),
            (fy * xi).ravel(),
            (fy * eta).ravel(),
        ]
    )
    hessian = jac.T @ jac
    try:
        np.linalg.cholesky(hessian)
    except np.linalg.LinAlgError:
        return IcgnResult(p=p, zncc=float("nan"), iterations=0, converged=False)

    guess_u, guess_v = params.initial_guess
    drift_limit = params.search_radius + 1.0
    warp = _warp_matrix(p)
    xi_flat, eta_flat = xi.ravel(), eta.ravel()
    quality = float("nan")

    for iteration in range(1, params.max_iterations + 1):
        xs = x0 + warp[0, 0] * xi_flat + warp[0, 1] * eta_flat + warp[0, 2]
        ys = y0 + warp[1, 0] * xi_flat + warp[1, 1] * eta_flat + warp[1, 2]
        try:
            g = _sample_bicubic(deformed, xs, ys)
        except InterpolationRangeError:
            return IcgnResult(p=_warp_params(warp), zncc=quality, iterations=iteration, converged=False)
        dg = g - g.mean()
        ng = math.sqrt(float(dg @ dg))
        if ng == 0.0 or not math.isfinite(ng):
            return IcgnResult(p=_warp_params(warp), zncc=float("nan"), iterations=iteration, converged=False)
        quality = float(df @ dg) / (nf * ng)

        residual = df - (nf / ng) * dg
        dp = -np.linalg.solve(hessian, jac.T @ residual)
        if not np.all(np.isfinite(dp)):
            return IcgnResult(p=_warp_params(warp), zncc=quality, iterations=iteration, converged=False)

        warp = warp @ np.linalg.inv(_warp_matrix(dp))
        p = _warp_params(warp)
        if abs(p[0] - guess_u) > drift_limit or abs(p[3] - guess_v) > drift_limit:
            return IcgnResult(p=p, zncc=quality, iterations=iteration, converged=False)
        if math.hypot(dp[0], dp[3]) <= params.convergence_tol:
            return IcgnResult(p=p, zncc=quality, iterations=iteration, converged=True)

    return IcgnResult(p=p, zncc=quality, iterations=params.max_iterations, converged=False)


def worker_count() -> int:
    """Worker threads for per-point parallelism; FFDIC_THREADS caps it (0 = auto)."""
    raw = os.environ.get("FFDIC_THREADS", "0").strip()
    try:
        n = int(raw) if raw else 0
    except ValueError:
        raise ValueError(f"FFDIC_THREADS must be an integer, got {raw!r}") from None
    if n < 0:
        raise ValueError(f"FFDIC_THREADS must be >= 0, got {n}")
    if n == 0:
        n = os.cpu_count() or 1
    return n


def correlate(ref: np.ndarray, deformed: np.ndarray, params: DicParams | None = None) -> DisplacementField:
    """Correlate every grid point of ``ref`` against ``deformed``.

    Per-point failures (degenerate subsets, lost tracking) are recorded as
    non-converged entries; they never abort the rest of the field.  Grid
    points are independent, so rows are dispatched to a thread pool sized by
    ``worker_count()``.
    """
    ref = np.asarray(ref, dtype=float)
    deformed = np.asarray(deformed, dtype=float)
    if ref.shape != deformed.shape:
        raise ValueError(f"image shapes differ: {ref.shape} vs {deformed.shape}")
    if params is None:
        params = DicParams()
    grid = build_grid(params, ref.shape)

    n = len(grid)
    u = np.full(n, np.nan)
    v = np.full(n, np.nan)
    quality = np.full(n, np.nan)
    iterations = np.zeros(n, dtype=int)
    converged = np.zeros(n, dtype=bool)

    def solve_row(row: int):
        results = []
        y = int(grid.ys[row])
        for x in grid.xs:
            x = int(x)
            try:
                du, dv, _ = integer_search(ref, deformed, (x, y), params)
                res = icgn_refine(ref, deformed, (x, y), (float(du), float(dv)), params)
                results.append((res.u, res.v, res.zncc, res.iterations, res.converged))
            except SubsetError:
                results.append((np.nan, np.nan, np.nan, 0, False))
        return results

    workers = min(worker_count(), grid.rows)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            per_row = list(pool.map(solve_row, range(grid.rows)))
    else:
        per_row = [solve_row(r) for r in range(grid.rows)]

    idx = 0
    for row_results in per_row:
        for pu, pv, pq, pit, pok in row_results:
            u[idx], v[idx], quality[idx] = pu, pv, pq
            iterations[idx], converged[idx] = pit, pok
            idx += 1

    return DisplacementField(
        grid=grid, u=u, v=v, zncc=quality, iterations=iterations, converged=converged, params=params
    )


FIELD_COLUMNS = ("x", "y", "u", "v", "zncc", "iterations", "converged")


def write_field_csv(path, field: DisplacementField) -> None:
    """Write a displacement field as CSV with columns x,y,u,v,zncc,iterations,converged."""
    points = field.grid.points
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(FIELD_COLUMNS)
        for i in range(len(field.grid)):
            writer.writerow(
                [
                    int(points[i, 0]),
                    int(points[i, 1]),
                    repr(float(field.u[i])),
                    repr(float(field.v[i])),
                    repr(float(field.zncc[i])),
                    int(field.iterations[i]),
                    int(field.converged[i]),
                ]
            )


def read_field_csv(path) -> DisplacementField:
    """Read a displacement field written by ``write_field_csv``."""
    with open(path, "r", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != FIELD_COLUMNS:
            raise ValueError(f"{path}: expected header {','.join(FIELD_COLUMNS)}")
        rows = [row for row in reader if row]
    if not rows:
        raise ValueError(f"{path}: field file contains no points")
    xs = np.unique(np.array([int(r[0]) for r in rows]))
    ys = np.unique(np.array([int(r[1]) for r in rows]))
    grid = SubsetGrid(xs=xs, ys=ys)
    if len(grid) != len(rows):
        raise ValueError(f"{path}: points do not form a complete rectangular grid")
    expected = grid.points
    actual = np.array([[int(r[0]), int(r[1])] for r in rows])
    if not np.array_equal(expected, actual):
        raise ValueError(f"{path}: points are not in row-major grid order")
    return DisplacementField(
        grid=grid,
        u=np.array([float(r[2]) for r in rows]),
        v=np.array([float(r[3]) for r in rows]),
        zncc=np.array([float(r[4]) for r in rows]),
        iterations=np.array([int(r[5]) for r in rows]),
        converged=np.array([bool(int(r[6])) for r in rows]),
    )
