"""Strain from a displacement field by local plane fitting.

Each strain point fits u(x, y) and v(x, y) with least-squares planes over a
square window of neighboring grid points and reads the engineering strains
off the plane slopes.  Fitting over a window instead of differencing adjacent
points attenuates displacement noise.
"""

import csv
from dataclasses import dataclass

import numpy as np

from .dic import DisplacementField


@dataclass(frozen=True)
class StrainParams:
    """``window`` is the plane-fit extent in grid points per side (odd, >= 3)."""

    window: int = 7

    def __post_init__(self):
        if self.window < 3 or self.window % 2 == 0:
            raise ValueError(f"window must be odd and >= 3, got {self.window}")

    def to_dict(self) -> dict:
        return {"window": self.window}


@dataclass
class StrainField:
    """Strain components at grid points where a full fit window was available."""

    x: np.ndarray
    y: np.ndarray
    exx: np.ndarray
    eyy: np.ndarray
    exy: np.ndarray

    def __len__(self) -> int:
        return len(self.x)


def strain_field(field: DisplacementField, params: StrainParams | None = None) -> StrainField:
    """Compute pointwise strain over every interior grid point.

    The output shrinks by (window - 1) / 2 grid points per side.  Within each
    window only converged points participate; a window whose converged points
    are too few or collinear (rank-deficient plane fit) is omitted from the
    output rather than filled with a guess.
    """
    if params is None:
        params = StrainParams()
    grid = field.grid
    half = params.window // 2
    rows, cols = grid.rows, grid.cols

    u = field.u.reshape(rows, cols)
    v = field.v.reshape(rows, cols)
    ok = field.converged.reshape(rows, cols)
    xs = grid.xs.astype(float)
    ys = grid.ys.astype(float)

    out_x, out_y, out_exx, out_eyy, out_exy = [], [], [], [], []
    for r in range(half, rows - half):
        for c in range(half, cols - half):
            rs = slice(r - half, r + half + 1)
            cs = slice(c - half, c + half + 1)
            mask = ok[rs, cs]
            if mask.sum() < 3:
                continue
            wx, wy = np.meshgrid(xs[cs] - xs[c], ys[rs] - ys[r])
            a = np.column_stack(
                [np.ones(mask.sum()), wx[mask].ravel(), wy[mask].ravel()]
            )
            # Centering the data keeps a constant field's slopes exactly zero.
            uw = u[rs, cs][mask]
            vw = v[rs, cs][mask]
            b = np.column_stack([uw - uw.mean(), vw - vw.mean()])
            coef, _, rank, _ = np.linalg.lstsq(a, b, rcond=None)
            if rank < 3:
                continue
            du_dx, du_dy = coef[1, 0], coef[2, 0]
            dv_dx, dv_dy = coef[1, 1], coef[2, 1]
            out_x.append(grid.xs[c])
            out_y.append(grid.ys[r])
            out_exx.append(du_dx)
            out_eyy.append(dv_dy)
            out_exy.append(0.5 * (du_dy + dv_dx))

    return StrainField(
        x=np.asarray(out_x, dtype=int),
        y=np.asarray(out_y, dtype=int),
        exx=np.asarray(out_exx, dtype=float),
        eyy=np.asarray(out_eyy, dtype=float),
        exy=np.asarray(out_exy, dtype=float),
    )


STRAIN_COLUMNS = ("x", "y", "exx", "eyy", "exy")


def write_strain_csv(path, strains: StrainField) -> None:
    """Write a strain field as CSV with columns x,y,exx,eyy,exy."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(STRAIN_COLUMNS)
        for i in range(len(strains)):
            writer.writerow(
                [
                    int(strains.x[i]),
                    int(strains.y[i]),
                    repr(float(strains.exx[i])),
                    repr(float(strains.eyy[i])),
                    repr(float(strains.exy[i])),
                ]
            )
