"""Error statistics over displacement and strain fields.

For a rigid-translation experiment the mean displacement estimates the applied
shift and the standard deviation is the random measurement error.  Statistics
are population values (divide by n) over converged points only; non-converged
points never contaminate them.
"""

from dataclasses import dataclass, asdict, replace

import numpy as np

from .dic import DisplacementField
from .strain import StrainField


@dataclass(frozen=True)
class ErrorStats:
    mean_u: float | None = None
    mean_v: float | None = None
    std_u: float | None = None
    std_v: float | None = None
    mean_exx: float | None = None
    mean_eyy: float | None = None
    mean_exy: float | None = None
    std_exx: float | None = None
    std_eyy: float | None = None
    std_exy: float | None = None
    n_points: int | None = None
    n_converged: int | None = None

    def merged(self, other: "ErrorStats") -> "ErrorStats":
        """Combine two partial results; fields set in ``other`` win."""
        updates = {k: v for k, v in asdict(other).items() if v is not None}
        return replace(self, **updates)

    def to_dict(self) -> dict:
        return asdict(self)


def displacement_error(field: DisplacementField) -> ErrorStats:
    """Mean and population std of u and v over converged points."""
    mask = np.asarray(field.converged, dtype=bool)
    n_converged = int(mask.sum())
    if n_converged < 2:
        raise ValueError(f"need at least 2 converged points, have {n_converged}")
    u = field.u[mask]
    v = field.v[mask]
    return ErrorStats(
        mean_u=float(u.mean()),
        mean_v=float(v.mean()),
        std_u=float(u.std()),
        std_v=float(v.std()),
        n_points=len(field.grid),
        n_converged=n_converged,
    )


def strain_error(strains: StrainField) -> ErrorStats:
    """Mean and population std of the strain components."""
    if len(strains) < 2:
        raise ValueError(f"need at least 2 strain points, have {len(strains)}")
    return ErrorStats(
        mean_exx=float(strains.exx.mean()),
        mean_eyy=float(strains.eyy.mean()),
        mean_exy=float(strains.exy.mean()),
        std_exx=float(strains.exx.std()),
        std_eyy=float(strains.eyy.std()),
        std_exy=float(strains.exy.std()),
    )


def percent_increase(err: float, baseline: float) -> float:
    """Percent change of ``err`` relative to a positive ``baseline``."""
    if not baseline > 0:
        raise ValueError(f"baseline must be > 0, got {baseline}")
    return 100.0 * (err - baseline) / baseline
