"""Speckle synthesis, fill-factor resampling, and subset-based DIC.

The package renders synthetic speckle patterns at exact subpixel shifts,
derives reduced-fill-factor sensor images from them, measures the shifts back
with subset correlation, and compares the measurement errors across fill
factors.
"""

__version__ = "0.1.0"

from .imaging import (
    SpeckleSpec,
    DotSet,
    generate_dots,
    rasterize,
    gaussian_blur,
    add_noise,
)
from .fillfactor import (
    SCHEMES,
    resample,
    resample_ff100,
    resample_ff50,
    resample_ff25,
)
from .pgm import read_pgm, write_pgm
from .dic import (
    DicParams,
    SubsetGrid,
    DisplacementField,
    IcgnResult,
    GridError,
    SubsetError,
    build_grid,
    zncc,
    interpolate,
    integer_search,
    icgn_refine,
    correlate,
    worker_count,
    read_field_csv,
    write_field_csv,
)
from .strain import StrainParams, StrainField, strain_field, write_strain_csv
from .metrics import (
    ErrorStats,
    displacement_error,
    strain_error,
    percent_increase,
)
from .experiment import (
    ConfigError,
    ExperimentConfig,
    PatternConfig,
    CellResult,
    ErrorReport,
    run_experiment,
    config_from_dict,
    config_to_dict,
)

__all__ = [
    "__version__",
    "SpeckleSpec",
    "DotSet",
    "generate_dots",
    "rasterize",
    "gaussian_blur",
    "add_noise",
    "SCHEMES",
    "resample",
    "resample_ff100",
    "resample_ff50",
    "resample_ff25",
    "read_pgm",
    "write_pgm",
    "DicParams",
    "SubsetGrid",
    "DisplacementField",
    "IcgnResult",
    "GridError",
    "SubsetError",
    "build_grid",
    "zncc",
    "interpolate",
    "integer_search",
    "icgn_refine",
    "correlate",
    "worker_count",
    "read_field_csv",
    "write_field_csv",
    "StrainParams",
    "StrainField",
    "strain_field",
    "write_strain_csv",
    "ErrorStats",
    "displacement_error",
    "strain_error",
    "percent_increase",
    "ConfigError",
    "ExperimentConfig",
    "PatternConfig",
    "CellResult",
    "ErrorReport",
    "run_experiment",
    "config_from_dict",
    "config_to_dict",
]
