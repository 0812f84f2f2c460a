"""Fill-factor comparison experiment.

For each speckle pattern the harness renders one full-resolution reference
image and one image per rigid translation, degrades each through every
fill-factor scheme, correlates the half-resolution pairs, derives strain, and
reduces everything to per-cell error statistics.  A cell is one (pattern,
scheme, translation) combination; cells are independent and a failure in one
is reported without stopping the rest.

Translations are specified at the analyzed (half) resolution, so the applied
full-resolution shift is twice the nominal value.
"""

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from . import __version__
from .dic import DicParams, correlate
from .fillfactor import SCHEMES, resample
from .imaging import SpeckleSpec, add_noise, gaussian_blur, generate_dots, rasterize
from .metrics import ErrorStats, displacement_error, percent_increase, strain_error
from .strain import StrainParams, strain_field

log = logging.getLogger(__name__)

PRNG_ID = "numpy-pcg64"

# Metrics whose growth relative to ff100 is tracked per cell.
PCT_METRICS = ("std_u", "std_v", "std_exx", "std_eyy")


class ConfigError(ValueError):
    """Experiment configuration could not be validated."""


@dataclass(frozen=True)
class PatternConfig:
    label: str
    spec: SpeckleSpec


DEFAULT_NOISE_SIGMA = 3e-4


def default_patterns(seed: int) -> list[PatternConfig]:
    """The three stock patterns, dimensioned at half resolution:

    a: 7 px dots, 10.5 px spacing, high contrast, softened edges
    b: 3 px dots, 4.5 px spacing, high contrast, sharp
    c: geometry of (a) rendered through a heavy Gaussian blur (low contrast)

    The mild blur on (a) keeps the large dots band-limited, so every
    fill-factor scheme sees essentially the same signal and the scheme
    comparison for (a) isolates the noise path.  Pattern (b) is left sharp on
    purpose: its dots sit at the resolution limit of the subsampled schemes,
    which is what makes it sensitive to fill factor.

    ``seed`` feeds every pattern, so (a) and (c) share identical dot layouts
    and differ only in the optical blur.
    """
    half = [
        ("a", 7.0, 10.5, 1.25),
        ("b", 3.0, 4.5, 0.0),
        ("c", 7.0, 10.5, 7.0),
    ]
    patterns = []
    for label, diameter, spacing, blur in half:
        patterns.append(
            PatternConfig(
                label=label,
                spec=SpeckleSpec(
                    dot_diameter=2.0 * diameter,
                    mean_spacing=2.0 * spacing,
                    blur_sigma=2.0 * blur,
                    noise_sigma=DEFAULT_NOISE_SIGMA,
                    seed=seed,
                ),
            )
        )
    return patterns


DEFAULT_SEED = 20240101
# The large translation deliberately lands 0.3 px off an integer at the
# analyzed resolution: an exact-integer shift needs no interpolation at all,
# which would reduce every cell to a pure noise measurement, while a stage
# move of "about 64 px" in practice never hits an integer.  The subpixel case
# uses a different axis so the two cases stay independent.
DEFAULT_TRANSLATIONS = ((63.7, 0.0), (0.0, 0.4))


@dataclass
class ExperimentConfig:
    frame: tuple[int, int] = (1024, 1024)  # full-resolution sensor (width, height)
    patterns: list[PatternConfig] = field(default_factory=lambda: default_patterns(DEFAULT_SEED))
    schemes: tuple[str, ...] = SCHEMES
    translations: tuple[tuple[float, float], ...] = DEFAULT_TRANSLATIONS
    dic: DicParams = field(default_factory=DicParams)
    strain: StrainParams = field(default_factory=StrainParams)
    seed: int = DEFAULT_SEED

    def __post_init__(self):
        w, h = self.frame
        if w < 2 or h < 2 or w % 2 or h % 2:
            raise ConfigError(f"frame dimensions must be even and positive, got {w}x{h}")
        if not self.patterns:
            raise ConfigError("at least one pattern is required")
        labels = [p.label for p in self.patterns]
        if len(set(labels)) != len(labels):
            raise ConfigError(f"pattern labels must be unique, got {labels}")
        if not self.schemes:
            raise ConfigError("at least one scheme is required")
        for s in self.schemes:
            if s not in SCHEMES:
                raise ConfigError(f"unknown scheme {s!r}, expected one of {SCHEMES}")
        if not self.translations:
            raise ConfigError("at least one translation is required")
        for t in self.translations:
            if len(t) != 2 or not all(np.isfinite(t)):
                raise ConfigError(f"translations must be finite (dx, dy) pairs, got {t}")
        if self.seed < 0:
            raise ConfigError(f"seed must be a non-negative integer, got {self.seed}")

    @classmethod
    def full_scale(cls, seed: int = DEFAULT_SEED) -> "ExperimentConfig":
        """Full-size preset (2560x2160 sensor, 800x800 ROI); a long run."""
        return cls(
            frame=(2560, 2160),
            patterns=default_patterns(seed),
            dic=DicParams(roi=(240, 140, 800, 800)),
            seed=seed,
        )


_TOP_KEYS = {
    "frame_px_full",
    "seed",
    "schemes",
    "translations_px_quarter",
    "patterns",
    "dic",
    "strain",
}
_PATTERN_KEYS = {
    "label",
    "dot_diameter_px_quarter",
    "mean_spacing_px_quarter",
    "foreground",
    "background",
    "blur_sigma_px_quarter",
    "noise_sigma",
    "seed",
}
_DIC_KEYS = {
    "subset_size_px",
    "step_px",
    "roi_px",
    "search_radius_px",
    "max_iterations",
    "convergence_tol_px",
    "interpolation",
}
_STRAIN_KEYS = {"window_points"}


def _reject_unknown(mapping: dict, allowed: set, context: str) -> None:
    unknown = sorted(set(mapping) - allowed)
    if unknown:
        raise ConfigError(f"unknown key(s) in {context}: {', '.join(unknown)}")


def dic_params_from_dict(raw: dict, allow_initial_guess: bool = True) -> DicParams:
    """DicParams from the unit-suffixed JSON form, rejecting unknown keys."""
    raw = dict(raw)
    allowed = _DIC_KEYS | ({"initial_guess_px"} if allow_initial_guess else set())
    _reject_unknown(raw, allowed, "dic")
    guess = raw.get("initial_guess_px", (0.0, 0.0))
    return DicParams(
        subset_size=int(raw.get("subset_size_px", 41)),
        step=int(raw.get("step_px", 20)),
        roi=tuple(int(v) for v in raw["roi_px"]) if raw.get("roi_px") is not None else None,
        initial_guess=(float(guess[0]), float(guess[1])),
        search_radius=int(raw.get("search_radius_px", 10)),
        max_iterations=int(raw.get("max_iterations", 50)),
        convergence_tol=float(raw.get("convergence_tol_px", 1e-4)),
        interpolation=str(raw.get("interpolation", "bicubic")),
    )


def config_from_dict(raw: dict) -> ExperimentConfig:
    """Build a config from the JSON form, rejecting unknown keys.

    Pattern geometry, translations, and DIC lengths carry explicit units in
    their key names; quarter-resolution quantities are doubled internally to
    full-resolution pixels where the rendering happens.
    """
    if not isinstance(raw, dict):
        raise ConfigError(f"config must be a JSON object, got {type(raw).__name__}")
    _reject_unknown(raw, _TOP_KEYS, "config")
    if "initial_guess_px" in raw.get("dic", {}):
        raise ConfigError(
            "dic.initial_guess_px is not configurable here: the experiment sets "
            "the initial guess per translation"
        )

    seed = int(raw.get("seed", DEFAULT_SEED))
    frame = tuple(int(v) for v in raw.get("frame_px_full", (1024, 1024)))

    patterns = []
    if "patterns" in raw:
        for i, p in enumerate(raw["patterns"]):
            _reject_unknown(p, _PATTERN_KEYS, f"patterns[{i}]")
            try:
                label = p["label"]
                diameter = float(p["dot_diameter_px_quarter"])
                spacing = float(p["mean_spacing_px_quarter"])
            except KeyError as exc:
                raise ConfigError(f"patterns[{i}] is missing required key {exc}") from None
            spec = SpeckleSpec(
                dot_diameter=2.0 * diameter,
                mean_spacing=2.0 * spacing,
                foreground=float(p.get("foreground", 0.0)),
                background=float(p.get("background", 1.0)),
                blur_sigma=2.0 * float(p.get("blur_sigma_px_quarter", 0.0)),
                noise_sigma=float(p.get("noise_sigma", 0.005)),
                seed=int(p.get("seed", seed)),
            )
            patterns.append(PatternConfig(label=str(label), spec=spec))
    else:
        patterns = default_patterns(seed)

    dic = dic_params_from_dict(raw.get("dic", {}), allow_initial_guess=False)

    strain_raw = dict(raw.get("strain", {}))
    _reject_unknown(strain_raw, _STRAIN_KEYS, "strain")
    strain = StrainParams(window=int(strain_raw.get("window_points", 7)))

    translations = tuple(
        (float(t[0]), float(t[1])) for t in raw.get("translations_px_quarter", DEFAULT_TRANSLATIONS)
    )
    schemes = tuple(raw.get("schemes", SCHEMES))

    return ExperimentConfig(
        frame=frame,
        patterns=patterns,
        schemes=schemes,
        translations=translations,
        dic=dic,
        strain=strain,
        seed=seed,
    )


def config_to_dict(config: ExperimentConfig) -> dict:
    """Inverse of ``config_from_dict`` (emits quarter-resolution keys)."""
    return {
        "frame_px_full": list(config.frame),
        "seed": config.seed,
        "schemes": list(config.schemes),
        "translations_px_quarter": [list(t) for t in config.translations],
        "patterns": [
            {
                "label": p.label,
                "dot_diameter_px_quarter": p.spec.dot_diameter / 2.0,
                "mean_spacing_px_quarter": p.spec.mean_spacing / 2.0,
                "foreground": p.spec.foreground,
                "background": p.spec.background,
                "blur_sigma_px_quarter": p.spec.blur_sigma / 2.0,
                "noise_sigma": p.spec.noise_sigma,
                "seed": p.spec.seed,
            }
            for p in config.patterns
        ],
        "dic": {
            "subset_size_px": config.dic.subset_size,
            "step_px": config.dic.step,
            "roi_px": None if config.dic.roi is None else list(config.dic.roi),
            "search_radius_px": config.dic.search_radius,
            "max_iterations": config.dic.max_iterations,
            "convergence_tol_px": config.dic.convergence_tol,
            "interpolation": config.dic.interpolation,
        },
        "strain": {"window_points": config.strain.window},
    }


@dataclass
class CellResult:
    pattern: str
    scheme: str
    dx: float  # quarter-resolution pixels
    dy: float
    stats: ErrorStats | None = None
    pct_increase: dict | None = None
    bias_u: float | None = None
    bias_v: float | None = None
    error: str | None = None

    def to_dict(self) -> dict:
        return {
            "pattern": self.pattern,
            "scheme": self.scheme,
            "dx": self.dx,
            "dy": self.dy,
            "stats": None if self.stats is None else self.stats.to_dict(),
            "pct_increase": self.pct_increase,
            "bias_u": self.bias_u,
            "bias_v": self.bias_v,
            "error": self.error,
        }


@dataclass
class ErrorReport:
    config: ExperimentConfig
    cells: list[CellResult]
    version: str = __version__
    prng: str = PRNG_ID

    @property
    def failed_cells(self) -> list[CellResult]:
        return [c for c in self.cells if c.error is not None]

    def to_dict(self) -> dict:
        return {
            "version": self.version,
            "prng": self.prng,
            "seed": self.config.seed,
            "config": config_to_dict(self.config),
            "noise_sigma_is_default_assumption": all(
                p.spec.noise_sigma == DEFAULT_NOISE_SIGMA for p in self.config.patterns
            ),
            "cells": [c.to_dict() for c in self.cells],
        }


def _noise_seed(master: int, pattern_index: int, role: int) -> int:
    """Derive an independent substream seed; role 0 is the reference image,
    role t+1 the t-th translated image."""
    ss = np.random.SeedSequence([master, pattern_index, role])
    return int(ss.generate_state(1, np.uint64)[0])


def _render(spec: SpeckleSpec, dots, shift, frame, noise_seed: int) -> np.ndarray:
    width, height = frame
    img = rasterize(
        dots,
        shift=shift,
        width=width,
        height=height,
        foreground=spec.foreground,
        background=spec.background,
    )
    if spec.blur_sigma > 0:
        img = gaussian_blur(img, spec.blur_sigma)
    if spec.noise_sigma > 0:
        img = add_noise(img, spec.noise_sigma, noise_seed)
    return img


def run_experiment(config: ExperimentConfig | None = None) -> ErrorReport:
    """Run every (pattern, translation, scheme) cell and collect statistics.

    Rendering happens once per pattern and translation at full resolution;
    each scheme then sees its own half-resolution pair.  Any error inside a
    cell is captured on that cell's record and the remaining cells still run.
    """
    if config is None:
        config = ExperimentConfig()
    width, height = config.frame
    cells: list[CellResult] = []

    for p_idx, pattern in enumerate(config.patterns):
        spec = pattern.spec
        log.info("pattern %s: generating dots and reference render", pattern.label)
        try:
            dots = generate_dots(spec, width, height)
            ref_full = _render(spec, dots, (0.0, 0.0), config.frame, _noise_seed(config.seed, p_idx, 0))
            ref_half = {s: resample(ref_full, s) for s in config.schemes}
        except Exception as exc:  # noqa: BLE001  (cell isolation requires it)
            message = f"{type(exc).__name__}: {exc}"
            log.error("pattern %s failed to render: %s", pattern.label, message)
            for dx, dy in config.translations:
                for scheme in config.schemes:
                    cells.append(
                        CellResult(pattern=pattern.label, scheme=scheme, dx=dx, dy=dy, error=message)
                    )
            continue

        for t_idx, (dx, dy) in enumerate(config.translations):
            try:
                shifted_full = _render(
                    spec,
                    dots,
                    (2.0 * dx, 2.0 * dy),
                    config.frame,
                    _noise_seed(config.seed, p_idx, t_idx + 1),
                )
            except Exception as exc:  # noqa: BLE001
                message = f"{type(exc).__name__}: {exc}"
                log.error("pattern %s shift (%g, %g) failed to render: %s", pattern.label, dx, dy, message)
                for scheme in config.schemes:
                    cells.append(
                        CellResult(pattern=pattern.label, scheme=scheme, dx=dx, dy=dy, error=message)
                    )
                continue

            for scheme in config.schemes:
                cell = CellResult(pattern=pattern.label, scheme=scheme, dx=dx, dy=dy)
                try:
                    params = replace(config.dic, initial_guess=(dx, dy))
                    fielded = correlate(ref_half[scheme], resample(shifted_full, scheme), params)
                    strains = strain_field(fielded, config.strain)
                    stats = displacement_error(fielded).merged(strain_error(strains))
                    cell.stats = stats
                    cell.bias_u = stats.mean_u - dx
                    cell.bias_v = stats.mean_v - dy
                    log.info(
                        "cell %s/%s shift (%g, %g): std_u=%.2e std_v=%.2e converged %d/%d",
                        pattern.label,
                        scheme,
                        dx,
                        dy,
                        stats.std_u,
                        stats.std_v,
                        stats.n_converged,
                        stats.n_points,
                    )
                except Exception as exc:  # noqa: BLE001
                    cell.error = f"{type(exc).__name__}: {exc}"
                    log.error("cell %s/%s shift (%g, %g) failed: %s", pattern.label, scheme, dx, dy, cell.error)
                cells.append(cell)

    _attach_percent_increase(cells)
    return ErrorReport(config=config, cells=cells)


def _attach_percent_increase(cells: list[CellResult]) -> None:
    """Fill pct_increase per cell relative to the ff100 cell of its group.

    The comparison is only meaningful within one (pattern, translation)
    group.  The baseline row carries exact zeros; rows whose baseline is
    unavailable or non-positive carry None for that metric.
    """
    baselines: dict[tuple, ErrorStats | None] = {}
    for cell in cells:
        if cell.scheme == "ff100":
            baselines[(cell.pattern, cell.dx, cell.dy)] = cell.stats

    for cell in cells:
        if cell.stats is None:
            continue
        if cell.scheme == "ff100":
            cell.pct_increase = {m: 0.0 for m in PCT_METRICS}
            continue
        base = baselines.get((cell.pattern, cell.dx, cell.dy))
        pct: dict[str, float | None] = {}
        for metric in PCT_METRICS:
            value = getattr(cell.stats, metric)
            base_value = None if base is None else getattr(base, metric)
            if base_value is None or not base_value > 0 or value is None:
                pct[metric] = None
            else:
                pct[metric] = percent_increase(value, base_value)
        cell.pct_increase = pct
