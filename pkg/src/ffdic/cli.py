"""Command-line entry points.

The ``ffdic`` command exposes the library stages individually (speckle
rendering, fill-factor resampling, correlation, strain) plus the full
experiment harness.  Image files are 16-bit binary PGM; tabular outputs are
CSV; configuration is JSON.
"""

import argparse
import json
import logging
import sys

from . import __version__
from .dic import DicParams, correlate, read_field_csv, write_field_csv
from .experiment import (
    ConfigError,
    ExperimentConfig,
    config_from_dict,
    config_to_dict,
    dic_params_from_dict,
    run_experiment,
)
from .fillfactor import SCHEMES, resample
from .imaging import DotSet, SpeckleSpec, add_noise, gaussian_blur, generate_dots, rasterize
from .pgm import read_pgm, write_pgm
from .strain import StrainParams, strain_field, write_strain_csv

log = logging.getLogger(__name__)


def cmd_speckle_generate(args) -> int:
    if args.dots_in:
        dots = DotSet.load(args.dots_in)
        foreground, background = args.foreground, args.background
    else:
        if args.diameter is None or args.spacing is None:
            raise ConfigError("either --dots-in or both --diameter and --spacing are required")
        spec = SpeckleSpec(
            dot_diameter=args.diameter,
            mean_spacing=args.spacing,
            foreground=args.foreground,
            background=args.background,
            blur_sigma=args.blur_sigma,
            noise_sigma=args.noise_sigma,
            seed=args.seed,
        )
        dots = generate_dots(spec, args.width, args.height)
        foreground, background = spec.foreground, spec.background

    image = rasterize(
        dots,
        shift=(args.shift_x, args.shift_y),
        width=args.width,
        height=args.height,
        foreground=foreground,
        background=background,
    )
    if args.blur_sigma > 0:
        image = gaussian_blur(image, args.blur_sigma)
    if args.noise_sigma > 0:
        image = add_noise(image, args.noise_sigma, args.noise_seed)
    write_pgm(args.out, image)
    log.info("wrote %s (%dx%d, %d dots)", args.out, args.width, args.height, len(dots))
    if args.dots_out:
        dots.save(args.dots_out)
        log.info("wrote %s", args.dots_out)
    return 0


def cmd_ff_resample(args) -> int:
    image = read_pgm(args.input)
    write_pgm(args.out, resample(image, args.scheme))
    log.info("wrote %s (%s)", args.out, args.scheme)
    return 0


def cmd_dic_run(args) -> int:
    ref = read_pgm(args.ref)
    deformed = read_pgm(args.deformed)
    if args.config:
        with open(args.config, "r", encoding="ascii") as fh:
            params = dic_params_from_dict(json.load(fh))
    else:
        params = DicParams()
    field = correlate(ref, deformed, params)
    write_field_csv(args.out, field)
    n_ok = int(field.converged.sum())
    log.info("wrote %s (%d/%d points converged)", args.out, n_ok, len(field.grid))
    return 0


def cmd_strain(args) -> int:
    field = read_field_csv(args.field)
    strains = strain_field(field, StrainParams(window=args.window))
    write_strain_csv(args.out, strains)
    log.info("wrote %s (%d strain points)", args.out, len(strains))
    return 0


def cmd_experiment_run(args) -> int:
    from .report import emit_report  # defers the matplotlib import

    if args.config:
        with open(args.config, "r", encoding="ascii") as fh:
            config = config_from_dict(json.load(fh))
    else:
        config = ExperimentConfig()
    report = run_experiment(config)
    paths = emit_report(report, args.out_dir, figures=not args.no_figures)
    for path in paths:
        log.info("wrote %s", path)
    failed = report.failed_cells
    if failed:
        for cell in failed:
            log.error(
                "cell failed: %s/%s shift (%g, %g): %s",
                cell.pattern,
                cell.scheme,
                cell.dx,
                cell.dy,
                cell.error,
            )
        return 1
    return 0


def cmd_experiment_init(args) -> int:
    config = ExperimentConfig.full_scale() if args.full_scale else ExperimentConfig()
    with open(args.out, "w", encoding="ascii") as fh:
        json.dump(config_to_dict(config), fh, indent=2)
        fh.write("\n")
    log.info("wrote %s", args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ffdic",
        description="Speckle synthesis, fill-factor resampling, and subset DIC",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    top = parser.add_subparsers(dest="command", required=True)

    speckle = top.add_parser("speckle", help="synthetic speckle patterns")
    speckle_sub = speckle.add_subparsers(dest="subcommand", required=True)
    gen = speckle_sub.add_parser("generate", help="render a speckle pattern to PGM")
    gen.add_argument("--diameter", type=float, help="dot diameter (px)")
    gen.add_argument("--spacing", type=float, help="mean dot spacing (px)")
    gen.add_argument("--width", type=int, default=512)
    gen.add_argument("--height", type=int, default=512)
    gen.add_argument("--seed", type=int, default=0, help="dot placement seed")
    gen.add_argument("--foreground", type=float, default=0.0, help="dot intensity")
    gen.add_argument("--background", type=float, default=1.0)
    gen.add_argument("--blur-sigma", type=float, default=0.0, help="Gaussian blur sigma (px)")
    gen.add_argument("--noise-sigma", type=float, default=0.0, help="additive noise sigma")
    gen.add_argument("--noise-seed", type=int, default=1)
    gen.add_argument("--shift-x", type=float, default=0.0, help="applied translation (px)")
    gen.add_argument("--shift-y", type=float, default=0.0)
    gen.add_argument("--dots-in", help="rasterize an existing dot set (JSON)")
    gen.add_argument("--dots-out", help="also save the dot set (JSON)")
    gen.add_argument("--out", required=True, help="output PGM path")
    gen.set_defaults(func=cmd_speckle_generate)

    ff = top.add_parser("ff", help="fill-factor resampling")
    ff_sub = ff.add_subparsers(dest="subcommand", required=True)
    res = ff_sub.add_parser("resample", help="resample a PGM to half resolution")
    res.add_argument("--scheme", required=True, choices=SCHEMES)
    res.add_argument("--in", dest="input", required=True, help="input PGM")
    res.add_argument("--out", required=True, help="output PGM")
    res.set_defaults(func=cmd_ff_resample)

    dic = top.add_parser("dic", help="digital image correlation")
    dic_sub = dic.add_subparsers(dest="subcommand", required=True)
    run = dic_sub.add_parser("run", help="correlate an image pair")
    run.add_argument("--ref", required=True, help="reference PGM")
    run.add_argument("--def", dest="deformed", required=True, help="deformed PGM")
    run.add_argument("--config", help="DIC parameter JSON")
    run.add_argument("--out", required=True, help="output field CSV")
    run.set_defaults(func=cmd_dic_run)

    strain = top.add_parser("strain", help="strain from a displacement field")
    strain.add_argument("--field", required=True, help="field CSV from 'dic run'")
    strain.add_argument("--window", type=int, default=7, help="plane-fit window (grid points)")
    strain.add_argument("--out", required=True, help="output strain CSV")
    strain.set_defaults(func=cmd_strain)

    experiment = top.add_parser("experiment", help="full fill-factor experiment")
    exp_sub = experiment.add_subparsers(dest="subcommand", required=True)
    exp_run = exp_sub.add_parser("run", help="run all cells and write the report")
    exp_run.add_argument("--config", help="experiment config JSON (defaults used if omitted)")
    exp_run.add_argument("--out-dir", required=True)
    exp_run.add_argument("--no-figures", action="store_true", help="skip PNG rendering")
    exp_run.set_defaults(func=cmd_experiment_run)
    exp_init = exp_sub.add_parser("init", help="write a config file with the defaults")
    exp_init.add_argument("--out", required=True)
    exp_init.add_argument(
        "--full-scale",
        action="store_true",
        help="full-size 2560x2160 sensor preset (long run)",
    )
    exp_init.set_defaults(func=cmd_experiment_init)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
