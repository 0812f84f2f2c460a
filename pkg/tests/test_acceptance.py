"""Acceptance checks for the whole pipeline.

Each test prints one summary line (visible under ``pytest -s``) before its
assertions, so a red run still reports every measured number.
"""

import dataclasses
import hashlib
import json
import statistics
import time

import numpy as np
import pytest

from ffdic.dic import DicParams, SubsetGrid, DisplacementField, correlate
from ffdic.experiment import ExperimentConfig, default_patterns, run_experiment
from ffdic.fillfactor import resample
from ffdic.imaging import SpeckleSpec, gaussian_blur, generate_dots, rasterize
from ffdic.report import emit_report
from ffdic.strain import strain_field


def _verdict(ok: bool) -> str:
    return "PASS" if ok else "FAIL"


def speckle_512() -> np.ndarray:
    spec = SpeckleSpec(dot_diameter=7.0, mean_spacing=10.5, seed=11)
    return rasterize(generate_dots(spec, 512, 512))


@pytest.fixture(scope="module")
def default_run(tmp_path_factory):
    """One full default experiment, timed end to end including report files."""
    out_dir = tmp_path_factory.mktemp("default_run")
    start = time.perf_counter()
    report = run_experiment(ExperimentConfig())
    emit_report(report, out_dir)
    elapsed = time.perf_counter() - start
    return report, elapsed, out_dir


def _cells_by_key(report, translation):
    return {
        (c.pattern, c.scheme): c
        for c in report.cells
        if (c.dx, c.dy) == translation
    }


def test_criterion_1_resampler_oracle_equivalence():
    rng = np.random.default_rng(20240101)
    start = time.perf_counter()
    mismatches = 0
    for _ in range(1000):
        image = rng.random((64, 64))
        rows = image.tolist()
        half = 32
        ff100 = [
            [
                (((rows[2 * r][2 * c] + rows[2 * r][2 * c + 1]) + rows[2 * r + 1][2 * c])
                 + rows[2 * r + 1][2 * c + 1]) / 4.0
                for c in range(half)
            ]
            for r in range(half)
        ]
        ff50 = [
            [(rows[2 * r][2 * c] + rows[2 * r + 1][2 * c]) / 2.0 for c in range(half)]
            for r in range(half)
        ]
        ff25 = [[rows[2 * r][2 * c] for c in range(half)] for r in range(half)]
        for scheme, expected in (("ff100", ff100), ("ff50", ff50), ("ff25", ff25)):
            if not np.array_equal(resample(image, scheme), np.array(expected)):
                mismatches += 1
    elapsed = time.perf_counter() - start
    ok = mismatches == 0 and elapsed < 5.0
    print(
        f"criterion 1: {1000 - mismatches}/1000 images bit-exact across all schemes "
        f"in {elapsed:.1f}s (limit 5s) -> {_verdict(ok)}"
    )
    assert mismatches == 0
    assert elapsed < 5.0


def test_criterion_2_self_correlation_identity():
    image = speckle_512()
    start = time.perf_counter()
    field = correlate(image, image, DicParams())
    elapsed = time.perf_counter() - start
    max_u = float(np.max(np.abs(field.u)))
    max_v = float(np.max(np.abs(field.v)))
    max_dz = float(np.max(np.abs(1.0 - field.zncc)))
    ok = (
        field.converged.all()
        and max_u <= 1e-6
        and max_v <= 1e-6
        and max_dz <= 1e-9
        and elapsed < 10.0
    )
    print(
        f"criterion 2: {len(field.grid)} points, max|u|={max_u:.1e} max|v|={max_v:.1e} "
        f"(limit 1e-6), max|1-zncc|={max_dz:.1e} (limit 1e-9), {elapsed:.1f}s "
        f"(limit 10s) -> {_verdict(ok)}"
    )
    assert field.converged.all()
    assert max_u <= 1e-6 and max_v <= 1e-6
    assert max_dz <= 1e-9
    assert elapsed < 10.0


def test_criterion_3_integer_shift_exactness():
    image = speckle_512()
    worst = 0.0
    all_converged = True
    for dx, dy in ((5, 0), (0, 3), (3, 2)):
        deformed = np.roll(image, (dy, dx), axis=(0, 1))
        params = dataclasses.replace(DicParams(), initial_guess=(float(dx), float(dy)))
        field = correlate(image, deformed, params)
        all_converged = all_converged and bool(field.converged.all())
        worst = max(
            worst,
            float(np.max(np.abs(field.u - dx))),
            float(np.max(np.abs(field.v - dy))),
        )
    ok = all_converged and worst <= 1e-6
    print(
        f"criterion 3: max per-point error {worst:.1e} px (limit 1e-6), "
        f"convergence {'100%' if all_converged else '<100%'} -> {_verdict(ok)}"
    )
    assert all_converged
    assert worst <= 1e-6


def test_criterion_4_subpixel_accuracy_sweep():
    spec = dataclasses.replace(default_patterns(20240101)[0].spec, noise_sigma=0.0)
    dots = generate_dots(spec, 1024, 1024)

    def render(shift):
        image = rasterize(dots, shift=shift)
        return gaussian_blur(image, spec.blur_sigma)

    reference = resample(render((0.0, 0.0)), "ff100")
    worst_bias = 0.0
    worst_std = 0.0
    for t in np.arange(0.1, 0.95, 0.1):
        t = round(float(t), 1)
        deformed = resample(render((2.0 * t, 0.0)), "ff100")
        params = dataclasses.replace(DicParams(), initial_guess=(t, 0.0))
        field = correlate(reference, deformed, params)
        assert field.converged.all()
        worst_bias = max(worst_bias, abs(float(np.mean(field.u)) - t))
        worst_std = max(worst_std, float(np.std(field.u)))
    ok = worst_bias <= 0.02 and worst_std <= 0.02
    print(
        f"criterion 4: worst |mean bias| {worst_bias:.4f} px, worst std "
        f"{worst_std:.4f} px over shifts 0.1..0.9 (limits 0.02/0.02) -> {_verdict(ok)}"
    )
    assert worst_bias <= 0.02
    assert worst_std <= 0.02


def test_criterion_5_strain_exactness():
    xs = 50 + 10 * np.arange(12)
    ys = 40 + 10 * np.arange(11)
    grid = SubsetGrid(xs=xs, ys=ys)
    n = len(grid)
    ones = np.ones(n)

    def field_from(u_fn, v_fn):
        u = np.array([u_fn(x, y) for x, y in grid.points])
        v = np.array([v_fn(x, y) for x, y in grid.points])
        return DisplacementField(
            grid=grid, u=u, v=v, zncc=ones, iterations=ones.astype(int),
            converged=np.ones(n, dtype=bool),
        )

    linear = strain_field(
        field_from(lambda x, y: 3e-4 * x - 1e-4 * y, lambda x, y: 2e-4 * x + 5e-4 * y)
    )
    linear_dev = max(
        float(np.max(np.abs(linear.exx - 3e-4))),
        float(np.max(np.abs(linear.eyy - 5e-4))),
        float(np.max(np.abs(linear.exy - 5e-5))),
    )
    rigid = strain_field(field_from(lambda x, y: 64.0, lambda x, y: 0.25))
    rigid_exact = (
        bool(np.all(rigid.exx == 0.0))
        and bool(np.all(rigid.eyy == 0.0))
        and bool(np.all(rigid.exy == 0.0))
    )
    ok = linear_dev <= 1e-12 and rigid_exact
    print(
        f"criterion 5: linear max deviation {linear_dev:.1e} (limit 1e-12), "
        f"rigid strain {'exactly zero' if rigid_exact else 'NONZERO'} -> {_verdict(ok)}"
    )
    assert linear_dev <= 1e-12
    assert rigid_exact


def test_criterion_6_large_translation_fill_factor_pattern(default_run):
    report, _, _ = default_run
    cells = _cells_by_key(report, report.config.translations[0])
    assert all(c.error is None for c in cells.values())

    a_values = [cells[("a", s)].stats.std_u for s in ("ff100", "ff50", "ff25")]
    spread_a = (max(a_values) - min(a_values)) / cells[("a", "ff100")].stats.std_u

    pct = {
        (p, s): cells[(p, s)].pct_increase["std_u"]
        for p in ("a", "b", "c")
        for s in ("ff50", "ff25")
    }
    reduced_bc = [pct[("b", "ff50")], pct[("b", "ff25")], pct[("c", "ff50")], pct[("c", "ff25")]]
    increase = {p: max(pct[(p, "ff50")], pct[(p, "ff25")]) for p in ("a", "b", "c")}

    ok = (
        spread_a <= 0.10
        and all(v >= 0.0 for v in reduced_bc)
        and increase["b"] > increase["a"]
        and increase["b"] > increase["c"]
    )
    print(
        "criterion 6: spread(a) {:.1f}% (limit 10%), min pct(b,c) {:.1f}% (>= 0), "
        "max increase a/b/c = {:.0f}/{:.0f}/{:.0f}% (b largest) -> {}".format(
            100 * spread_a,
            min(reduced_bc),
            increase["a"],
            increase["b"],
            increase["c"],
            _verdict(ok),
        )
    )
    assert spread_a <= 0.10
    assert all(v >= 0.0 for v in reduced_bc)
    assert increase["b"] > increase["a"] and increase["b"] > increase["c"]


def test_criterion_7_subpixel_translation_fill_factor_pattern():
    masters = (20240101, 20240102, 20240103, 20240104, 20240105)
    samples = {
        key: []
        for key in ("v25", "v50", "e25", "e50", "big_u25", "big_v25", "big_e25")
    }
    for master in masters:
        base = default_patterns(master)[1]
        pattern = dataclasses.replace(
            base, spec=dataclasses.replace(base.spec, noise_sigma=0.005)
        )
        config = ExperimentConfig(patterns=[pattern], seed=master)
        report = run_experiment(config)
        assert report.failed_cells == []
        sub = _cells_by_key(report, config.translations[1])
        big = _cells_by_key(report, config.translations[0])
        samples["v25"].append(sub[("b", "ff25")].pct_increase["std_v"])
        samples["v50"].append(sub[("b", "ff50")].pct_increase["std_v"])
        samples["e25"].append(sub[("b", "ff25")].pct_increase["std_eyy"])
        samples["e50"].append(sub[("b", "ff50")].pct_increase["std_eyy"])
        samples["big_u25"].append(big[("b", "ff25")].pct_increase["std_u"])
        samples["big_v25"].append(big[("b", "ff25")].pct_increase["std_v"])
        samples["big_e25"].append(big[("b", "ff25")].pct_increase["std_eyy"])

    med = {k: statistics.median(v) for k, v in samples.items()}
    ok = (
        med["v25"] >= 10.0
        and med["e25"] >= 10.0
        and med["v25"] > med["v50"]
        and med["e25"] > med["e50"]
        and med["v25"] > med["big_u25"]
        and med["v25"] > med["big_v25"]
        and med["e25"] > med["big_e25"]
    )
    print(
        "criterion 7: medians over 5 seeds, subpixel pct(std_v) ff25/ff50 = "
        "{v25:.0f}/{v50:.0f}%, pct(std_eyy) ff25/ff50 = {e25:.0f}/{e50:.0f}% "
        "(ff25 >= 10% and > ff50); 64px ff25 pct u/v/eyy = "
        "{big_u25:.0f}/{big_v25:.0f}/{big_e25:.0f}% (all < subpixel) -> {verdict}".format(
            verdict=_verdict(ok), **med
        )
    )
    assert med["v25"] >= 10.0 and med["e25"] >= 10.0
    assert med["v25"] > med["v50"] and med["e25"] > med["e50"]
    assert med["v25"] > med["big_u25"] and med["v25"] > med["big_v25"]
    assert med["e25"] > med["big_e25"]


def test_criterion_8_end_to_end_determinism(default_run, tmp_path):
    _, elapsed, first_dir = default_run
    second_report = run_experiment(ExperimentConfig())
    emit_report(second_report, tmp_path, figures=False)

    def digest(out_dir):
        with open(out_dir / "report.json") as fh:
            payload = json.load(fh)
        payload.pop("generated_at")
        return hashlib.sha256(
            json.dumps(payload, sort_keys=True).encode()
        ).hexdigest()

    first, second = digest(first_dir), digest(tmp_path)
    ok = first == second and elapsed < 300.0
    print(
        f"criterion 8: report digests {'identical' if first == second else 'DIFFER'} "
        f"({first[:12]}), default run {elapsed:.1f}s (limit 300s) -> {_verdict(ok)}"
    )
    assert first == second
    assert elapsed < 300.0
