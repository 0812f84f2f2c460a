"""Experiment report emission.

Writes the machine-readable outputs (JSON report, summary CSV, per-group
bar-chart data) and renders the corresponding bar charts to PNG files so a
run's results can be read without any further tooling.
"""

import csv
import datetime
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .experiment import ErrorReport

SUMMARY_COLUMNS = (
    "pattern",
    "scheme",
    "dx",
    "dy",
    "mean_u",
    "mean_v",
    "std_u",
    "std_v",
    "std_exx",
    "std_eyy",
    "std_exy",
    "pct_inc_std_u",
    "pct_inc_std_v",
    "pct_inc_std_exx",
    "pct_inc_std_eyy",
    "n_converged",
    "n_points",
)

BAR_COLUMNS = (
    "scheme",
    "std_u",
    "std_v",
    "std_exx",
    "std_eyy",
    "pct_inc_std_u",
    "pct_inc_std_v",
    "pct_inc_std_exx",
    "pct_inc_std_eyy",
)


def _cell_value(cell, name):
    if name in ("pattern", "scheme", "dx", "dy"):
        return getattr(cell, name)
    if name in ("n_converged", "n_points"):
        return "" if cell.stats is None else getattr(cell.stats, name)
    if name.startswith("pct_inc_"):
        metric = name[len("pct_inc_") :]
        if cell.pct_increase is None or cell.pct_increase.get(metric) is None:
            return ""
        return repr(cell.pct_increase[metric])
    value = None if cell.stats is None else getattr(cell.stats, name)
    return "" if value is None else repr(value)


def write_summary_csv(path, report: ErrorReport) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SUMMARY_COLUMNS)
        for cell in report.cells:
            writer.writerow([_cell_value(cell, name) for name in SUMMARY_COLUMNS])


def _group_cells(report: ErrorReport):
    """Cells by (translation index, pattern label), preserving scheme order."""
    groups: dict[tuple[int, str], list] = {}
    for cell in report.cells:
        t_idx = report.config.translations.index((cell.dx, cell.dy))
        groups.setdefault((t_idx, cell.pattern), []).append(cell)
    return groups


def write_bar_data(out_dir: Path, report: ErrorReport) -> list[Path]:
    paths = []
    for (t_idx, pattern), cells in _group_cells(report).items():
        path = out_dir / f"bars_t{t_idx}_{pattern}.csv"
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(BAR_COLUMNS)
            for cell in cells:
                writer.writerow([_cell_value(cell, name) for name in BAR_COLUMNS])
        paths.append(path)
    return paths


_SCHEME_COLORS = {"ff100": "#4878a8", "ff50": "#e8a33d", "ff25": "#b5534c"}


def _bar_chart(ax, report: ErrorReport, t_idx: int, metric: str, ylabel: str):
    dx, dy = report.config.translations[t_idx]
    patterns = [p.label for p in report.config.patterns]
    schemes = list(report.config.schemes)
    width = 0.8 / len(schemes)
    for s_idx, scheme in enumerate(schemes):
        xs, heights, labels = [], [], []
        for p_idx, pattern in enumerate(patterns):
            cell = next(
                (
                    c
                    for c in report.cells
                    if c.pattern == pattern
                    and c.scheme == scheme
                    and (c.dx, c.dy) == (dx, dy)
                ),
                None,
            )
            value = None if cell is None or cell.stats is None else getattr(cell.stats, metric)
            pct = (
                None
                if cell is None or cell.pct_increase is None
                else cell.pct_increase.get(metric)
            )
            xs.append(p_idx + (s_idx - (len(schemes) - 1) / 2) * width)
            heights.append(0.0 if value is None else value)
            labels.append(pct)
        bars = ax.bar(
            xs, heights, width=width * 0.92, label=scheme, color=_SCHEME_COLORS.get(scheme)
        )
        for rect, pct in zip(bars, labels):
            if pct is not None and scheme != "ff100":
                ax.annotate(
                    f"{pct:+.1f}%",
                    (rect.get_x() + rect.get_width() / 2, rect.get_height()),
                    ha="center",
                    va="bottom",
                    fontsize=7,
                    rotation=90,
                )
    ax.set_xticks(range(len(patterns)))
    ax.set_xticklabels([f"speckle {p}" for p in patterns])
    ax.set_ylabel(ylabel)
    ax.set_title(f"translation ({dx:g}, {dy:g}) px")
    ax.margins(y=0.18)
    ax.legend(fontsize=8)


def render_figures(out_dir: Path, report: ErrorReport) -> list[Path]:
    """One displacement and one strain bar chart per translation case.

    The plotted component follows the dominant translation axis: horizontal
    shifts chart std_u / std_exx, vertical shifts chart std_v / std_eyy.
    """
    paths = []
    for t_idx, (dx, dy) in enumerate(report.config.translations):
        horizontal = abs(dx) >= abs(dy)
        disp_metric = "std_u" if horizontal else "std_v"
        strain_metric = "std_exx" if horizontal else "std_eyy"
        for kind, metric, ylabel in (
            ("displacement", disp_metric, f"{disp_metric} (px)"),
            ("strain", strain_metric, strain_metric),
        ):
            fig, ax = plt.subplots(figsize=(6.0, 3.6), dpi=150)
            _bar_chart(ax, report, t_idx, metric, ylabel)
            fig.tight_layout()
            path = out_dir / f"fig_t{t_idx}_{kind}.png"
            fig.savefig(path)
            plt.close(fig)
            paths.append(path)
    return paths


def emit_report(report: ErrorReport, out_dir, figures: bool = True) -> list[Path]:
    """Write report.json, summary.csv, bar-chart data, and (optionally) figures.

    Returns the written paths.  Everything except the embedded timestamp is a
    pure function of the experiment configuration.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    payload = report.to_dict()
    payload["generated_at"] = datetime.datetime.now(datetime.timezone.utc).isoformat(
        timespec="seconds"
    )
    json_path = out_dir / "report.json"
    with open(json_path, "w", encoding="ascii") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")

    summary_path = out_dir / "summary.csv"
    write_summary_csv(summary_path, report)

    paths = [json_path, summary_path]
    paths.extend(write_bar_data(out_dir, report))
    if figures:
        paths.extend(render_figures(out_dir, report))
    return paths
