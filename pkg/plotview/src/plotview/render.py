"""Render experiment CSVs into figure-style images.

Reads only the CSV artifacts written by the experiment harness (never
recomputes statistics) and draws either a risk sweep (empirical points, mean
line, theory overlays, and a vertical marker at n = d) or a trace-growth
comparison (measured trace against the recursion and the asymptote).
Rendering is deterministic: fixed figure geometry, bundled fonts, and no
timestamp metadata, so identical inputs produce identical image bytes.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

# Column layouts the harness writes, in order; mismatches fail by name.
RISK_SWEEP_HEADER = [
    "n", "d", "gamma", "trials", "bias_sq", "var_A", "var_B",
    "excess_mean", "excess_median", "excess_stderr",
    "theory_bias", "theory_variance", "theory_excess",
    "seed", "wall_time_ms", "error",
]

TRACE_GROWTH_HEADER = [
    "n", "d", "gamma", "trials", "trace_mean",
    "increment_mean", "predicted_increment_mean",
    "recursion", "asymptote", "proj_perp_sq_mean",
    "increment_max_rel_err", "error",
]


class PlotKind(Enum):
    RISK_SWEEP = "risk-sweep"
    TRACE_GROWTH = "trace-growth"


class YScale(Enum):
    LOG = "log"
    LINEAR = "linear"


@dataclass(frozen=True)
class PlotJob:
    input_csv: str
    output_image: str
    kind: PlotKind
    y_scale: YScale = YScale.LOG


@dataclass
class RenderResult:
    """What was drawn; lets callers assert on layers without decoding pixels."""

    output_image: str
    scatter_points: int = 0
    has_mean_line: bool = False
    theory_curves: list[str] = field(default_factory=list)
    marker_x: Optional[float] = None
    curves: list[str] = field(default_factory=list)


class SchemaError(ValueError):
    """The input CSV does not match the expected column layout."""


def _parse_cell(cell: str) -> Optional[float]:
    return float(cell) if cell != "" else None


def load_rows(path: str, expected_header: list[str]) -> list[dict]:
    """Read a harness CSV, failing on the first column that deviates."""
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file, expected header {expected_header[0]!r}...")
        for i, want in enumerate(expected_header):
            got = header[i] if i < len(header) else None
            if got != want:
                raise SchemaError(
                    f"{path}: schema mismatch at column {i + 1}: expected {want!r}, got {got!r}"
                )
        rows = []
        for raw in reader:
            row = {}
            for key, cell in zip(expected_header, raw):
                row[key] = cell if key == "error" else _parse_cell(cell)
            rows.append(row)
    return rows


def _new_figure():
    # Fixed geometry keeps output bytes stable across reruns.
    return plt.subplots(figsize=(8.0, 5.0), dpi=120)


def _save(fig, path: str) -> None:
    if path.endswith(".svg"):
        plt.rcParams["svg.hashsalt"] = "plotview"
        fig.savefig(path, metadata={"Date": None})
    else:
        fig.savefig(path, metadata={"Software": None})
    plt.close(fig)


def _render_risk_sweep(job: PlotJob) -> RenderResult:
    rows = [r for r in load_rows(job.input_csv, RISK_SWEEP_HEADER) if r["excess_mean"] is not None]
    if not rows:
        raise SchemaError(f"{job.input_csv}: no usable rows (all excess_mean cells empty)")
    result = RenderResult(output_image=job.output_image)
    n = [r["n"] for r in rows]
    fig, ax = _new_figure()

    medians = [r["excess_median"] for r in rows]
    ax.scatter(n, medians, s=18, color="tab:blue", zorder=3, label="empirical median")
    result.scatter_points = len(medians)
    means = [r["excess_mean"] for r in rows]
    ax.scatter(n, means, s=10, color="tab:gray", alpha=0.6, zorder=2, label="empirical mean")
    result.scatter_points += len(means)
    ax.plot(n, means, color="tab:gray", linewidth=1.2, alpha=0.8)
    result.has_mean_line = True

    for column, color in (
        ("theory_bias", "tab:green"),
        ("theory_variance", "tab:orange"),
        ("theory_excess", "tab:red"),
    ):
        pts = [(r["n"], r[column]) for r in rows if r[column] is not None]
        if pts:
            xs, ys = zip(*pts)
            ax.plot(xs, ys, color=color, linewidth=1.5, label=column.replace("_", " "))
            result.theory_curves.append(column)

    d = rows[0]["d"]
    if d is not None:
        ax.axvline(d, color="black", linestyle="--", linewidth=1.0, label="n = d")
        result.marker_x = d

    ax.set_yscale(job.y_scale.value)
    ax.set_xlabel("training samples n")
    ax.set_ylabel("excess risk")
    ax.set_title("Excess risk vs. samples (min-norm least squares)")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    _save(fig, job.output_image)
    return result


def _render_trace_growth(job: PlotJob) -> RenderResult:
    rows = load_rows(job.input_csv, TRACE_GROWTH_HEADER)
    if not rows:
        raise SchemaError(f"{job.input_csv}: no data rows")
    result = RenderResult(output_image=job.output_image)
    n = [r["n"] for r in rows]
    fig, ax = _new_figure()

    measured = [r["trace_mean"] for r in rows]
    ax.scatter(n, measured, s=14, color="tab:blue", zorder=3, label="measured mean trace")
    result.scatter_points = len(measured)
    for column, color, label in (
        ("recursion", "tab:orange", "expected-denominator recursion"),
        ("asymptote", "tab:red", "gamma/(1-gamma) limit"),
    ):
        ax.plot(n, [r[column] for r in rows], color=color, linewidth=1.5, label=label)
        result.curves.append(column)

    ax.set_yscale(job.y_scale.value)
    ax.set_xlabel("training samples n")
    ax.set_ylabel("trace of inverse Gram matrix")
    ax.set_title("Inverse-Gram trace growth, one sample at a time")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    _save(fig, job.output_image)
    return result


def render(job: PlotJob) -> RenderResult:
    """CSV in, image out; pure transformation of the job's inputs."""
    if job.kind is PlotKind.RISK_SWEEP:
        return _render_risk_sweep(job)
    return _render_trace_growth(job)
