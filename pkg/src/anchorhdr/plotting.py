"""Figure rendering for evaluation reports.

Two figure kinds accompany the tab-separated tables:

* a speed/quality scatter (runtime vs PSNR, one point per report),
* per-frame PSNR traces that make flicker visible as a wobbly line.

Traces are drawn without antialiasing in a fixed color so rendered output
can be checked programmatically.
"""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

TRACE_COLOR = "#d62728"
TRACE_RGB = (214, 39, 40)


def parse_table(path) -> list:
    """Read a TSV table with a header row into a list of row dicts."""
    lines = Path(path).read_text().splitlines()
    if not lines:
        raise ValueError(f"{path}: empty table")
    header = lines[0].split("\t")
    rows = []
    for line in lines[1:]:
        if not line.strip():
            continue
        rows.append(dict(zip(header, line.split("\t"))))
    return rows


def render_speed_quality_scatter(points: list, path) -> Path:
    """Scatter of (label, runtime_ms, psnr_t) triples."""
    if not points:
        raise ValueError("no points to plot")
    fig, ax = plt.subplots(figsize=(5, 4))
    for label, runtime_ms, psnr_t in points:
        ax.scatter([runtime_ms], [psnr_t], s=40)
        ax.annotate(label, (runtime_ms, psnr_t), textcoords="offset points",
                    xytext=(4, 4), fontsize=8)
    ax.set_xlabel("runtime per sequence (ms)")
    ax.set_ylabel("tone-mapped PSNR (dB)")
    ax.set_title("speed / quality")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)
    return Path(path)


def render_per_frame_trace(values: list, path, label: str = "") -> Path:
    """Line plot of a per-frame metric; flat line means no flicker."""
    if not values:
        raise ValueError("no per-frame values to plot")
    fig, ax = plt.subplots(figsize=(5, 3))
    ax.plot(range(1, len(values) + 1), values, color=TRACE_COLOR, linewidth=2,
            antialiased=False, marker=None)
    ax.set_xlabel("frame")
    ax.set_ylabel("PSNR (dB)")
    if label:
        ax.set_title(label)
    lo, hi = min(values), max(values)
    if math.isclose(lo, hi):
        ax.set_ylim(lo - 1.0, hi + 1.0)
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)
    return Path(path)


def plot_reports(report_paths: list, out_dir) -> list:
    """Render the scatter and all per-frame traces for the given reports.

    Every report.tsv contributes its AGGREGATE row as one scatter point;
    sibling ``*_frames.tsv`` files contribute one trace figure each.
    """
    report_paths = [Path(p) for p in report_paths]
    if not report_paths:
        raise ValueError("no reports given")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    points = []
    for report in report_paths:
        rows = parse_table(report)
        agg = [r for r in rows if r.get("sequence") == "AGGREGATE"]
        row = agg[0] if agg else rows[-1]
        points.append((report.parent.name, float(row["runtime_ms"]), float(row["psnr_t"])))
    written.append(render_speed_quality_scatter(points, out / "scatter.png"))

    for report in report_paths:
        for frames_file in sorted(report.parent.glob("*_frames.tsv")):
            rows = parse_table(frames_file)
            values = [float(r["psnr"]) for r in rows]
            name = frames_file.name[: -len("_frames.tsv")]
            written.append(render_per_frame_trace(values, out / f"trace_{name}.png", label=name))
    return written
