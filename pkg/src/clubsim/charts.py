"""Static SVG charts and their underlying CSVs for experiment outputs.

Byte-identical output for identical inputs: the SVG hash salt is pinned,
no date metadata is written, and every number is serialized with 17
significant digits.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .analysis import MetricPoint, pareto_front
from .engine import EpisodeTrace

_SVG_RC = {"svg.hashsalt": "clubsim", "svg.fonttype": "path"}


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def _save(fig, path: Path) -> None:
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def _mean_series(traces: list[EpisodeTrace], per_step) -> np.ndarray:
    rows = [np.array([per_step(rec) for rec in tr.steps]) for tr in traces]
    return np.mean(rows, axis=0)


def emit_charts(
    traces_by_label: dict[str, list[EpisodeTrace]],
    metrics: list[MetricPoint],
    out_dir: Path,
) -> list[Path]:
    """Write the comparison charts and CSVs; returns the created paths.

    Produces a dominance-colored scatter of the metric points, mean
    temperature trajectories, mean executed mitigation rates, and mean
    abatement costs per label.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    created: list[Path] = []

    with plt.rc_context(_SVG_RC):
        if metrics:
            dominant = pareto_front(metrics)
            path = out_dir / "pareto_points.csv"
            lines = ["label,seed,temp_rise,gross_output_total,pareto_dominant"]
            for point, flag in zip(metrics, dominant):
                lines.append(
                    f"{point.label},{point.seed},{_fmt(point.temperature_rise)},"
                    f"{_fmt(point.gross_output_total)},{int(flag)}"
                )
            path.write_text("\n".join(lines) + "\n")
            created.append(path)

            fig, ax = plt.subplots(figsize=(6.4, 4.8))
            for point, flag in zip(metrics, dominant):
                color = "tab:green" if flag else "tab:red"
                marker = "o" if flag else "x"
                ax.scatter(
                    [point.temperature_rise], [point.gross_output_total],
                    color=color, marker=marker, zorder=3,
                )
                ax.annotate(
                    point.label,
                    (point.temperature_rise, point.gross_output_total),
                    textcoords="offset points", xytext=(4, 4), fontsize=8,
                )
            ax.scatter([], [], color="tab:green", marker="o", label="Pareto dominant")
            ax.scatter([], [], color="tab:red", marker="x", label="dominated")
            ax.set_xlabel("temperature rise (degC)")
            ax.set_ylabel("total gross output (trillion USD)")
            ax.set_title("Protocol variants: climate vs economy")
            ax.legend(loc="best", fontsize=8)
            svg = out_dir / "pareto_scatter.svg"
            _save(fig, svg)
            created.append(svg)

        if traces_by_label:
            series = {
                "temperature": (
                    lambda rec: rec.climate.t_at,
                    "mean atmospheric temperature rise (degC)",
                    "temperature_trajectories",
                ),
                "mitigation": (
                    lambda rec: float(np.mean(rec.mu_levels)) / 10.0,
                    "mean executed mitigation rate",
                    "mitigation_rate",
                ),
                "abatement": (
                    lambda rec: float(np.mean(rec.abatement_cost)),
                    "mean abatement cost (trillion USD)",
                    "abatement_cost",
                ),
            }
            for _, (per_step, ylabel, stem) in series.items():
                fig, ax = plt.subplots(figsize=(6.4, 4.8))
                lines = ["label,step," + stem]
                for label, traces in traces_by_label.items():
                    mean = _mean_series(traces, per_step)
                    ax.plot(np.arange(len(mean)), mean, label=label, marker=".")
                    for step, value in enumerate(mean):
                        lines.append(f"{label},{step},{_fmt(value)}")
                ax.set_xlabel("step (5-year periods)")
                ax.set_ylabel(ylabel)
                ax.legend(loc="best", fontsize=8)
                csv_path = out_dir / f"{stem}.csv"
                csv_path.write_text("\n".join(lines) + "\n")
                created.append(csv_path)
                svg_path = out_dir / f"{stem}.svg"
                _save(fig, svg_path)
                created.append(svg_path)

    return created


def emit_correlation_charts(
    features: dict[str, np.ndarray],
    cost: np.ndarray,
    results,
    out_dir: Path,
) -> list[Path]:
    """Scatter each development feature against total abatement cost."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    created: list[Path] = []
    by_name = {res.variable: res for res in results}
    with plt.rc_context(_SVG_RC):
        for name, values in features.items():
            fig, ax = plt.subplots(figsize=(4.8, 3.6))
            ax.scatter(values, cost, s=8, alpha=0.6)
            res = by_name[name]
            ax.set_xlabel(name.replace("_", " "))
            ax.set_ylabel("total abatement cost (trillion USD)")
            ax.set_title(f"r = {res.r:.3f}, p = {res.p:.4f}, n = {res.n}", fontsize=9)
            path = out_dir / f"correlation_{name}.svg"
            _save(fig, path)
            created.append(path)
    return created
