"""Matplotlib report figures rendered next to the delimited outputs.

Each CLI step can optionally emit PNG summaries: ingest plots the district
record distribution, the hourly vehicle series, and the morning/afternoon
comparison; evaluate plots predicted vs actual on the test split; forecast
plots the forecast horizon against recent history.
"""

from __future__ import annotations

from collections import Counter
from datetime import timedelta
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.dates as mdates
import matplotlib.pyplot as plt

from .pipeline import HourlyDistrictRow, PeriodStats
from .training import Forecast

LEVEL_COLORS = {"low": "#2a9d3c", "medium": "#e0a800", "high": "#d23c2a"}


def _save(fig, outdir: Path, name: str) -> str:
    path = outdir / name
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)
    return str(path)


def render_ingest_figures(
    rows: list[HourlyDistrictRow],
    counts: Counter,
    periods: dict[str, PeriodStats],
    outdir: str | Path,
) -> list[str]:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written = []

    if counts:
        fig, ax = plt.subplots(figsize=(7, 4))
        names = sorted(counts)
        ax.bar(names, [counts[n] for n in names], color="#3572b0")
        ax.set_ylabel("traffic records")
        ax.set_title("Record distribution over districts")
        ax.tick_params(axis="x", rotation=30)
        written.append(_save(fig, outdir, "district_counts.png"))

    if rows:
        fig, ax = plt.subplots(figsize=(9, 4))
        for district in sorted({r.district for r in rows}):
            series = [r for r in rows if r.district == district]
            ax.plot(
                [r.timestamp for r in series],
                [r.num_vehicles for r in series],
                label=district,
                linewidth=0.8,
            )
        ax.set_ylabel("vehicles per hour")
        ax.set_title("Prepared hourly vehicle counts")
        ax.legend(fontsize=8)
        ax.xaxis.set_major_formatter(mdates.DateFormatter("%m-%d"))
        written.append(_save(fig, outdir, "hourly_vehicles.png"))

    if periods:
        fig, ax = plt.subplots(figsize=(5, 4))
        names = list(periods)
        ax.bar(names, [periods[n].total_vehicles for n in names], color=["#4a7fb5", "#b5764a"])
        ax.set_ylabel("total vehicles")
        ax.set_title("Vehicles by day period")
        written.append(_save(fig, outdir, "period_summary.png"))
    return written


def render_evaluation_figure(
    timestamps: list, actual: list[float], predicted: list[float], outdir: str | Path
) -> list[str]:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    fig, ax = plt.subplots(figsize=(9, 4))
    ax.plot(timestamps, actual, label="actual", color="#444444", linewidth=0.9)
    ax.plot(timestamps, predicted, label="predicted", color="#d23c2a", linewidth=0.9)
    ax.set_ylabel("vehicles per hour")
    ax.set_title("Test-split predictions vs actuals")
    ax.legend()
    ax.xaxis.set_major_formatter(mdates.DateFormatter("%m-%d %H:%M"))
    fig.autofmt_xdate()
    return [_save(fig, outdir, "evaluation.png")]


def render_forecast_figure(
    history: list[HourlyDistrictRow], forecast: Forecast, outdir: str | Path
) -> list[str]:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    fig, ax = plt.subplots(figsize=(9, 4))
    tail = history[-72:]
    ax.plot(
        [r.timestamp for r in tail],
        [r.num_vehicles for r in tail],
        label="history",
        color="#444444",
        linewidth=0.9,
    )
    ax.plot(
        [p.timestamp for p in forecast.points],
        [p.vehicles for p in forecast.points],
        label="forecast",
        color="#3572b0",
        linewidth=1.4,
        marker="o",
        markersize=3,
    )
    half_hour = timedelta(minutes=30)
    for p in forecast.points:
        ax.axvspan(
            p.timestamp - half_hour,
            p.timestamp + half_hour,
            color=LEVEL_COLORS[p.level],
            alpha=0.15,
            linewidth=0,
        )
    ax.set_ylabel("vehicles per hour")
    ax.set_title(f"{forecast.district} forecast ({forecast.model_type})")
    ax.legend()
    ax.xaxis.set_major_formatter(mdates.DateFormatter("%m-%d %H:%M"))
    fig.autofmt_xdate()
    return [_save(fig, outdir, "forecast.png")]
