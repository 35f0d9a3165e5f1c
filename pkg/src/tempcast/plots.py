"""Figure rendering for reports, error maps, and diagnostics.

Everything renders straight to image files; there is no interactive
display. Figures land next to the delimited report they illustrate.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .errors import DataError
from .grids import GridSpec, MonthlyField, latitude_weights
from .verify import ScoreReport, acc, region_global, rmse


def plot_loss_history(history: Sequence[Mapping] | str | Path, out_path: str | Path) -> Path:
    """Training/validation loss curves from a history list or JSONL log."""
    if isinstance(history, (str, Path)):
        lines = Path(history).read_text().strip().splitlines()
        if not lines:
            raise DataError(f"{history}: empty loss history")
        history = [json.loads(line) for line in lines]
    epochs = [h["epoch"] for h in history]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(epochs, [h["train_loss"] for h in history], label="training")
    ax.plot(epochs, [h["val_loss"] for h in history], label="validation")
    ax.set_xlabel("epoch")
    ax.set_ylabel("latitude-weighted loss")
    ax.set_yscale("log")
    ax.legend()
    fig.tight_layout()
    out_path = Path(out_path)
    fig.savefig(out_path, dpi=120)
    plt.close(fig)
    return out_path


def plot_metric_series(
    reports: Mapping[str, ScoreReport],
    metric: str,
    region: str,
    out_path: str | Path,
) -> Path:
    """One panel per method: a metric's per-stamp series in one region."""
    methods = list(reports)
    if not methods:
        raise DataError("no reports to plot")
    fig, axes = plt.subplots(
        len(methods), 1, figsize=(8, 2.2 * len(methods)), sharex=True, squeeze=False
    )
    for ax, method in zip(axes[:, 0], methods):
        rows = [r for r in reports[method].rows if r.region == region]
        values = [getattr(r, metric) for r in rows]
        ax.plot(range(len(rows)), values, marker="o", markersize=2.5, linewidth=0.9)
        ax.set_ylabel(metric)
        ax.set_title(method, fontsize=9)
        step = max(1, len(rows) // 10)
        ax.set_xticks(range(0, len(rows), step))
        ax.set_xticklabels(
            [rows[i].stamp for i in range(0, len(rows), step)],
            rotation=45,
            fontsize=7,
        )
    fig.suptitle(f"{metric.upper()} over {region}")
    fig.tight_layout()
    out_path = Path(out_path)
    fig.savefig(out_path, dpi=120)
    plt.close(fig)
    return out_path


def plot_error_map(
    forecast: MonthlyField,
    truth: MonthlyField,
    out_path: str | Path,
    title: str = "forecast error",
) -> Path:
    """Forecast-minus-truth map with RMSE/ACC in the caption."""
    region = region_global(forecast.grid)
    err = forecast.values - truth.values
    lim = max(float(np.abs(err).max()), 1e-9)
    fig, ax = plt.subplots(figsize=(8, 4.2))
    grid = forecast.grid
    mesh = ax.pcolormesh(
        grid.lon, grid.lat, err, cmap="RdYlGn_r", vmin=-lim, vmax=lim, shading="auto"
    )
    fig.colorbar(mesh, ax=ax, label="error (K)")
    ax.set_xlabel("longitude")
    ax.set_ylabel("latitude")
    caption = (
        f"RMSE {rmse(forecast, truth, region):.3f} K, "
        f"ACC {acc(forecast, truth, region):.3f}"
    )
    ax.set_title(f"{title}\n{caption}", fontsize=10)
    fig.tight_layout()
    out_path = Path(out_path)
    fig.savefig(out_path, dpi=120)
    plt.close(fig)
    return out_path


def plot_hss_heatmap(
    reports: Mapping[str, ScoreReport], region: str, out_path: str | Path
) -> Path:
    """Method-by-stamp heatmap of Heidke scores in one region."""
    methods = list(reports)
    rows_by_method = []
    stamps: list[str] = []
    for method in methods:
        rows = [
            r
            for r in reports[method].rows
            if r.region == region and r.hss is not None
        ]
        if not rows:
            raise DataError(f"report {method!r} has no Heidke scores for {region}")
        if not stamps:
            stamps = [r.stamp for r in rows]
        rows_by_method.append([r.hss for r in rows])
    data = np.array(rows_by_method)
    fig, ax = plt.subplots(figsize=(max(6.0, 0.22 * len(stamps)), 1.2 + 0.5 * len(methods)))
    mesh = ax.pcolormesh(data, cmap="coolwarm", vmin=-50, vmax=100, shading="auto")
    fig.colorbar(mesh, ax=ax, label="HSS (%)")
    ax.set_yticks(np.arange(len(methods)) + 0.5)
    ax.set_yticklabels(methods, fontsize=8)
    step = max(1, len(stamps) // 16)
    ax.set_xticks(np.arange(0, len(stamps), step) + 0.5)
    ax.set_xticklabels(stamps[::step], rotation=45, fontsize=7)
    ax.set_title(f"Heidke skill score, {region}")
    fig.tight_layout()
    out_path = Path(out_path)
    fig.savefig(out_path, dpi=120)
    plt.close(fig)
    return out_path


def plot_global_mean_series(
    fields: Sequence[MonthlyField], out_path: str | Path
) -> Path:
    """Cosine-weighted global-mean temperature trend across a series."""
    if not fields:
        raise DataError("no fields to plot")
    grid: GridSpec = fields[0].grid
    w = latitude_weights(grid).weights[:, None]
    ordered = sorted(fields, key=lambda f: f.stamp.index)  # type: ignore[union-attr]
    means = [float((f.values * w).sum() / grid.n_lon) for f in ordered]
    labels = [str(f.stamp) for f in ordered]
    fig, ax = plt.subplots(figsize=(8, 4))
    ax.plot(range(len(means)), means, linewidth=0.9)
    step = max(1, len(labels) // 12)
    ax.set_xticks(range(0, len(labels), step))
    ax.set_xticklabels(labels[::step], rotation=45, fontsize=7)
    ax.set_ylabel("cosine-weighted global mean (K)")
    ax.set_title("Global mean temperature")
    fig.tight_layout()
    out_path = Path(out_path)
    fig.savefig(out_path, dpi=120)
    plt.close(fig)
    return out_path


def plot_ensemble_band(
    stamps: Sequence[str],
    member_values: np.ndarray,
    standalone: Sequence[float] | None,
    metric_name: str,
    out_path: str | Path,
) -> Path:
    """Ensemble mean with a one-standard-deviation band per stamp."""
    mean = member_values.mean(axis=0)
    std = member_values.std(axis=0)
    x = np.arange(len(stamps))
    fig, ax = plt.subplots(figsize=(8, 4))
    ax.fill_between(x, mean - std, mean + std, alpha=0.3, label="ensemble +/- 1 std")
    ax.plot(x, mean, label="ensemble mean")
    if standalone is not None:
        ax.plot(x, standalone, linestyle="--", label="standalone")
    step = max(1, len(stamps) // 12)
    ax.set_xticks(x[::step])
    ax.set_xticklabels(list(stamps)[::step], rotation=45, fontsize=7)
    ax.set_ylabel(metric_name)
    ax.legend(fontsize=8)
    fig.tight_layout()
    out_path = Path(out_path)
    fig.savefig(out_path, dpi=120)
    plt.close(fig)
    return out_path
