"""End-to-end wiring: datasets to anomalies, training samples, and
evaluation-ready forecast series.

Seasonal and annual forecasting use separately trained checkpoints on
aggregated inputs; the monthly normalization statistics are reused for
them (aggregated anomalies are convex combinations of monthly ones) and
are recorded in every checkpoint.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .baselines import (
    CLIMATOLOGY,
    MLR,
    PERSIST_PRIOR_STEP,
    PERSIST_PRIOR_YEAR,
    climatology_forecast,
    mlr_fit,
    mlr_forecast,
    persistence_forecast,
)
from .errors import ConfigurationError, DataError
from .forecast import forecast_step, seasonal_annual_mean_inputs
from .grids import (
    ClimatologyTable,
    MonthlyField,
    NormStats,
    anomalize,
    build_climatology,
    normalize,
)
from .ingest import (
    ConstantChannels,
    DatasetManifest,
    SplitSpec,
    assemble_input_stack,
    blend_sst_t2m,
    read_constants,
    read_manifest,
    training_norm_stats,
)
from .net import Checkpoint
from .stamps import (
    MonthStamp,
    Stamp,
    consecutive_pairs,
    month_range,
    seasonal_pairs,
    seasons_within,
    years_within,
)
from .storage import read_monthly_dataset
from .train import SampleSet

MODES = ("monthly", "seasonal", "annual")


def tisr_for_stamp(constants: ConstantChannels, stamp: Stamp) -> MonthlyField:
    """Insolation matched to a stamp: the month's cycle entry, or the mean
    over a season's or year's months."""
    if isinstance(stamp, MonthStamp):
        return constants.tisr_cycle[stamp.month]
    parts = [constants.tisr_cycle[m.month] for m in stamp.months]
    return MonthlyField(
        variable="tisr",
        stamp=None,
        grid=constants.grid,
        values=np.mean([p.values for p in parts], axis=0),
    )


@dataclass
class PreparedData:
    manifest: DatasetManifest
    constants: ConstantChannels
    blended: dict[MonthStamp, MonthlyField]
    anomalies: dict[MonthStamp, MonthlyField]
    anomaly_clim: ClimatologyTable
    percentile_clim: ClimatologyTable | None
    norm_stats: dict[str, NormStats]
    fallback_count: int

    @property
    def split(self) -> SplitSpec:
        return self.manifest.split

    def aggregated_anomalies(self, mode: str) -> dict[Stamp, MonthlyField]:
        if mode == "monthly":
            return dict(self.anomalies)
        fields = seasonal_annual_mean_inputs(list(self.anomalies.values()), mode)
        return {f.stamp: f for f in fields}


def prepare_dataset(
    path: str | Path,
    *,
    anomaly_base: tuple[int, int],
    percentile_base: tuple[int, int] | None = None,
    lsm_threshold: float = 0.5,
) -> PreparedData:
    """Read a dataset directory and derive anomalies, stats, climatologies."""
    manifest = read_manifest(path)
    monthly = read_monthly_dataset(path, ("t2m", "sst"), manifest.time_range)
    constants = read_constants(path)
    blended: dict[MonthStamp, MonthlyField] = {}
    fallbacks = 0
    for t2m, sst in zip(monthly["t2m"], monthly["sst"]):
        f, n = blend_sst_t2m(t2m, sst, constants.lsm, lsm_threshold)
        blended[f.stamp] = f  # type: ignore[index]
        fallbacks += n
    clim = build_climatology(list(blended.values()), anomaly_base, percentiles=False)
    pclim = (
        build_climatology(list(blended.values()), percentile_base, percentiles=True)
        if percentile_base is not None
        else None
    )
    anomalies = {s: anomalize(f, clim) for s, f in blended.items()}
    stats = training_norm_stats(
        list(anomalies.values()), constants, manifest.split.train
    )
    return PreparedData(
        manifest=manifest,
        constants=constants,
        blended=blended,
        anomalies=anomalies,
        anomaly_clim=clim,
        percentile_clim=pclim,
        norm_stats=stats,
        fallback_count=fallbacks,
    )


def split_stamps(
    prepared: PreparedData, mode: str, split_name: str
) -> list[Stamp]:
    """Stamps of the given mode fully inside one split's month range."""
    lo, hi = dict(prepared.split.items())[split_name]
    if mode == "monthly":
        return list(month_range(lo, hi))
    if mode == "seasonal":
        return list(seasons_within(lo, hi))
    if mode == "annual":
        return list(years_within(lo, hi))
    raise ConfigurationError(f"unknown mode {mode!r}")


def trainable_pairs(
    prepared: PreparedData, mode: str, split_name: str
) -> list[tuple[Stamp, Stamp]]:
    """(input, target) stamp pairs fully inside a split.

    For the seasonal mode the dataset's leading year is history only,
    reproducing the published sample bookkeeping (142/6/18 on the
    1980-2023 calendar).
    """
    lo, hi = dict(prepared.split.items())[split_name]
    if mode == "seasonal":
        at_start = lo == prepared.manifest.time_range[0]
        return list(seasonal_pairs(lo, hi, skip_first_year=at_start))  # type: ignore[return-value]
    return consecutive_pairs(split_stamps(prepared, mode, split_name))


def _window_positions(
    stamps: Sequence[Stamp], window: int
) -> list[tuple[list[Stamp], list[Stamp]]]:
    """All (inputs, targets) chunks of length `window` each, stride one."""
    ordered = sorted(stamps, key=lambda s: s.index)
    index = {s.index for s in ordered}
    out = []
    for s in ordered:
        need = [s.index + k for k in range(2 * window)]
        if all(i in index for i in need):
            inputs = [type(s).from_index(i) for i in need[:window]]  # type: ignore[attr-defined]
            targets = [type(s).from_index(i) for i in need[window:]]  # type: ignore[attr-defined]
            out.append((inputs, targets))
    return out


def build_samples(
    prepared: PreparedData,
    mode: str,
    split_name: str,
    window: int = 1,
    *,
    tisr_alignment: str = "target",
) -> SampleSet:
    """Supervised (stack, target) samples for one split.

    Monthly mode with window W pairs W input months with the next W months,
    sliding by one; seasonal/annual modes use the trainable-pair rule with
    a window of one.
    """
    anomalies = prepared.aggregated_anomalies(mode)
    if mode == "monthly":
        stamps = split_stamps(prepared, mode, split_name)
        positions = _window_positions(stamps, window)
    else:
        if window != 1:
            raise ConfigurationError(f"{mode} mode supports window 1 only")
        positions = [([a], [b]) for a, b in trainable_pairs(prepared, mode, split_name)]
    if not positions:
        raise DataError(f"no {mode} samples in split {split_name}")
    xs, ys, labels = [], [], []
    stats = prepared.norm_stats
    for inputs, targets in positions:
        tisr_stamps = targets if tisr_alignment == "target" else inputs
        stack = assemble_input_stack(
            anomalies=[anomalies[s] for s in inputs],
            tisr=[tisr_for_stamp(prepared.constants, s) for s in tisr_stamps],
            constants=prepared.constants,
            stats=stats,
            window=window,
            target_months=tuple(t for t in targets if isinstance(t, MonthStamp)),
        )
        target = np.stack(
            [normalize(anomalies[s].values, stats["blended_t"]) for s in targets]
        ).astype(np.float32)
        xs.append(stack.channels)
        ys.append(target)
        labels.extend(str(s) for s in targets)
    return SampleSet(
        inputs=np.stack(xs),
        targets=np.stack(ys),
        stamp_labels=tuple(labels),
    )


def allowed_target_labels(prepared: PreparedData, mode: str, split_name: str) -> list[str]:
    return [str(s) for s in split_stamps(prepared, mode, split_name)]


# --- evaluation-ready forecast series ----------------------------------------


def model_forecasts(
    prepared: PreparedData,
    checkpoint: Checkpoint,
    mode: str,
    period: tuple[Stamp, Stamp],
    *,
    tisr_alignment: str = "target",
) -> dict[Stamp, MonthlyField]:
    """Forecast anomalies for every stamp in the period.

    The period is tiled by window-sized chunks, each forecast from the
    observed anomalies immediately preceding it, so every stamp is forecast
    exactly once (at leads 1..W within its chunk).
    """
    window = checkpoint.config.window
    anomalies = prepared.aggregated_anomalies(mode)
    lo, hi = period
    out: dict[Stamp, MonthlyField] = {}
    model = checkpoint.build()
    start = lo.index
    while start <= hi.index:
        inputs = []
        for k in range(window, 0, -1):
            stamp = _stamp_from_index(lo, start - k)
            f = anomalies.get(stamp)
            if f is None:
                raise DataError(f"no observed anomaly at {stamp} to forecast from")
            inputs.append(f)
        if mode == "monthly":
            results = forecast_step(
                inputs, prepared.constants, checkpoint, model=model
            )
            for r in results:
                if lo <= r.stamp <= hi:  # type: ignore[operator]
                    out[r.stamp] = r.anomaly
        else:
            results = _aggregate_forecast_step(
                prepared, checkpoint, model, inputs, tisr_alignment
            )
            for stamp, f in results:
                if lo.index <= stamp.index <= hi.index:
                    out[stamp] = f
        start += window
    return out


def _stamp_from_index(like: Stamp, index: int) -> Stamp:
    return type(like).from_index(index)  # type: ignore[attr-defined]


def _aggregate_forecast_step(
    prepared: PreparedData,
    checkpoint: Checkpoint,
    model,
    inputs: list[MonthlyField],
    tisr_alignment: str,
) -> list[tuple[Stamp, MonthlyField]]:
    """One seasonal/annual network call (window is one in these modes)."""
    import torch

    from .grids import denormalize

    stats = checkpoint.norm_stats
    last = inputs[-1].stamp
    target = last.shift(1)  # type: ignore[union-attr]
    tisr_stamp = target if tisr_alignment == "target" else last
    stack = assemble_input_stack(
        anomalies=inputs,
        tisr=[tisr_for_stamp(prepared.constants, tisr_stamp)],
        constants=prepared.constants,
        stats=stats,
        window=1,
    )
    with torch.no_grad():
        mean, _ = model(torch.from_numpy(stack.channels[None]))
    values = denormalize(mean[0, 0].numpy().astype(np.float64), stats["blended_t"])
    field = MonthlyField(
        variable="blended_t",
        stamp=target,
        grid=prepared.constants.grid,
        values=values,
    )
    return [(target, field)]


def baseline_forecasts(
    prepared: PreparedData,
    kind: str,
    mode: str,
    period: tuple[Stamp, Stamp],
) -> dict[Stamp, MonthlyField]:
    """Anomaly forecasts from one baseline over a period."""
    anomalies = prepared.aggregated_anomalies(mode)
    lo, hi = period
    stamps = [
        _stamp_from_index(lo, i) for i in range(lo.index, hi.index + 1)
    ]
    out: dict[Stamp, MonthlyField] = {}
    if kind in (PERSIST_PRIOR_STEP, PERSIST_PRIOR_YEAR):
        for s in stamps:
            out[s] = persistence_forecast(kind, anomalies, s)
        return out
    if kind == CLIMATOLOGY:
        for s in stamps:
            out[s] = climatology_forecast(prepared.anomaly_clim, s)
        return out
    if kind == MLR:
        if mode != "monthly":
            raise ConfigurationError("the regression baseline is monthly only")
        train_lo, train_hi = prepared.split.train
        train_fields = [
            f
            for s, f in prepared.anomalies.items()
            if train_lo <= s <= train_hi
        ]
        fitted = mlr_fit(train_fields)
        for s in stamps:
            prior = anomalies.get(s.shift(-1))
            if prior is None:
                raise DataError(f"regression baseline needs {s.shift(-1)}")
            out[s] = mlr_forecast(fitted, prior, s)  # type: ignore[arg-type]
        return out
    raise ConfigurationError(f"unknown baseline kind {kind!r}")


def truth_series(
    prepared: PreparedData, mode: str, period: tuple[Stamp, Stamp]
) -> dict[Stamp, MonthlyField]:
    anomalies = prepared.aggregated_anomalies(mode)
    lo, hi = period
    out = {}
    for i in range(lo.index, hi.index + 1):
        s = _stamp_from_index(lo, i)
        f = anomalies.get(s)
        if f is None:
            raise DataError(f"truth anomaly missing at {s}")
        out[s] = f
    return out
