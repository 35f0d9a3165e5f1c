"""Forecast production: single steps, autoregressive rollout, aggregation,
bilinear regridding, and ensemble-member inference.

A window-W checkpoint consumes the last W observed or previously forecast
months and emits the next W months in one network call. Rollout feeds its
own forecasts back through a denormalize/renormalize round trip so a single
normalization contract holds throughout; insolation and the static channels
always come from their deterministic sources.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
import torch

from .errors import ConfigurationError, DataError, GridMismatchError
from .grids import (
    ClimatologyTable,
    GridSpec,
    MonthlyField,
    NormStats,
    denormalize,
)
from .ingest import ConstantChannels, assemble_input_stack, tisr_for_months
from .net import Checkpoint, EnsembleNet
from .stamps import MonthStamp, Stamp, seasons_within, years_within


@dataclass(frozen=True)
class ForecastRequest:
    mode: str  # "monthly" | "seasonal" | "annual"
    window: int
    start: Stamp  # first target stamp
    horizon: int  # number of target steps
    checkpoint: Checkpoint
    climatology: ClimatologyTable | None = None
    keep_heads: bool = False

    def __post_init__(self) -> None:
        if self.mode not in ("monthly", "seasonal", "annual"):
            raise ConfigurationError(f"unknown forecast mode {self.mode!r}")
        if self.horizon < 1:
            raise ConfigurationError("horizon must be at least 1")
        expected = 2 * self.window + 5
        if self.checkpoint.config.in_channels != expected:
            raise ConfigurationError(
                f"window {self.window} needs {expected} input channels; checkpoint "
                f"has {self.checkpoint.config.in_channels}"
            )


@dataclass(frozen=True)
class ForecastResult:
    stamp: Stamp
    anomaly: MonthlyField
    absolute: MonthlyField | None = None
    head_anomalies: tuple[np.ndarray, ...] = field(default=())
    provenance: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.absolute is not None:
            if self.absolute.grid != self.anomaly.grid:
                raise GridMismatchError("absolute and anomaly grids differ")


def _forward(model: EnsembleNet, stack: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    with torch.no_grad():
        mean, heads = model(torch.from_numpy(stack[None]))
    return mean[0].numpy(), heads[0].numpy()


def forecast_step(
    window_fields: Sequence[MonthlyField],
    constants: ConstantChannels,
    checkpoint: Checkpoint,
    *,
    model: EnsembleNet | None = None,
    stats: Mapping[str, NormStats] | None = None,
    keep_heads: bool = False,
) -> list[ForecastResult]:
    """One network call: W anomaly months in, the next W months out.

    Inputs are anomaly fields in kelvin; outputs come back denormalized.
    Passing stats that differ from the checkpoint's is an error.
    """
    if stats is not None:
        from .net import stats_hash

        if stats_hash(stats) != checkpoint.stats_hash:
            raise DataError(
                "normalization stats mismatch: checkpoint was trained with "
                f"hash {checkpoint.stats_hash}"
            )
    norm = checkpoint.norm_stats
    window = checkpoint.config.window
    if len(window_fields) != window:
        raise ConfigurationError(
            f"need the last {window} months, got {len(window_fields)}"
        )
    last = window_fields[-1].stamp
    if not isinstance(last, MonthStamp):
        raise ConfigurationError("forecast_step expects monthly stamps")
    targets = [last.shift(k + 1) for k in range(window)]
    stack = assemble_input_stack(
        anomalies=window_fields,
        tisr=tisr_for_months(constants, targets),
        constants=constants,
        stats=norm,
        window=window,
        target_months=targets,
    )
    model = model if model is not None else checkpoint.build()
    mean, heads = _forward(model, stack.channels)
    grid = constants.grid
    results = []
    for k, stamp in enumerate(targets):
        anomaly = denormalize(mean[k].astype(np.float64), norm["blended_t"])
        head_fields = (
            tuple(
                denormalize(heads[h, k].astype(np.float64), norm["blended_t"])
                for h in range(heads.shape[0])
            )
            if keep_heads
            else ()
        )
        results.append(
            ForecastResult(
                stamp=stamp,
                anomaly=MonthlyField(
                    variable="blended_t", stamp=stamp, grid=grid, values=anomaly
                ),
                head_anomalies=head_fields,
                provenance={"stats_hash": checkpoint.stats_hash},
            )
        )
    return results


def attach_absolute(
    result: ForecastResult, clim: ClimatologyTable
) -> ForecastResult:
    """Add the absolute-value field (anomaly + climatological mean)."""
    stamp = result.stamp
    if not isinstance(stamp, MonthStamp):
        raise ConfigurationError("absolute recovery needs a monthly stamp")
    absolute = MonthlyField(
        variable="blended_t",
        stamp=stamp,
        grid=result.anomaly.grid,
        values=result.anomaly.values + clim.mean_for(stamp.month),
    )
    return ForecastResult(
        stamp=stamp,
        anomaly=result.anomaly,
        absolute=absolute,
        head_anomalies=result.head_anomalies,
        provenance=result.provenance,
    )


def rollout(
    request: ForecastRequest,
    observed: Sequence[MonthlyField],
    constants: ConstantChannels,
) -> list[ForecastResult]:
    """Autoregressive moving-window forecast for `horizon` target steps.

    `observed` must supply exactly the W anomaly months preceding the first
    target; later windows reuse earlier forecasts in place of observations.
    """
    window = request.window
    if len(observed) != window:
        raise ConfigurationError(
            f"rollout needs exactly the prior {window} months, got {len(observed)}"
        )
    model = request.checkpoint.build()
    buffer: list[MonthlyField] = list(observed)
    results: list[ForecastResult] = []
    while len(results) < request.horizon:
        step = forecast_step(
            buffer[-window:],
            constants,
            request.checkpoint,
            model=model,
            keep_heads=request.keep_heads,
        )
        for r in step:
            if request.climatology is not None:
                r = attach_absolute(r, request.climatology)
            results.append(r)
            buffer.append(r.anomaly)
    return results[: request.horizon]


# --- seasonal / annual aggregation -------------------------------------------


def seasonal_annual_mean_inputs(
    fields: Sequence[MonthlyField], mode: str
) -> list[MonthlyField]:
    """Aggregate monthly fields to seasonal or annual means.

    Seasons are DJF/MAM/JJA/SON calendar quarters; a season or year is only
    emitted when every constituent month is present.
    """
    monthly = {
        f.stamp: f for f in fields if isinstance(f.stamp, MonthStamp)
    }
    if not monthly:
        raise DataError("no monthly fields to aggregate")
    lo = min(monthly)
    hi = max(monthly)
    grid = next(iter(monthly.values())).grid
    variable = next(iter(monthly.values())).variable
    if mode == "seasonal":
        stamps: Sequence[Stamp] = seasons_within(lo, hi)
    elif mode == "annual":
        stamps = years_within(lo, hi)
    else:
        raise ConfigurationError(f"mode must be seasonal or annual, got {mode!r}")
    out = []
    for stamp in stamps:
        members = []
        for m in stamp.months:
            f = monthly.get(m)
            if f is None:
                raise DataError(f"{stamp} incomplete: missing {m}")
            members.append(f.values)
        out.append(
            MonthlyField(
                variable=variable,
                stamp=stamp,
                grid=grid,
                values=np.mean(members, axis=0),
            )
        )
    return out


# --- bilinear regridding ------------------------------------------------------


def _axis_weights(src: np.ndarray, dst: np.ndarray, periodic: bool):
    """Indices and weights for 1-D linear interpolation (optionally wrapped)."""
    n = src.size
    if periodic:
        # unwrap destination into the source frame; west of the first
        # column wraps around through the last one
        ext = np.concatenate([src, src[:1] + 360.0])
        dst = np.where(dst < src[0], dst + 360.0, dst)
        idx = np.searchsorted(ext, dst, side="right") - 1
        idx = np.clip(idx, 0, n - 1)
        left = ext[idx]
        span = ext[idx + 1] - left
        frac = (dst - left) / span
        j0 = idx % n
        j1 = (idx + 1) % n
        return j0, j1, frac
    if n == 1:
        zeros = np.zeros(dst.shape, dtype=int)
        return zeros, zeros, np.zeros(dst.shape)
    ascending = src[0] < src[-1]
    s = src if ascending else src[::-1]
    idx = np.searchsorted(s, dst, side="right") - 1
    idx = np.clip(idx, 0, n - 2)
    left = s[idx]
    span = s[idx + 1] - left
    frac = np.clip((dst - left) / span, 0.0, 1.0)
    if not ascending:
        j0 = n - 1 - idx
        j1 = n - 2 - idx
    else:
        j0, j1 = idx, idx + 1
    return j0, j1, frac


def bilinear_regrid(
    f: MonthlyField, target: GridSpec
) -> MonthlyField:
    """Bilinear interpolation onto a target grid; longitude wraps.

    Latitudes beyond the source range clamp to the nearest source row.
    """
    src, dst = f.grid, target
    i0, i1, flat = _axis_weights(src.lat, dst.lat, periodic=False)
    j0, j1, flon = _axis_weights(src.lon, dst.lon, periodic=True)
    v = f.values
    flat = flat[:, None]
    flon = flon[None, :]
    rows0 = v[i0][:, j0] * (1 - flon) + v[i0][:, j1] * flon
    rows1 = v[i1][:, j0] * (1 - flon) + v[i1][:, j1] * flon
    out = rows0 * (1 - flat) + rows1 * flat
    return MonthlyField(variable=f.variable, stamp=f.stamp, grid=target, values=out)


def refine_double(f: MonthlyField) -> MonthlyField:
    """Regrid onto a grid with twice the rows and columns (e.g. 0.5 -> 0.25 deg)."""
    target = GridSpec.cell_centered(2 * f.grid.n_lat, 2 * f.grid.n_lon)
    return bilinear_regrid(f, target)


# --- ensemble-member inference ------------------------------------------------


@dataclass(frozen=True)
class EnsembleSummary:
    stamps: tuple[Stamp, ...]
    member_anomalies: np.ndarray  # (members, time, n_lat, n_lon)
    mean: np.ndarray  # (time, n_lat, n_lon)
    std: np.ndarray  # (time, n_lat, n_lon)

    @property
    def sample_count(self) -> int:
        return self.member_anomalies.shape[0] * self.member_anomalies.shape[1]


def ensemble_inference(
    members: Sequence[Sequence[MonthlyField]],
    constants: ConstantChannels,
    checkpoint: Checkpoint,
) -> tuple[list[list[ForecastResult]], EnsembleSummary]:
    """Apply one trained checkpoint to each member's anomaly series.

    Each member is a monthly anomaly series on the checkpoint grid; every
    consecutive window is forecast one step and the per-month ensemble mean
    and standard deviation are summarized.
    """
    if not members:
        raise ConfigurationError("need at least one ensemble member")
    grid = constants.grid
    window = checkpoint.config.window
    model = checkpoint.build()
    per_member: list[list[ForecastResult]] = []
    stamps: tuple[Stamp, ...] | None = None
    for m, series in enumerate(members):
        ordered = sorted(series, key=lambda f: f.stamp.index)  # type: ignore[union-attr]
        if any(f.grid != grid for f in ordered):
            raise GridMismatchError(f"ensemble member {m} on a different grid")
        results = []
        for k in range(len(ordered) - window + 1):
            chunk = ordered[k : k + window]
            results.extend(
                forecast_step(chunk, constants, checkpoint, model=model)
            )
        member_stamps = tuple(r.stamp for r in results)
        if stamps is None:
            stamps = member_stamps
        elif stamps != member_stamps:
            raise DataError("ensemble members cover different stamps")
        per_member.append(results)
    assert stamps is not None
    cube = np.stack(
        [[r.anomaly.values for r in results] for results in per_member], axis=0
    )
    # moments of per-cell deviations from the first member: shift-invariant,
    # better conditioned, and exactly zero spread for identical members
    deviations = cube - cube[0:1]
    return per_member, EnsembleSummary(
        stamps=stamps,
        member_anomalies=cube,
        mean=cube[0] + deviations.mean(axis=0),
        std=deviations.std(axis=0),
    )
