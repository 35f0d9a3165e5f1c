"""Reference forecasts: persistence, climatology, and per-gridpoint
multiple linear regression on a coarse grid.

All baselines produce anomaly fields in the same shape as the network
forecasts so the verification code is source-agnostic.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import ConfigurationError, DataError, StampGapError
from .forecast import bilinear_regrid
from .grids import ClimatologyTable, GridSpec, MonthlyField
from .stamps import MonthStamp, SeasonStamp, Stamp, YearStamp

PERSIST_PRIOR_STEP = "persist_prior_step"
PERSIST_PRIOR_YEAR = "persist_prior_year_same_step"
CLIMATOLOGY = "climatology"
MLR = "multiple_linear_regression"

BASELINE_KINDS = (PERSIST_PRIOR_STEP, PERSIST_PRIOR_YEAR, CLIMATOLOGY, MLR)


def _prior_stamp(kind: str, target: Stamp) -> Stamp:
    if kind == PERSIST_PRIOR_STEP:
        return target.shift(-1)
    if kind == PERSIST_PRIOR_YEAR:
        if isinstance(target, MonthStamp):
            return target.shift(-12)
        if isinstance(target, SeasonStamp):
            return target.shift(-4)
        if isinstance(target, YearStamp):
            return target.shift(-1)
    raise ConfigurationError(f"unknown persistence kind {kind!r}")


def persistence_forecast(
    kind: str,
    history: Mapping[Stamp, MonthlyField],
    target: Stamp,
) -> MonthlyField:
    """Copy the prior step (or the prior year's same step) verbatim."""
    prior = _prior_stamp(kind, target)
    f = history.get(prior)
    if f is None:
        raise StampGapError(f"persistence needs {prior}, absent from history")
    return MonthlyField(
        variable=f.variable,
        stamp=target,
        grid=f.grid,
        values=f.values,
        missing=f.missing,
    )


def climatology_forecast(clim: ClimatologyTable, target: Stamp) -> MonthlyField:
    """The climatological-mean forecast: an identically zero anomaly."""
    return MonthlyField(
        variable="blended_t",
        stamp=target,
        grid=clim.grid,
        values=np.zeros(clim.grid.shape),
    )


# --- multiple linear regression ----------------------------------------------


def coarse_grid_factor(grid: GridSpec, target_resolution: float = 2.0) -> int:
    """Block size mapping the data grid to roughly the target resolution."""
    return max(1, int(round(target_resolution / grid.resolution)))


def block_mean(values: np.ndarray, factor: int) -> np.ndarray:
    h, w = values.shape
    if h % factor or w % factor:
        raise ConfigurationError(
            f"grid {h}x{w} not divisible by coarsening factor {factor}"
        )
    return values.reshape(h // factor, factor, w // factor, factor).mean(axis=(1, 3))


def coarsen_grid(grid: GridSpec, factor: int) -> GridSpec:
    lat = grid.lat.reshape(-1, factor).mean(axis=1)
    lon = grid.lon.reshape(-1, factor).mean(axis=1)
    return GridSpec(lat=lat, lon=lon)


def _design_row(prior: np.ndarray, month: int) -> np.ndarray:
    angle = 2.0 * np.pi * month / 12.0
    return np.stack(
        [
            np.ones_like(prior),
            prior,
            np.full_like(prior, np.sin(angle)),
            np.full_like(prior, np.cos(angle)),
        ],
        axis=-1,
    )


@dataclass
class MlrModel:
    """Per-gridpoint least-squares model on the coarse grid.

    Predictors: intercept, the prior step's anomaly at the same gridpoint,
    and the sine/cosine of the calendar-month angle. Gridpoints whose
    design matrix is rank-deficient fall back to the climatology forecast
    (zero anomaly) and are counted.
    """

    coarse_grid: GridSpec
    data_grid: GridSpec
    factor: int
    coefficients: np.ndarray  # (n_lat_c, n_lon_c, 4)
    fallback_mask: np.ndarray  # rank-deficient gridpoints

    @property
    def fallback_count(self) -> int:
        return int(self.fallback_mask.sum())


def mlr_fit(
    anomalies: Sequence[MonthlyField],
    target_resolution: float = 2.0,
) -> MlrModel:
    """Fit the regression on consecutive (prior, target) anomaly pairs."""
    ordered = sorted(
        (f for f in anomalies if isinstance(f.stamp, MonthStamp)),
        key=lambda f: f.stamp.index,  # type: ignore[union-attr]
    )
    if len(ordered) < 6:
        raise DataError("MLR needs at least six months of training anomalies")
    grid = ordered[0].grid
    factor = coarse_grid_factor(grid, target_resolution)
    coarse = coarsen_grid(grid, factor)
    frames = np.stack([block_mean(f.values, factor) for f in ordered], axis=0)
    index = {f.stamp.index: i for i, f in enumerate(ordered)}  # type: ignore[union-attr]

    rows_x, rows_y = [], []
    for f in ordered[1:]:
        t = f.stamp.index  # type: ignore[union-attr]
        if t - 1 not in index:
            continue
        prior = frames[index[t - 1]]
        rows_x.append(_design_row(prior, f.stamp.month))  # type: ignore[union-attr]
        rows_y.append(frames[index[t]])
    if not rows_x:
        raise DataError("MLR found no consecutive month pairs to fit")
    X = np.stack(rows_x, axis=0)  # (pairs, lat, lon, 4)
    Y = np.stack(rows_y, axis=0)  # (pairs, lat, lon)

    n_lat, n_lon = coarse.shape
    coef = np.zeros((n_lat, n_lon, 4))
    fallback = np.zeros((n_lat, n_lon), dtype=bool)
    for j in range(n_lat):
        for k in range(n_lon):
            A = X[:, j, k, :]
            b = Y[:, j, k]
            if np.linalg.matrix_rank(A) < A.shape[1]:
                fallback[j, k] = True
                continue
            coef[j, k], *_ = np.linalg.lstsq(A, b, rcond=None)
    return MlrModel(
        coarse_grid=coarse,
        data_grid=grid,
        factor=factor,
        coefficients=coef,
        fallback_mask=fallback,
    )


def mlr_forecast(
    model: MlrModel, prior: MonthlyField, target: MonthStamp
) -> MonthlyField:
    """Predict the target month's anomaly and regrid back for scoring."""
    if prior.grid != model.data_grid:
        raise ConfigurationError("prior anomaly field on an unexpected grid")
    prior_c = block_mean(prior.values, model.factor)
    design = _design_row(prior_c, target.month)  # (lat, lon, 4)
    pred = np.einsum("jkp,jkp->jk", design, model.coefficients)
    pred = np.where(model.fallback_mask, 0.0, pred)
    coarse_field = MonthlyField(
        variable="blended_t", stamp=target, grid=model.coarse_grid, values=pred
    )
    if model.factor == 1:
        return coarse_field
    return bilinear_regrid(coarse_field, model.data_grid)
