"""Gridded field types, normalization, anomalies, and latitude weighting.

Everything here is immutable after construction and free of hidden state,
so all operations are safe to call from concurrent workers.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .errors import (
    ConfigurationError,
    GridMismatchError,
    StampGapError,
)
from .stamps import MonthStamp, Stamp

VARIABLE_IDS = (
    "t2m",
    "sst",
    "blended_t",
    "tisr",
    "lsm",
    "slt",
    "orography",
    "cvh",
    "cvl",
)

VARIABLE_UNITS = {
    "t2m": "K",
    "sst": "K",
    "blended_t": "K",
    "tisr": "J m**-2",
    "lsm": "1",
    "slt": "1",
    "orography": "m",
    "cvh": "1",
    "cvl": "1",
}


def _as_readonly(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class GridSpec:
    """Regular global latitude/longitude grid.

    Latitudes descend north to south; longitudes ascend in [0, 360) and
    wrap periodically.
    """

    lat: np.ndarray
    lon: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "lat", _as_readonly(self.lat))
        object.__setattr__(self, "lon", _as_readonly(self.lon))
        lat, lon = self.lat, self.lon
        if lat.ndim != 1 or lon.ndim != 1 or lat.size < 1 or lon.size < 2:
            raise ConfigurationError("grid axes must be 1-D and non-empty")
        if np.any(np.abs(lat) > 90.0):
            raise ConfigurationError("latitudes must lie in [-90, 90]")
        if lat.size > 1:
            dlat = np.diff(lat)
            if not np.all(dlat < 0):
                raise ConfigurationError("latitudes must descend north to south")
            if not np.allclose(dlat, dlat[0], atol=1e-9):
                raise ConfigurationError("latitude spacing must be uniform")
        if np.any(lon < 0.0) or np.any(lon >= 360.0):
            raise ConfigurationError("longitudes must lie in [0, 360)")
        dlon = np.diff(lon)
        if not np.all(dlon > 0) or not np.allclose(dlon, dlon[0], atol=1e-9):
            raise ConfigurationError("longitude spacing must be uniform and ascending")
        if not np.isclose(lon[0] + 360.0 - lon[-1], dlon[0], atol=1e-9):
            raise ConfigurationError("longitudes must tile the full circle")

    @property
    def n_lat(self) -> int:
        return self.lat.size

    @property
    def n_lon(self) -> int:
        return self.lon.size

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_lat, self.n_lon)

    @property
    def resolution(self) -> float:
        return float(360.0 / self.n_lon)

    @classmethod
    def cell_centered(cls, n_lat: int, n_lon: int) -> "GridSpec":
        """Global grid with cell-centered latitudes (no pole rows)."""
        dlat = 180.0 / n_lat
        lat = 90.0 - dlat / 2.0 - dlat * np.arange(n_lat)
        lon = (360.0 / n_lon) * np.arange(n_lon)
        return cls(lat=lat, lon=lon)

    @classmethod
    def era5_like(cls, resolution: float = 0.25) -> "GridSpec":
        """Pole-to-pole grid in the reanalysis layout (both poles included)."""
        n_lat = int(round(180.0 / resolution)) + 1
        n_lon = int(round(360.0 / resolution))
        lat = 90.0 - resolution * np.arange(n_lat)
        lon = resolution * np.arange(n_lon)
        return cls(lat=lat, lon=lon)

    def drop_pole_row(self, side: str = "south") -> "GridSpec":
        """Remove one pole row so the row count is even.

        The model grid needs dimensions divisible by powers of two; dropping
        the near-zero-area pole row is the standard mapping. `side` is
        "south" (default) or "north".
        """
        if side == "south":
            return GridSpec(lat=self.lat[:-1], lon=self.lon)
        if side == "north":
            return GridSpec(lat=self.lat[1:], lon=self.lon)
        raise ConfigurationError(f"side must be 'north' or 'south', got {side!r}")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, GridSpec):
            return NotImplemented
        return (
            self.lat.shape == other.lat.shape
            and self.lon.shape == other.lon.shape
            and bool(np.array_equal(self.lat, other.lat))
            and bool(np.array_equal(self.lon, other.lon))
        )


def require_same_grid(a: "MonthlyField", b: "MonthlyField") -> None:
    if a.grid != b.grid:
        raise GridMismatchError(
            f"grid mismatch: {a.grid.shape} vs {b.grid.shape}"
        )


@dataclass(frozen=True)
class MonthlyField:
    """One variable on one grid at one stamp (month, season, or year)."""

    variable: str
    stamp: Stamp | None
    grid: GridSpec
    values: np.ndarray
    missing: np.ndarray | None = None

    def __post_init__(self) -> None:
        if self.variable not in VARIABLE_IDS and self.variable != "category":
            raise ConfigurationError(f"unknown variable id {self.variable!r}")
        values = np.asarray(self.values, dtype=np.float64)
        if values.shape != self.grid.shape:
            raise GridMismatchError(
                f"values shape {values.shape} does not match grid {self.grid.shape}"
            )
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        if self.missing is not None:
            missing = np.asarray(self.missing, dtype=bool)
            if missing.shape != self.grid.shape:
                raise GridMismatchError("missing mask shape does not match grid")
            missing.setflags(write=False)
            object.__setattr__(self, "missing", missing)
            if not np.all(np.isfinite(values[~missing])):
                raise ConfigurationError("non-finite values outside missing mask")
        elif not np.all(np.isfinite(values)):
            raise ConfigurationError("non-finite values in field without mask")
        if self.variable in ("lsm", "cvh", "cvl"):
            valid = values[self.valid_mask]
            if valid.size and (valid.min() < 0.0 or valid.max() > 1.0):
                raise ConfigurationError(f"{self.variable} values must lie in [0, 1]")

    @property
    def valid_mask(self) -> np.ndarray:
        if self.missing is None:
            return np.ones(self.grid.shape, dtype=bool)
        return ~self.missing

    def with_values(self, values: np.ndarray) -> "MonthlyField":
        return replace(self, values=values)


@dataclass(frozen=True)
class ClimatologyTable:
    """Per-calendar-month mean grids, optionally with tercile thresholds."""

    base_period: tuple[int, int]
    grid: GridSpec
    per_month_mean: np.ndarray  # (12, n_lat, n_lon)
    per_month_p33: np.ndarray | None = None
    per_month_p66: np.ndarray | None = None

    def __post_init__(self) -> None:
        mean = np.asarray(self.per_month_mean, dtype=np.float64)
        if mean.shape != (12, *self.grid.shape):
            raise GridMismatchError("per_month_mean must be (12, n_lat, n_lon)")
        mean.setflags(write=False)
        object.__setattr__(self, "per_month_mean", mean)
        for name in ("per_month_p33", "per_month_p66"):
            arr = getattr(self, name)
            if arr is not None:
                arr = np.asarray(arr, dtype=np.float64)
                if arr.shape != mean.shape:
                    raise GridMismatchError(f"{name} must be (12, n_lat, n_lon)")
                arr.setflags(write=False)
                object.__setattr__(self, name, arr)
        if self.per_month_p33 is not None and self.per_month_p66 is not None:
            bad = self.per_month_p33 > self.per_month_p66 + 1e-12
            if np.any(bad):
                raise ConfigurationError("p33 exceeds p66 at some gridpoints")

    def mean_for(self, month: int) -> np.ndarray:
        return self.per_month_mean[month - 1]

    @property
    def has_percentiles(self) -> bool:
        return self.per_month_p33 is not None and self.per_month_p66 is not None


@dataclass(frozen=True)
class NormStats:
    """Min/max scaling statistics for one input channel."""

    channel_id: str
    x_min: float
    x_max: float

    def __post_init__(self) -> None:
        if not (self.x_max > self.x_min):
            raise ConfigurationError(
                f"degenerate normalization stats for {self.channel_id!r}: "
                f"x_max ({self.x_max}) must exceed x_min ({self.x_min})"
            )

    @property
    def x_range(self) -> float:
        return self.x_max - self.x_min


@dataclass(frozen=True)
class LatWeights:
    """Cosine-latitude weights normalized to sum to one."""

    grid: GridSpec
    weights: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        w = np.cos(np.deg2rad(self.grid.lat))
        w = np.clip(w, 0.0, None)
        total = w.sum()
        if total <= 0:
            raise ConfigurationError("latitude weights sum to zero")
        w = w / total
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)


def latitude_weights(grid: GridSpec) -> LatWeights:
    """Normalized cos(latitude) weighting for area-fair averaging."""
    return LatWeights(grid=grid)


def normalize(x, stats: NormStats):
    """Min/max scale a value (or array) into the unit interval.

    Values outside the stats range map outside [0, 1]; no clipping.
    """
    return (x - stats.x_min) / (stats.x_max - stats.x_min)


def denormalize(z, stats: NormStats):
    """Inverse of :func:`normalize`."""
    return z * (stats.x_max - stats.x_min) + stats.x_min


def _percentile_linear(samples: np.ndarray, q: float) -> np.ndarray:
    """Linear-interpolation percentile along axis 0."""
    return np.percentile(samples, q, axis=0, method="linear")


def build_climatology(
    fields: Sequence[MonthlyField],
    base_period: tuple[int, int],
    percentiles: bool = False,
) -> ClimatologyTable:
    """Per-month means (and optional terciles) over a base period.

    Requires a field for every (year, month) of the period, all on one grid.
    """
    start_year, end_year = base_period
    by_stamp: dict[MonthStamp, MonthlyField] = {}
    for f in fields:
        if isinstance(f.stamp, MonthStamp):
            by_stamp[f.stamp] = f
    grid = None
    samples: list[list[np.ndarray]] = [[] for _ in range(12)]
    for year in range(start_year, end_year + 1):
        for month in range(1, 13):
            stamp = MonthStamp(year, month)
            f = by_stamp.get(stamp)
            if f is None:
                raise StampGapError(f"climatology base period missing {stamp}")
            if grid is None:
                grid = f.grid
            elif f.grid != grid:
                raise GridMismatchError(f"mixed grids in climatology input at {stamp}")
            samples[month - 1].append(f.values)
    assert grid is not None
    stacked = [np.stack(s, axis=0) for s in samples]
    mean = np.stack([s.mean(axis=0) for s in stacked], axis=0)
    p33 = p66 = None
    if percentiles:
        p33 = np.stack([_percentile_linear(s, 33.0) for s in stacked], axis=0)
        p66 = np.stack([_percentile_linear(s, 66.0) for s in stacked], axis=0)
    return ClimatologyTable(
        base_period=base_period,
        grid=grid,
        per_month_mean=mean,
        per_month_p33=p33,
        per_month_p66=p66,
    )


def anomalize(f: MonthlyField, clim: ClimatologyTable) -> MonthlyField:
    """Subtract the calendar-month climatological mean."""
    if not isinstance(f.stamp, MonthStamp):
        raise ConfigurationError("anomalize needs a monthly stamp")
    if f.grid != clim.grid:
        raise GridMismatchError("field grid does not match climatology grid")
    return f.with_values(f.values - clim.mean_for(f.stamp.month))


def deanomalize(f: MonthlyField, clim: ClimatologyTable) -> MonthlyField:
    """Add the calendar-month climatological mean back."""
    if not isinstance(f.stamp, MonthStamp):
        raise ConfigurationError("deanomalize needs a monthly stamp")
    if f.grid != clim.grid:
        raise GridMismatchError("field grid does not match climatology grid")
    return f.with_values(f.values + clim.mean_for(f.stamp.month))
