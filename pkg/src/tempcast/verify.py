"""Forecast verification: latitude-weighted RMSE, anomaly correlation,
tercile categorization, and the Heidke skill score, over named regions.

Regional metrics renormalize the cosine-latitude weights over the rows the
region touches, so restricting to an all-true global mask reproduces the
unrestricted value exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from .errors import ConfigurationError, DataError, GridMismatchError
from .grids import ClimatologyTable, GridSpec, MonthlyField
from .stamps import MonthStamp, Stamp

CATEGORY_BELOW = 0
CATEGORY_NEAR = 1
CATEGORY_ABOVE = 2
CATEGORY_INVALID = -1

STANDARD_REGION_DEFS = {
    "global": "all gridpoints",
    "global_land": "land fraction >= threshold",
    "global_ocean": "land fraction < threshold",
    "us": "24-50N, 235-294E, land only",
    "australia": "10-45S, 112-155E, land only",
    "boreal_forests": "50-70N, land only",
}


@dataclass(frozen=True)
class RegionMask:
    name: str
    grid: GridSpec
    mask: np.ndarray
    definition: str = ""

    def __post_init__(self) -> None:
        mask = np.asarray(self.mask, dtype=bool)
        if mask.shape != self.grid.shape:
            raise GridMismatchError("region mask shape does not match grid")
        if not mask.any():
            raise ConfigurationError(f"region {self.name!r} selects no gridpoints")
        mask.setflags(write=False)
        object.__setattr__(self, "mask", mask)


def region_global(grid: GridSpec) -> RegionMask:
    return RegionMask(
        name="global",
        grid=grid,
        mask=np.ones(grid.shape, dtype=bool),
        definition=STANDARD_REGION_DEFS["global"],
    )


def _box_mask(grid: GridSpec, lat_range, lon_range) -> np.ndarray:
    lat_lo, lat_hi = min(lat_range), max(lat_range)
    lon_lo, lon_hi = lon_range
    in_lat = (grid.lat >= lat_lo) & (grid.lat <= lat_hi)
    if lon_lo <= lon_hi:
        in_lon = (grid.lon >= lon_lo) & (grid.lon <= lon_hi)
    else:  # box crossing the date line
        in_lon = (grid.lon >= lon_lo) | (grid.lon <= lon_hi)
    return in_lat[:, None] & in_lon[None, :]


def standard_regions(
    grid: GridSpec,
    lsm: MonthlyField | None = None,
    threshold: float = 0.5,
    names: Sequence[str] | None = None,
) -> dict[str, RegionMask]:
    """The six regions reported by the scoring tables.

    Land-based regions need the land-sea mask; they are skipped when it is
    absent unless explicitly requested.
    """
    wanted = list(names) if names is not None else list(STANDARD_REGION_DEFS)
    out: dict[str, RegionMask] = {}
    land = None
    if lsm is not None:
        if lsm.grid != grid:
            raise GridMismatchError("land-sea mask grid does not match")
        land = lsm.values >= threshold
    for name in wanted:
        if name == "global":
            out[name] = region_global(grid)
            continue
        if land is None:
            if names is not None:
                raise ConfigurationError(f"region {name!r} needs a land-sea mask")
            continue
        if name == "global_land":
            mask = land
        elif name == "global_ocean":
            mask = ~land
        elif name == "us":
            mask = _box_mask(grid, (24.0, 50.0), (235.0, 294.0)) & land
        elif name == "australia":
            mask = _box_mask(grid, (-45.0, -10.0), (112.0, 155.0)) & land
        elif name == "boreal_forests":
            mask = _box_mask(grid, (50.0, 70.0), (0.0, 360.0)) & land
        else:
            raise ConfigurationError(f"unknown region {name!r}")
        if mask.any():
            out[name] = RegionMask(
                name=name,
                grid=grid,
                mask=mask,
                definition=STANDARD_REGION_DEFS[name],
            )
    return out


def _region_weights(grid: GridSpec, mask: np.ndarray) -> np.ndarray:
    """Per-cell cos-latitude weights renormalized over the region's rows."""
    cos = np.clip(np.cos(np.deg2rad(grid.lat)), 0.0, None)
    rows = mask.any(axis=1)
    total = cos[rows].sum()
    if total <= 0:
        raise ConfigurationError("region has zero total latitude weight")
    w = np.where(rows, cos / total, 0.0)
    return np.broadcast_to(w[:, None], mask.shape)


def rmse(
    forecast: MonthlyField, truth: MonthlyField, region: RegionMask
) -> float:
    """Latitude-weighted root-mean-square error over a region (kelvin)."""
    if forecast.grid != truth.grid or forecast.grid != region.grid:
        raise GridMismatchError("rmse inputs on different grids")
    w = _region_weights(region.grid, region.mask)
    err2 = (forecast.values - truth.values) ** 2
    n_cells = int(region.mask.sum())
    return float(np.sqrt((w * err2)[region.mask].sum() / n_cells))


def acc(
    forecast_anom: MonthlyField, truth_anom: MonthlyField, region: RegionMask
) -> float:
    """Latitude-weighted anomaly correlation coefficient in [-1, 1].

    An identically zero anomaly field (the climatology forecast) gives 0 by
    convention; the formula is 0/0 there.
    """
    if forecast_anom.grid != truth_anom.grid or forecast_anom.grid != region.grid:
        raise GridMismatchError("acc inputs on different grids")
    w = _region_weights(region.grid, region.mask)[region.mask]
    f = forecast_anom.values[region.mask]
    t = truth_anom.values[region.mask]
    num = float((w * f * t).sum())
    den = float(np.sqrt((w * f * f).sum() * (w * t * t).sum()))
    if den == 0.0:
        return 0.0
    return num / den


def categorize(
    values: MonthlyField, month: int, clim: ClimatologyTable
) -> MonthlyField:
    """Classify absolute values against the tercile climatology.

    Strictly below the 33rd percentile is "below", strictly above the 66th
    is "above"; ties at either threshold count as "near". Missing inputs
    are invalid.
    """
    if not clim.has_percentiles:
        raise DataError("climatology table lacks percentile grids")
    if values.grid != clim.grid:
        raise GridMismatchError("value grid does not match climatology grid")
    p33 = clim.per_month_p33[month - 1]
    p66 = clim.per_month_p66[month - 1]
    cat = np.full(values.grid.shape, CATEGORY_NEAR, dtype=np.int64)
    cat[values.values < p33] = CATEGORY_BELOW
    cat[values.values > p66] = CATEGORY_ABOVE
    cat[~values.valid_mask] = CATEGORY_INVALID
    return MonthlyField(
        variable="category",
        stamp=values.stamp,
        grid=values.grid,
        values=cat.astype(np.float64),
        missing=None if values.missing is None else values.missing,
    )


@dataclass(frozen=True)
class ContingencyTable:
    """Categorical bookkeeping over valid forecast/observation pairs.

    hits: matching above/below categories. correct_negatives: matching
    "near". misses: observed extreme forecast as anything else.
    false_alarms: forecast extreme when "near" was observed. The expected
    number correct by chance is exactly one third of the total.
    """

    hits: int
    misses: int
    false_alarms: int
    correct_negatives: int

    @property
    def total(self) -> int:
        return self.hits + self.misses + self.false_alarms + self.correct_negatives

    @property
    def expected_correct(self) -> Fraction:
        return Fraction(self.total, 3)

    @property
    def correct(self) -> int:
        return self.hits + self.correct_negatives


def contingency(
    forecast_cat: MonthlyField,
    observed_cat: MonthlyField,
    region: RegionMask,
) -> ContingencyTable:
    f = forecast_cat.values.astype(np.int64)
    o = observed_cat.values.astype(np.int64)
    valid = (f != CATEGORY_INVALID) & (o != CATEGORY_INVALID) & region.mask
    f, o = f[valid], o[valid]
    match = f == o
    o_extreme = o != CATEGORY_NEAR
    f_extreme = f != CATEGORY_NEAR
    hits = int((match & o_extreme).sum())
    correct_neg = int((match & ~o_extreme).sum())
    misses = int((~match & o_extreme).sum())
    false_alarms = int((~match & ~o_extreme & f_extreme).sum())
    return ContingencyTable(
        hits=hits,
        misses=misses,
        false_alarms=false_alarms,
        correct_negatives=correct_neg,
    )


def hss(table: ContingencyTable) -> float:
    """Heidke skill score in percent: 100 (H - E) / (T - E), E = T/3.

    Exact at the extremes: every pair correct gives 100, none correct gives
    -50, and hitting exactly the chance rate gives 0.
    """
    if table.total == 0:
        raise DataError("no valid forecast/observation pairs")
    value = 100 * Fraction(3 * table.correct - table.total, 2 * table.total)
    return float(value)


def hss_from_grids(
    forecast_cat: MonthlyField,
    observed_cat: MonthlyField,
    region: RegionMask,
) -> float:
    return hss(contingency(forecast_cat, observed_cat, region))


# --- scoring runs -------------------------------------------------------------


@dataclass(frozen=True)
class ScoreRow:
    region: str
    stamp: str
    rmse: float
    acc: float
    hss: float | None = None


@dataclass
class ScoreReport:
    rows: list[ScoreRow]
    aggregates: list[ScoreRow]
    metadata: dict = field(default_factory=dict)

    def to_delimited(self, sep: str = "\t") -> str:
        header = sep.join(["region", "stamp", "rmse", "acc", "hss"])
        lines = [header]
        for row in (*self.rows, *self.aggregates):
            hss_txt = "" if row.hss is None else f"{row.hss:.6g}"
            lines.append(
                sep.join(
                    [row.region, row.stamp, f"{row.rmse:.6g}", f"{row.acc:.6g}", hss_txt]
                )
            )
        return "\n".join(lines) + "\n"

    def to_json(self) -> dict:
        return {
            "metadata": self.metadata,
            "rows": [row.__dict__ for row in self.rows],
            "aggregates": [row.__dict__ for row in self.aggregates],
        }


def score_run(
    forecasts: Mapping[Stamp, MonthlyField],
    truths: Mapping[Stamp, MonthlyField],
    regions: Mapping[str, RegionMask],
    *,
    category_clim: ClimatologyTable | None = None,
    anomaly_clim: ClimatologyTable | None = None,
    metadata: dict | None = None,
) -> ScoreReport:
    """Score anomaly forecasts against truth anomalies per region and stamp.

    The Heidke score needs absolute values, recovered by adding the anomaly
    climatology's monthly mean, then categorized against the percentile
    climatology; it is reported only when both tables are supplied and the
    stamps are monthly.
    """
    stamps = sorted(forecasts, key=lambda s: s.index)
    missing = [s for s in stamps if s not in truths]
    if missing:
        raise DataError(f"truth missing stamps: {missing[:4]}")
    rows: list[ScoreRow] = []
    per_region: dict[str, list[ScoreRow]] = {name: [] for name in regions}
    for stamp in stamps:
        f, t = forecasts[stamp], truths[stamp]
        do_hss = (
            category_clim is not None
            and anomaly_clim is not None
            and isinstance(stamp, MonthStamp)
        )
        if do_hss:
            month = stamp.month  # type: ignore[union-attr]
            f_abs = f.with_values(f.values + anomaly_clim.mean_for(month))
            t_abs = t.with_values(t.values + anomaly_clim.mean_for(month))
            f_cat = categorize(f_abs, month, category_clim)
            t_cat = categorize(t_abs, month, category_clim)
        for name, region in regions.items():
            row = ScoreRow(
                region=name,
                stamp=str(stamp),
                rmse=rmse(f, t, region),
                acc=acc(f, t, region),
                hss=hss_from_grids(f_cat, t_cat, region) if do_hss else None,
            )
            rows.append(row)
            per_region[name].append(row)
    aggregates = []
    for name, region_rows in per_region.items():
        if not region_rows:
            continue
        hss_values = [r.hss for r in region_rows if r.hss is not None]
        aggregates.append(
            ScoreRow(
                region=name,
                stamp="aggregate",
                rmse=float(np.mean([r.rmse for r in region_rows])),
                acc=float(np.mean([r.acc for r in region_rows])),
                hss=float(np.mean(hss_values)) if hss_values else None,
            )
        )
    meta = {
        "stamps": [str(s) for s in stamps],
        "regions": {name: r.definition for name, r in regions.items()},
    }
    if metadata:
        meta.update(metadata)
    return ScoreReport(rows=rows, aggregates=aggregates, metadata=meta)
