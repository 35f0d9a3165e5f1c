"""Seeded synthetic climate corpus for desk-scale experiments.

Monthly surface temperature is built from four components:

    value = zonal_base(lat)
          + seasonal_cycle(lat, land, month)        phase flips hemispheres
          + warming_trend * months_elapsed / 120    kelvin per decade
          + AR(1) noise                             spatially smoothed

so with the noise amplitude at zero, anomalies relative to any base-period
climatology reduce exactly to the trend term minus its base-period monthly
mean. Insolation is an analytic top-of-atmosphere daily-mean proxy scaled
to monthly J/m2; it varies with month and latitude only.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grids import GridSpec, MonthlyField
from .ingest import ConstantChannels, DatasetManifest, SplitSpec
from .stamps import MonthStamp

SOLAR_CONSTANT = 1361.0  # W/m2
_MID_MONTH_DOY = (15, 46, 74, 105, 135, 166, 196, 227, 258, 288, 319, 349)


@dataclass(frozen=True)
class SyntheticConfig:
    grid: GridSpec
    years: int
    start_year: int = 1982
    seed: int = 0
    noise_amplitude: float = 0.8  # marginal std of the AR(1) noise, K
    ar_coefficient: float = 0.8
    trend_per_decade: float = 0.4  # K per decade, linear, zero at first month

    @property
    def start(self) -> MonthStamp:
        return MonthStamp(self.start_year, 1)

    @property
    def end(self) -> MonthStamp:
        return MonthStamp(self.start_year + self.years - 1, 12)


def trend_at(config: SyntheticConfig, stamp: MonthStamp) -> float:
    """The exact warming-trend component at a stamp (K)."""
    elapsed = stamp.index - config.start.index
    return config.trend_per_decade * elapsed / 120.0


def _smooth(a: np.ndarray, passes: int = 2) -> np.ndarray:
    """Separable 1-2-1 smoothing; wraps in lon, reflects in lat."""
    for _ in range(passes):
        a = 0.25 * (np.roll(a, 1, axis=-1) + np.roll(a, -1, axis=-1)) + 0.5 * a
        up = np.concatenate([a[:1], a[:-1]], axis=0)
        dn = np.concatenate([a[1:], a[-1:]], axis=0)
        a = 0.25 * (up + dn) + 0.5 * a
    return a


def _unit_smooth_noise(rng: np.random.Generator, shape, passes: int = 2) -> np.ndarray:
    """Smoothed white noise rescaled to unit marginal variance."""
    kern = np.array([0.25, 0.5, 0.25])
    k2 = float((kern**2).sum())  # variance shrink per 1-D pass on iid input
    raw = rng.standard_normal(shape)
    out = _smooth(raw, passes=passes)
    return out / (k2**passes)


def _land_sea_mask(rng: np.random.Generator, grid: GridSpec) -> np.ndarray:
    lat = np.deg2rad(grid.lat)[:, None]
    continents = _smooth(rng.standard_normal(grid.shape), passes=6)
    continents = continents / max(continents.std(), 1e-9)
    bias = 0.35 * np.cos(3.0 * lat) * np.cos(
        np.deg2rad(2.0 * grid.lon)[None, :] + 1.0
    )
    s = continents + bias - 0.15
    lsm = 1.0 / (1.0 + np.exp(-8.0 * s))
    return np.clip(np.where(lsm > 0.92, 1.0, np.where(lsm < 0.08, 0.0, lsm)), 0.0, 1.0)


def _monthly_insolation(grid: GridSpec, month: int) -> np.ndarray:
    """Daily-mean top-of-atmosphere insolation, scaled to monthly J/m2."""
    phi = np.deg2rad(grid.lat)[:, None]
    doy = _MID_MONTH_DOY[month - 1]
    decl = np.deg2rad(-23.44) * np.cos(2.0 * np.pi * (doy + 10) / 365.0)
    cos_h0 = np.clip(-np.tan(phi) * np.tan(decl), -1.0, 1.0)
    h0 = np.arccos(cos_h0)
    daily = (
        (86400.0 * SOLAR_CONSTANT / np.pi)
        * (h0 * np.sin(phi) * np.sin(decl) + np.cos(phi) * np.cos(decl) * np.sin(h0))
    )
    daily = np.clip(daily, 0.0, None)
    monthly = daily * 30.4
    return np.repeat(monthly, grid.n_lon, axis=1)


def _seasonal_cycle(grid: GridSpec, lsm: np.ndarray, month: int) -> np.ndarray:
    lat = np.deg2rad(grid.lat)[:, None]
    amplitude = (1.5 + 16.0 * np.sin(lat) ** 2) * (0.25 + 0.75 * lsm)
    hemisphere = np.tanh(3.0 * lat)  # +1 north, -1 south, smooth at equator
    phase = np.cos(2.0 * np.pi * (month - 7) / 12.0)
    return amplitude * phase * hemisphere


def _zonal_base(grid: GridSpec) -> np.ndarray:
    lat = np.deg2rad(grid.lat)[:, None]
    return np.repeat(300.0 - 42.0 * np.sin(lat) ** 2, grid.n_lon, axis=1)


def _sst_base(grid: GridSpec) -> np.ndarray:
    lat = np.deg2rad(grid.lat)[:, None]
    return np.repeat(271.5 + 28.0 * np.cos(lat) ** 2, grid.n_lon, axis=1)


@dataclass(frozen=True)
class SyntheticCorpus:
    config: SyntheticConfig
    t2m: list[MonthlyField]
    sst: list[MonthlyField]
    constants: ConstantChannels

    def manifest(self, split: SplitSpec) -> DatasetManifest:
        return DatasetManifest(
            source="synthetic",
            grid=self.config.grid,
            time_range=(self.config.start, self.config.end),
            variables=("t2m", "sst"),
            split=split,
        )


def generate_synthetic_corpus(config: SyntheticConfig) -> SyntheticCorpus:
    """Deterministic corpus of monthly t2m/sst fields plus constants."""
    grid = config.grid
    rng = np.random.default_rng(config.seed)

    lsm = _land_sea_mask(rng, grid)
    land = lsm >= 0.5

    orog = np.clip(_smooth(rng.standard_normal(grid.shape), passes=5), 0.0, None)
    orog = 3500.0 * orog / max(orog.max(), 1e-9) * lsm
    slt = np.where(land, np.rint(np.clip(
        3.5 + 2.0 * _smooth(rng.standard_normal(grid.shape), passes=4), 1.0, 7.0
    )), 0.0)
    cvh = np.clip(0.5 + 0.5 * _smooth(rng.standard_normal(grid.shape), passes=4), 0, 1) * lsm
    cvl = np.clip(0.5 + 0.5 * _smooth(rng.standard_normal(grid.shape), passes=4), 0, 1) * lsm

    def const_field(var: str, values: np.ndarray) -> MonthlyField:
        return MonthlyField(variable=var, stamp=None, grid=grid, values=values)

    tisr_cycle = {
        m: const_field("tisr", _monthly_insolation(grid, m)) for m in range(1, 13)
    }
    constants = ConstantChannels(
        lsm=const_field("lsm", lsm),
        slt=const_field("slt", slt),
        orography=const_field("orography", orog),
        cvh=const_field("cvh", cvh),
        cvl=const_field("cvl", cvl),
        tisr_cycle=tisr_cycle,
    )

    base_t2m = _zonal_base(grid)
    base_sst = _sst_base(grid)
    phi, phi_sst = config.ar_coefficient, min(0.95, config.ar_coefficient + 0.1)
    amp = config.noise_amplitude

    noise_t2m = amp * _unit_smooth_noise(rng, grid.shape)
    noise_sst = 0.6 * amp * _unit_smooth_noise(rng, grid.shape)
    sst_missing = land

    t2m_fields: list[MonthlyField] = []
    sst_fields: list[MonthlyField] = []
    n_months = config.years * 12
    for k in range(n_months):
        stamp = config.start.shift(k)
        month = stamp.month
        trend = trend_at(config, stamp)
        if k > 0:
            noise_t2m = phi * noise_t2m + amp * np.sqrt(1 - phi**2) * _unit_smooth_noise(
                rng, grid.shape
            )
            noise_sst = phi_sst * noise_sst + 0.6 * amp * np.sqrt(
                1 - phi_sst**2
            ) * _unit_smooth_noise(rng, grid.shape)
        t2m = base_t2m + _seasonal_cycle(grid, lsm, month) + trend + noise_t2m
        sst = base_sst + 0.3 * _seasonal_cycle(grid, 0.0 * lsm, month) + 0.8 * trend + noise_sst
        t2m_fields.append(
            MonthlyField(variable="t2m", stamp=stamp, grid=grid, values=t2m)
        )
        sst_fields.append(
            MonthlyField(
                variable="sst",
                stamp=stamp,
                grid=grid,
                values=np.where(sst_missing, 0.0, sst),
                missing=sst_missing if sst_missing.any() else None,
            )
        )
    return SyntheticCorpus(
        config=config, t2m=t2m_fields, sst=sst_fields, constants=constants
    )
