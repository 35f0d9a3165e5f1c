"""Dataset assembly: blending, constant channels, splits, and input stacks.

The network input for a window of W months has 2W + 5 channels:
W blended-anomaly months (oldest first), W insolation months aligned by
default to the months being forecast, then the five static channels
(lsm, slt, orography, cvh, cvl), all min/max normalized.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import (
    ConfigurationError,
    DataError,
    GridMismatchError,
    StampMismatchError,
)
from .grids import (
    GridSpec,
    MonthlyField,
    NormStats,
    normalize,
    require_same_grid,
)
from .stamps import MonthStamp
from . import storage

SUPPORTED_WINDOWS = (1, 2, 3, 4, 6, 12)
CONSTANT_CHANNELS = ("lsm", "slt", "orography", "cvh", "cvl")
DEFAULT_LSM_THRESHOLD = 0.5


@dataclass(frozen=True)
class SplitSpec:
    """Train/validation/test month ranges; disjoint and ordered."""

    train: tuple[MonthStamp, MonthStamp]
    val: tuple[MonthStamp, MonthStamp]
    test: tuple[MonthStamp, MonthStamp]

    def __post_init__(self) -> None:
        for name, (lo, hi) in self.items():
            if hi < lo:
                raise ConfigurationError(f"{name} split range is empty")
        if not (
            self.train[1] < self.val[0] and self.val[1] < self.test[0]
        ):
            raise ConfigurationError("splits must be disjoint and ordered train < val < test")

    def items(self):
        return (("train", self.train), ("val", self.val), ("test", self.test))

    def name_of(self, stamp: MonthStamp) -> str | None:
        for name, (lo, hi) in self.items():
            if lo <= stamp <= hi:
                return name
        return None

    @classmethod
    def paper_default(cls) -> "SplitSpec":
        return cls(
            train=(MonthStamp(1980, 1), MonthStamp(2016, 12)),
            val=(MonthStamp(2017, 1), MonthStamp(2018, 12)),
            test=(MonthStamp(2019, 1), MonthStamp(2023, 12)),
        )


@dataclass(frozen=True)
class DatasetManifest:
    source: str  # "reanalysis_file" | "synthetic"
    grid: GridSpec
    time_range: tuple[MonthStamp, MonthStamp]
    variables: tuple[str, ...]
    split: SplitSpec

    def to_json(self) -> dict:
        return {
            "source": self.source,
            "grid": {"lat": self.grid.lat.tolist(), "lon": self.grid.lon.tolist()},
            "time_range": [str(self.time_range[0]), str(self.time_range[1])],
            "variables": list(self.variables),
            "split": {
                name: [str(lo), str(hi)] for name, (lo, hi) in self.split.items()
            },
        }

    @classmethod
    def from_json(cls, data: dict) -> "DatasetManifest":
        split = data["split"]
        return cls(
            source=data["source"],
            grid=GridSpec(
                lat=np.asarray(data["grid"]["lat"]),
                lon=np.asarray(data["grid"]["lon"]),
            ),
            time_range=tuple(
                MonthStamp.parse(s) for s in data["time_range"]
            ),  # type: ignore[arg-type]
            variables=tuple(data["variables"]),
            split=SplitSpec(
                **{
                    name: tuple(MonthStamp.parse(s) for s in rng)
                    for name, rng in split.items()
                }
            ),
        )


@dataclass(frozen=True)
class ConstantChannels:
    """The five static surface channels plus the monthly insolation cycle."""

    lsm: MonthlyField
    slt: MonthlyField
    orography: MonthlyField
    cvh: MonthlyField
    cvl: MonthlyField
    tisr_cycle: Mapping[int, MonthlyField]  # keyed by calendar month 1..12

    def __post_init__(self) -> None:
        if sorted(self.tisr_cycle) != list(range(1, 13)):
            raise ConfigurationError("tisr_cycle must cover months 1..12")
        grid = self.lsm.grid
        for name in CONSTANT_CHANNELS:
            if getattr(self, name).grid != grid:
                raise GridMismatchError(f"constant channel {name} on a different grid")
        for f in self.tisr_cycle.values():
            if f.grid != grid:
                raise GridMismatchError("tisr cycle on a different grid")

    @property
    def grid(self) -> GridSpec:
        return self.lsm.grid

    def static_fields(self) -> tuple[MonthlyField, ...]:
        return tuple(getattr(self, name) for name in CONSTANT_CHANNELS)


def blend_sst_t2m(
    t2m: MonthlyField,
    sst: MonthlyField,
    lsm: MonthlyField,
    threshold: float = DEFAULT_LSM_THRESHOLD,
) -> tuple[MonthlyField, int]:
    """Combine land air temperature with ocean surface temperature.

    Gridpoints with land fraction >= threshold take the t2m value, the rest
    take sst. Ocean points where sst is missing fall back to t2m; the count
    of such fallbacks is returned. The blended field has no missing mask.
    """
    require_same_grid(t2m, sst)
    require_same_grid(t2m, lsm)
    if t2m.stamp != sst.stamp:
        raise StampMismatchError(f"stamp mismatch: {t2m.stamp} vs {sst.stamp}")
    land = lsm.values >= threshold
    sst_invalid = ~sst.valid_mask
    fallback = (~land) & sst_invalid
    values = np.where(land | fallback, t2m.values, sst.values)
    blended = MonthlyField(
        variable="blended_t",
        stamp=t2m.stamp,
        grid=t2m.grid,
        values=values,
        missing=None,
    )
    return blended, int(fallback.sum())


def compute_norm_stats(
    channel_id: str, fields: Sequence[MonthlyField]
) -> NormStats:
    """Min/max over a set of fields (training period only, by contract)."""
    lo = min(float(np.min(f.values[f.valid_mask])) for f in fields)
    hi = max(float(np.max(f.values[f.valid_mask])) for f in fields)
    return NormStats(channel_id=channel_id, x_min=lo, x_max=hi)


def training_norm_stats(
    anomalies: Sequence[MonthlyField],
    constants: ConstantChannels,
    train_range: tuple[MonthStamp, MonthStamp],
) -> dict[str, NormStats]:
    """Per-channel stats from the training period only.

    Anomaly fields outside train_range are ignored, so validation and test
    values may map outside [0, 1]. TISR uses one statistic across the whole
    cycle; each static channel gets its own.
    """
    lo, hi = train_range
    train_fields = [
        f for f in anomalies if isinstance(f.stamp, MonthStamp) and lo <= f.stamp <= hi
    ]
    if not train_fields:
        raise DataError("no anomaly fields inside the training range")
    stats = {"blended_t": compute_norm_stats("blended_t", train_fields)}
    stats["tisr"] = compute_norm_stats("tisr", list(constants.tisr_cycle.values()))
    for name in CONSTANT_CHANNELS:
        f = getattr(constants, name)
        vals = f.values[f.valid_mask]
        lo_v, hi_v = float(vals.min()), float(vals.max())
        if hi_v <= lo_v:
            # Flat static channel (e.g. all-zero vegetation); widen so the
            # normalized channel is a constant instead of a rejection.
            hi_v = lo_v + 1.0
        stats[name] = NormStats(channel_id=name, x_min=lo_v, x_max=hi_v)
    return stats


@dataclass(frozen=True)
class InputStack:
    """Multi-channel normalized network input on the model grid."""

    window: int
    grid: GridSpec
    channels: np.ndarray  # (2W + 5, n_lat, n_lon) float32
    channel_names: tuple[str, ...]
    target_months: tuple[MonthStamp, ...] = field(default=())

    def __post_init__(self) -> None:
        if self.channels.shape != (2 * self.window + 5, *self.grid.shape):
            raise ConfigurationError(
                f"expected {2 * self.window + 5} channels on {self.grid.shape}, "
                f"got {self.channels.shape}"
            )


def assemble_input_stack(
    anomalies: Sequence[MonthlyField],
    tisr: Sequence[MonthlyField],
    constants: ConstantChannels,
    stats: Mapping[str, NormStats],
    *,
    window: int,
    target_months: Sequence[MonthStamp] = (),
) -> InputStack:
    """Stack W anomaly months, W insolation months, and the five constants.

    Channel order is fixed: anomalies oldest to newest, insolation in
    target-month order, then lsm, slt, orography, cvh, cvl.
    """
    if window not in SUPPORTED_WINDOWS:
        raise ConfigurationError(
            f"window {window} unsupported; choose from {SUPPORTED_WINDOWS}"
        )
    if len(anomalies) != window or len(tisr) != window:
        raise ConfigurationError(
            f"need {window} anomaly and {window} insolation fields, "
            f"got {len(anomalies)} and {len(tisr)}"
        )
    grid = constants.grid
    for f in (*anomalies, *tisr):
        if f.grid != grid:
            raise GridMismatchError("input channel on wrong grid")
    layers = []
    names = []
    for i, f in enumerate(anomalies):
        layers.append(normalize(f.values, stats["blended_t"]))
        names.append(f"anomaly[t-{window - 1 - i}]" if i < window - 1 else "anomaly[t]")
    for i, f in enumerate(tisr):
        layers.append(normalize(f.values, stats["tisr"]))
        names.append(f"tisr[t+{i + 1}]")
    for name in CONSTANT_CHANNELS:
        layers.append(normalize(getattr(constants, name).values, stats[name]))
        names.append(name)
    return InputStack(
        window=window,
        grid=grid,
        channels=np.stack(layers).astype(np.float32),
        channel_names=tuple(names),
        target_months=tuple(target_months),
    )


def tisr_for_months(
    constants: ConstantChannels, months: Sequence[MonthStamp]
) -> list[MonthlyField]:
    """Insolation fields for specific months, drawn from the fixed cycle."""
    return [constants.tisr_cycle[m.month] for m in months]


# --- dataset directory I/O ---------------------------------------------------


def write_dataset(
    path: str | Path,
    manifest: DatasetManifest,
    monthly: Mapping[str, Sequence[MonthlyField]],
    constants: ConstantChannels | None = None,
) -> None:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    (path / "manifest.json").write_text(json.dumps(manifest.to_json(), indent=2))
    for var, fields in monthly.items():
        storage.write_series(path / f"{var}.tcg", fields)
    if constants is not None:
        for name in CONSTANT_CHANNELS:
            storage.write_series(path / f"{name}.tcg", [getattr(constants, name)])
        cycle = [constants.tisr_cycle[m] for m in range(1, 13)]
        storage.write_series(path / "tisr.tcg", cycle, cycle_months=range(1, 13))


def read_manifest(path: str | Path) -> DatasetManifest:
    f = Path(path) / "manifest.json"
    if not f.exists():
        raise DataError(f"{path}: missing manifest.json")
    return DatasetManifest.from_json(json.loads(f.read_text()))


def read_constants(path: str | Path) -> ConstantChannels:
    path = Path(path)
    statics = {
        name: storage.read_constant(path / f"{name}.tcg")
        for name in CONSTANT_CHANNELS
    }
    return ConstantChannels(tisr_cycle=storage.read_cycle(path / "tisr.tcg"), **statics)
