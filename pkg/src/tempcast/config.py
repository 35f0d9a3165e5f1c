"""Run configuration: key=value files, environment overrides, hashing.

Precedence, highest first: command-line flags, TEMPCAST_* environment
variables, the config file, built-in defaults. Environment names upper-case
the key and turn dots into underscores (lsm_threshold ->
TEMPCAST_LSM_THRESHOLD, split.train -> TEMPCAST_SPLIT_TRAIN).

Schema (all keys optional):
    split.train        month range, e.g. 1980-01:2016-12
    split.val          month range
    split.test         month range
    lsm_threshold      land/sea select threshold in [0, 1]
    anomaly_base       year range for the anomaly climatology, e.g. 1950:1979
    percentile_base    year range for the tercile climatology
    acc_anomaly_base   year range for the correlation metric's climatology
    pole_row           which pole row to drop on odd-row grids: south|north
    tisr_alignment     insolation channels follow target|input months
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigurationError
from .ingest import SplitSpec
from .stamps import MonthStamp

ENV_PREFIX = "TEMPCAST_"

_DEFAULTS = {
    "split.train": "1980-01:2016-12",
    "split.val": "2017-01:2018-12",
    "split.test": "2019-01:2023-12",
    "lsm_threshold": "0.5",
    "anomaly_base": "1950:1979",
    "percentile_base": "1991:2020",
    "acc_anomaly_base": "1950:1979",
    "pole_row": "south",
    "tisr_alignment": "target",
}


def _parse_month_range(text: str) -> tuple[MonthStamp, MonthStamp]:
    lo, _, hi = text.partition(":")
    return MonthStamp.parse(lo.strip()), MonthStamp.parse(hi.strip())


def _parse_year_range(text: str) -> tuple[int, int]:
    lo, _, hi = text.partition(":")
    return int(lo), int(hi)


def parse_config_file(path: str | Path) -> dict[str, str]:
    """Flat key = value lines; # starts a comment."""
    values: dict[str, str] = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"{path}:{lineno}: expected key = value")
        key, _, value = line.partition("=")
        key = key.strip()
        if key not in _DEFAULTS:
            raise ConfigurationError(f"{path}:{lineno}: unknown key {key!r}")
        values[key] = value.strip()
    return values


def _env_overrides() -> dict[str, str]:
    out = {}
    for key in _DEFAULTS:
        env = ENV_PREFIX + key.upper().replace(".", "_")
        if env in os.environ:
            out[key] = os.environ[env]
    return out


@dataclass(frozen=True)
class RunConfig:
    raw: dict = field(default_factory=dict)

    @classmethod
    def load(cls, path: str | Path | None = None, overrides: dict | None = None) -> "RunConfig":
        values = dict(_DEFAULTS)
        if path is not None:
            values.update(parse_config_file(path))
        values.update(_env_overrides())
        if overrides:
            unknown = set(overrides) - set(_DEFAULTS)
            if unknown:
                raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
            values.update({k: str(v) for k, v in overrides.items()})
        return cls(raw=values)

    @property
    def split(self) -> SplitSpec:
        return SplitSpec(
            train=_parse_month_range(self.raw["split.train"]),
            val=_parse_month_range(self.raw["split.val"]),
            test=_parse_month_range(self.raw["split.test"]),
        )

    @property
    def lsm_threshold(self) -> float:
        value = float(self.raw["lsm_threshold"])
        if not 0.0 <= value <= 1.0:
            raise ConfigurationError("lsm_threshold must lie in [0, 1]")
        return value

    @property
    def anomaly_base(self) -> tuple[int, int]:
        return _parse_year_range(self.raw["anomaly_base"])

    @property
    def percentile_base(self) -> tuple[int, int]:
        return _parse_year_range(self.raw["percentile_base"])

    @property
    def acc_anomaly_base(self) -> tuple[int, int]:
        return _parse_year_range(self.raw["acc_anomaly_base"])

    @property
    def pole_row(self) -> str:
        value = self.raw["pole_row"]
        if value not in ("south", "north"):
            raise ConfigurationError("pole_row must be south or north")
        return value

    @property
    def tisr_alignment(self) -> str:
        value = self.raw["tisr_alignment"]
        if value not in ("target", "input"):
            raise ConfigurationError("tisr_alignment must be target or input")
        return value

    @property
    def config_hash(self) -> str:
        canon = json.dumps(self.raw, sort_keys=True)
        return hashlib.sha256(canon.encode()).hexdigest()[:16]
