"""Calendar stamps for monthly, seasonal, and annual mean fields.

Seasons are the standard meteorological quarters DJF/MAM/JJA/SON. A winter
season is labeled by the year of its January/February, so DJF(1981) spans
December 1980 through February 1981.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Union

from .errors import ConfigurationError


class Season(Enum):
    DJF = 0
    MAM = 1
    JJA = 2
    SON = 3

    @property
    def months(self) -> tuple[int, int, int]:
        return {
            Season.DJF: (12, 1, 2),
            Season.MAM: (3, 4, 5),
            Season.JJA: (6, 7, 8),
            Season.SON: (9, 10, 11),
        }[self]


@dataclass(frozen=True, order=True)
class MonthStamp:
    year: int
    month: int

    def __post_init__(self) -> None:
        if not 1 <= self.month <= 12:
            raise ConfigurationError(f"month must be 1..12, got {self.month}")

    @property
    def index(self) -> int:
        """Months since year 0, for arithmetic and ordering."""
        return self.year * 12 + (self.month - 1)

    @classmethod
    def from_index(cls, idx: int) -> "MonthStamp":
        return cls(idx // 12, idx % 12 + 1)

    def shift(self, months: int) -> "MonthStamp":
        return MonthStamp.from_index(self.index + months)

    def __str__(self) -> str:
        return f"{self.year:04d}-{self.month:02d}"

    @classmethod
    def parse(cls, text: str) -> "MonthStamp":
        year, _, month = text.partition("-")
        return cls(int(year), int(month))


@dataclass(frozen=True, order=True)
class SeasonStamp:
    year: int
    season: Season

    @property
    def index(self) -> int:
        """Seasons since year 0 in chronological order (DJF first)."""
        return self.year * 4 + self.season.value

    @classmethod
    def from_index(cls, idx: int) -> "SeasonStamp":
        return cls(idx // 4, Season(idx % 4))

    def shift(self, seasons: int) -> "SeasonStamp":
        return SeasonStamp.from_index(self.index + seasons)

    @property
    def months(self) -> tuple[MonthStamp, MonthStamp, MonthStamp]:
        if self.season is Season.DJF:
            return (
                MonthStamp(self.year - 1, 12),
                MonthStamp(self.year, 1),
                MonthStamp(self.year, 2),
            )
        m = self.season.months
        return tuple(MonthStamp(self.year, mm) for mm in m)  # type: ignore[return-value]

    def __str__(self) -> str:
        return f"{self.year:04d}-{self.season.name}"


@dataclass(frozen=True, order=True)
class YearStamp:
    year: int

    @property
    def index(self) -> int:
        return self.year

    @classmethod
    def from_index(cls, idx: int) -> "YearStamp":
        return cls(idx)

    def shift(self, years: int) -> "YearStamp":
        return YearStamp(self.year + years)

    @property
    def months(self) -> tuple[MonthStamp, ...]:
        return tuple(MonthStamp(self.year, m) for m in range(1, 13))

    def __str__(self) -> str:
        return f"{self.year:04d}"


Stamp = Union[MonthStamp, SeasonStamp, YearStamp]


def month_range(start: MonthStamp, end: MonthStamp) -> list[MonthStamp]:
    """All months from start to end, inclusive."""
    if end < start:
        raise ConfigurationError(f"empty month range {start}..{end}")
    return [MonthStamp.from_index(i) for i in range(start.index, end.index + 1)]


def seasons_within(start: MonthStamp, end: MonthStamp) -> list[SeasonStamp]:
    """Seasons whose three months all fall inside [start, end]."""
    out = []
    first = SeasonStamp(start.year, Season.DJF)
    last = SeasonStamp(end.year + 1, Season.SON)
    for idx in range(first.index, last.index + 1):
        s = SeasonStamp.from_index(idx)
        if all(start <= m <= end for m in s.months):
            out.append(s)
    return out


def years_within(start: MonthStamp, end: MonthStamp) -> list[YearStamp]:
    """Calendar years whose twelve months all fall inside [start, end]."""
    out = []
    for year in range(start.year, end.year + 1):
        y = YearStamp(year)
        if start <= y.months[0] and y.months[-1] <= end:
            out.append(y)
    return out


def consecutive_pairs(stamps: Iterable[Stamp]) -> list[tuple[Stamp, Stamp]]:
    """(prior, target) pairs of chronologically adjacent stamps.

    Adjacent means the stamp indices differ by exactly one; gaps in the
    input produce no pair across the gap.
    """
    ordered = sorted(stamps, key=lambda s: s.index)
    return [
        (a, b)
        for a, b in zip(ordered, ordered[1:])
        if b.index == a.index + 1
    ]


def seasonal_pairs(
    start: MonthStamp, end: MonthStamp, *, skip_first_year: bool = False
) -> list[tuple[SeasonStamp, SeasonStamp]]:
    """Trainable (prior season, target season) pairs inside a month range.

    With skip_first_year the range's leading calendar year contributes no
    seasons: it is treated as history only. This is the bookkeeping used
    for a dataset's earliest split, where the first year has no complete
    preceding winter; it yields 142 pairs for 1980-2016, matching the
    published sample counts (6 for 2017-2018 and 18 for 2019-2023 follow
    without the rule).
    """
    seasons = seasons_within(start, end)
    if skip_first_year:
        first_ok = MonthStamp(start.year + 1, 1)
        seasons = [s for s in seasons if all(m >= first_ok for m in s.months)]
    return consecutive_pairs(seasons)  # type: ignore[return-value]
