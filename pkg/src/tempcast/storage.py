"""Gridded series I/O: the internal binary format and CF NetCDF reading.

Internal format, one file per variable
--------------------------------------
    magic   b"TCGRID1\\n"
    u64le   header length in bytes
    header  UTF-8 JSON: variable, units, grid axes, stamp kind + stamps,
            axis order, dtype, missing-value convention
    payload little-endian float32, C order, shape (time, lat, lon);
            missing gridpoints stored as NaN

Stamp kinds: "month" ([[year, month], ...]), "season" ([[year, name], ...]),
"year" ([year, ...]), "constant" (single stampless record), "month_cycle"
(twelve records keyed by calendar month, identical across years).
"""

from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DataError, StampGapError, UnknownVariableError
from .grids import VARIABLE_UNITS, GridSpec, MonthlyField
from .stamps import MonthStamp, Season, SeasonStamp, Stamp, YearStamp

MAGIC = b"TCGRID1\n"

GRAVITY = 9.80665  # geopotential -> orography conversion


def _stamp_payload(stamps: Sequence[Stamp | None]) -> tuple[str, list]:
    if all(s is None for s in stamps):
        if len(stamps) != 1:
            raise DataError("constant series must hold exactly one record")
        return "constant", []
    first = stamps[0]
    if isinstance(first, MonthStamp):
        return "month", [[s.year, s.month] for s in stamps]  # type: ignore[union-attr]
    if isinstance(first, SeasonStamp):
        return "season", [[s.year, s.season.name] for s in stamps]  # type: ignore[union-attr]
    if isinstance(first, YearStamp):
        return "year", [s.year for s in stamps]  # type: ignore[union-attr]
    raise DataError(f"unsupported stamp type {type(first).__name__}")


def _stamps_from_payload(kind: str, payload: list, n: int) -> list[Stamp | None]:
    if kind == "constant":
        return [None] * n
    if kind == "month":
        return [MonthStamp(y, m) for y, m in payload]
    if kind == "season":
        return [SeasonStamp(y, Season[name]) for y, name in payload]
    if kind == "year":
        return [YearStamp(y) for y in payload]
    if kind == "month_cycle":
        return [None] * n
    raise DataError(f"unknown stamp kind {kind!r}")


def write_series(
    path: str | Path,
    fields: Sequence[MonthlyField],
    *,
    cycle_months: Sequence[int] | None = None,
) -> None:
    """Write one variable's record series to the internal format.

    For a TISR climatological cycle pass the twelve fields in month order
    together with cycle_months=range(1, 13).
    """
    if not fields:
        raise DataError("cannot write an empty series")
    variable = fields[0].variable
    grid = fields[0].grid
    for f in fields:
        if f.variable != variable or f.grid != grid:
            raise DataError("series must share one variable and grid")
    if cycle_months is not None:
        kind, stamp_payload = "month_cycle", list(cycle_months)
    else:
        kind, stamp_payload = _stamp_payload([f.stamp for f in fields])
    header = {
        "format": "tcgrid",
        "version": 1,
        "variable": variable,
        "units": VARIABLE_UNITS.get(variable, "1"),
        "grid": {"lat": grid.lat.tolist(), "lon": grid.lon.tolist()},
        "stamp_kind": kind,
        "stamps": stamp_payload,
        "order": "time,lat,lon",
        "dtype": "<f4",
        "missing": "nan",
    }
    payload = np.stack(
        [np.where(f.valid_mask, f.values, np.nan) for f in fields], axis=0
    ).astype("<f4")
    blob = json.dumps(header, separators=(",", ":")).encode()
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        fh.write(payload.tobytes(order="C"))
    tmp.replace(path)


def read_series(path: str | Path) -> tuple[list[MonthlyField], dict]:
    """Read an internal-format series; returns (fields, header)."""
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            magic = fh.read(len(MAGIC))
            if magic != MAGIC:
                raise DataError(f"{path}: not an internal gridded file")
            (hlen,) = struct.unpack("<Q", fh.read(8))
            header = json.loads(fh.read(hlen).decode())
            raw = fh.read()
    except OSError as exc:
        raise DataError(f"{path}: {exc}") from exc
    grid = GridSpec(
        lat=np.asarray(header["grid"]["lat"]),
        lon=np.asarray(header["grid"]["lon"]),
    )
    itemsize = np.dtype(header["dtype"]).itemsize
    if len(raw) % itemsize:
        raise DataError(f"{path}: truncated payload")
    values = np.frombuffer(raw, dtype=header["dtype"])
    n_cells = grid.n_lat * grid.n_lon
    if values.size % n_cells:
        raise DataError(f"{path}: truncated payload")
    n_time = values.size // n_cells
    values = values.reshape(n_time, grid.n_lat, grid.n_lon).astype(np.float64)
    stamps = _stamps_from_payload(header["stamp_kind"], header["stamps"], n_time)
    fields = []
    for stamp, frame in zip(stamps, values):
        missing = np.isnan(frame)
        fields.append(
            MonthlyField(
                variable=header["variable"],
                stamp=stamp,
                grid=grid,
                values=np.where(missing, 0.0, frame),
                missing=missing if missing.any() else None,
            )
        )
    return fields, header


def read_monthly_dataset(
    path: str | Path,
    variable_ids: Sequence[str],
    time_range: tuple[MonthStamp, MonthStamp] | None = None,
) -> dict[str, list[MonthlyField]]:
    """Read monthly series for the requested variables from a dataset dir.

    Fields come back sorted by stamp; a gap inside the requested range is
    an error naming the absent stamp.
    """
    path = Path(path)
    out: dict[str, list[MonthlyField]] = {}
    for var in variable_ids:
        f = path / f"{var}.tcg"
        if not f.exists():
            raise UnknownVariableError(f"variable {var!r} not present in {path}")
        fields, header = read_series(f)
        if header["stamp_kind"] != "month":
            raise DataError(f"{var}: expected monthly stamps, got {header['stamp_kind']}")
        fields.sort(key=lambda x: x.stamp.index)  # type: ignore[union-attr]
        if time_range is not None:
            lo, hi = time_range
            fields = [x for x in fields if lo <= x.stamp <= hi]  # type: ignore[operator]
            expected = hi.index - lo.index + 1
        else:
            expected = (
                fields[-1].stamp.index - fields[0].stamp.index + 1 if fields else 0
            )
        have = {x.stamp.index for x in fields}
        if fields and len(have) != expected:
            lo_idx = time_range[0].index if time_range else fields[0].stamp.index
            for i in range(lo_idx, lo_idx + expected):
                if i not in have:
                    raise StampGapError(
                        f"{var}: missing stamp {MonthStamp.from_index(i)}"
                    )
        if not fields:
            raise StampGapError(f"{var}: no records in requested range")
        out[var] = fields
    return out


def read_cycle(path: str | Path) -> dict[int, MonthlyField]:
    """Read a month-cycle series (e.g. TISR) keyed by calendar month."""
    fields, header = read_series(path)
    if header["stamp_kind"] != "month_cycle":
        raise DataError(f"{path}: expected a month_cycle series")
    return dict(zip(header["stamps"], fields))


def read_constant(path: str | Path) -> MonthlyField:
    fields, header = read_series(path)
    if header["stamp_kind"] != "constant" or len(fields) != 1:
        raise DataError(f"{path}: expected a single constant record")
    return fields[0]


# --- CF NetCDF ingestion ---------------------------------------------------

_NC_VARIABLE_MAP = {
    "t2m": "t2m",
    "sst": "sst",
    "lsm": "lsm",
    "slt": "slt",
    "z": "orography",
    "cvh": "cvh",
    "cvl": "cvl",
    "tisr": "tisr",
}

_LAT_NAMES = ("latitude", "lat")
_LON_NAMES = ("longitude", "lon")
_TIME_NAMES = ("time", "valid_time")


def _decode_time(values: np.ndarray, units: str) -> list[MonthStamp]:
    import datetime as dt

    parts = units.split("since")
    if len(parts) != 2:
        raise DataError(f"unsupported time units {units!r}")
    step = parts[0].strip().lower()
    origin_text = parts[1].strip().split()[0]
    pieces = [int(p) for p in origin_text.split("-")]
    year, month = pieces[0], pieces[1] if len(pieces) > 1 else 1
    day = pieces[2] if len(pieces) > 2 else 1
    if step.startswith("month"):
        base = MonthStamp(year, month)
        return [base.shift(int(round(float(v)))) for v in values]
    if step.startswith("hour"):
        delta = dt.timedelta(hours=1)
    elif step.startswith("day"):
        delta = dt.timedelta(days=1)
    elif step.startswith("second"):
        delta = dt.timedelta(seconds=1)
    else:
        raise DataError(f"unsupported time step in units {units!r}")
    origin = dt.datetime(year, month, day)
    out = []
    for v in values:
        when = origin + delta * float(v)
        out.append(MonthStamp(when.year, when.month))
    return out


def _nc_attr(var, name: str, default=None):
    try:
        value = getattr(var, name)
    except AttributeError:
        return default
    if isinstance(value, bytes):
        return value.decode()
    return value


def read_netcdf_dataset(
    path: str | Path,
    variable_ids: Sequence[str],
    time_range: tuple[MonthStamp, MonthStamp] | None = None,
) -> dict[str, list[MonthlyField]]:
    """Read CF-convention monthly means from a classic NetCDF file.

    Handles scale_factor/add_offset packing, fill values, ascending
    latitude axes, and [-180, 180) longitudes. Source variable names follow
    the reanalysis labels (t2m, sst, lsm, slt, z, cvh, cvl, tisr);
    geopotential z is converted to orography.
    """
    from scipy.io import netcdf_file

    path = Path(path)
    if not path.exists():
        raise DataError(f"{path}: no such file")
    wanted = {}
    for var in variable_ids:
        source = next(
            (k for k, v in _NC_VARIABLE_MAP.items() if v == var or k == var), None
        )
        if source is None:
            raise UnknownVariableError(f"no NetCDF mapping for variable {var!r}")
        wanted[source] = _NC_VARIABLE_MAP[source]

    with netcdf_file(str(path), "r", mmap=False) as nc:
        names = set(nc.variables)
        lat_name = next((n for n in _LAT_NAMES if n in names), None)
        lon_name = next((n for n in _LON_NAMES if n in names), None)
        time_name = next((n for n in _TIME_NAMES if n in names), None)
        if lat_name is None or lon_name is None or time_name is None:
            raise DataError(f"{path}: missing coordinate variables")
        lat = np.array(nc.variables[lat_name][:], dtype=np.float64)
        lon = np.array(nc.variables[lon_name][:], dtype=np.float64)
        tvar = nc.variables[time_name]
        stamps = _decode_time(
            np.array(tvar[:]), _nc_attr(tvar, "units", "months since 0000-01")
        )

        flip_lat = lat.size > 1 and lat[0] < lat[-1]
        if flip_lat:
            lat = lat[::-1]
        lon_shift = int(np.argmax(lon >= 0.0)) if np.any(lon < 0.0) else 0
        if lon_shift:
            lon = np.concatenate([lon[lon_shift:], lon[:lon_shift] + 360.0])
        grid = GridSpec(lat=lat, lon=lon)

        out: dict[str, list[MonthlyField]] = {}
        for source, target in wanted.items():
            if source not in nc.variables:
                raise UnknownVariableError(
                    f"variable {source!r} not present in {path}"
                )
            v = nc.variables[source]
            raw = np.array(v[:], dtype=np.float64)
            if raw.ndim != 3:
                raise DataError(f"{source}: expected (time, lat, lon) layout")
            fill = _nc_attr(v, "_FillValue", _nc_attr(v, "missing_value"))
            missing = (
                np.isclose(raw, float(fill)) if fill is not None else np.isnan(raw)
            )
            scale = float(_nc_attr(v, "scale_factor", 1.0))
            offset = float(_nc_attr(v, "add_offset", 0.0))
            data = raw * scale + offset
            if target == "orography":
                data = data / GRAVITY
            if flip_lat:
                data = data[:, ::-1, :]
                missing = missing[:, ::-1, :]
            if lon_shift:
                data = np.roll(data, -lon_shift, axis=2)
                missing = np.roll(missing, -lon_shift, axis=2)
            fields = []
            for i, stamp in enumerate(stamps):
                if time_range is not None and not (
                    time_range[0] <= stamp <= time_range[1]
                ):
                    continue
                m = missing[i]
                fields.append(
                    MonthlyField(
                        variable=target,
                        stamp=stamp,
                        grid=grid,
                        values=np.where(m, 0.0, data[i]),
                        missing=m if m.any() else None,
                    )
                )
            fields.sort(key=lambda x: x.stamp.index)  # type: ignore[union-attr]
            out[target] = fields
    return out
