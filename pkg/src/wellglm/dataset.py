"""Per-well sensor/production tables: loading, writing and cleaning.

A table has one row per (well, day).  Temperatures are in degrees C and
production rates in m3/day; no unit handling happens here.  Missing or
unparseable measurement cells are stored as NaN and only removed when a
particular response is selected for fitting.
"""

from __future__ import annotations

import csv
import io
import os
from dataclasses import dataclass, replace
from typing import IO, Iterable, Sequence

import numpy as np

from .errors import ConfigError, DuplicateRowError, EmptyDatasetError, ParseError, SchemaError, ShapeError

RESPONSES = ("fluid", "gas")


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class WellSeries:
    """Time-ordered thermocouple temperatures and production for one well.

    ``temps`` is ``n x p``; ``fluid_prod`` and ``gas_prod`` have length
    ``n`` and hold NaN where a value is missing.
    """

    well_id: str
    day: np.ndarray
    temps: np.ndarray
    temp_labels: tuple[str, ...]
    fluid_prod: np.ndarray
    gas_prod: np.ndarray

    def __post_init__(self):
        day = np.asarray(self.day, dtype=np.int64).reshape(-1)
        temps = np.asarray(self.temps, dtype=float)
        n = day.shape[0]
        if temps.ndim == 1 and len(self.temp_labels) == 1:
            temps = temps.reshape(-1, 1)
        if temps.ndim != 2 or temps.shape[0] != n:
            raise ShapeError(f"well {self.well_id}: temps must be {n} x p, got {temps.shape}")
        if temps.shape[1] != len(self.temp_labels):
            raise ShapeError(
                f"well {self.well_id}: {temps.shape[1]} temperature columns but "
                f"{len(self.temp_labels)} labels"
            )
        fluid = np.asarray(self.fluid_prod, dtype=float).reshape(-1)
        gas = np.asarray(self.gas_prod, dtype=float).reshape(-1)
        if fluid.shape[0] != n or gas.shape[0] != n:
            raise ShapeError(f"well {self.well_id}: response arrays must have length {n}")
        if n > 1 and np.any(np.diff(day) <= 0):
            raise ShapeError(f"well {self.well_id}: day must be strictly increasing")
        object.__setattr__(self, "day", _frozen(day))
        object.__setattr__(self, "temps", _frozen(temps))
        object.__setattr__(self, "temp_labels", tuple(str(s) for s in self.temp_labels))
        object.__setattr__(self, "fluid_prod", _frozen(fluid))
        object.__setattr__(self, "gas_prod", _frozen(gas))

    @property
    def n(self) -> int:
        return int(self.day.shape[0])

    @property
    def p(self) -> int:
        return len(self.temp_labels)

    def response(self, name: str) -> np.ndarray:
        if name == "fluid":
            return self.fluid_prod
        if name == "gas":
            return self.gas_prod
        raise ConfigError(f"unknown response {name!r}; expected one of {RESPONSES}")

    def take(self, rows: np.ndarray) -> "WellSeries":
        """Return the sub-series at the given row indices or boolean mask."""
        return replace(
            self,
            day=self.day[rows],
            temps=self.temps[rows],
            fluid_prod=self.fluid_prod[rows],
            gas_prod=self.gas_prod[rows],
        )

    def equals(self, other: "WellSeries") -> bool:
        return (
            self.well_id == other.well_id
            and self.temp_labels == other.temp_labels
            and np.array_equal(self.day, other.day)
            and np.array_equal(self.temps, other.temps, equal_nan=True)
            and np.array_equal(self.fluid_prod, other.fluid_prod, equal_nan=True)
            and np.array_equal(self.gas_prod, other.gas_prod, equal_nan=True)
        )


@dataclass(frozen=True)
class CleaningConfig:
    temp_cap: float = 700.0
    outlier_alpha: float = 0.001
    drop_missing: bool = True

    def __post_init__(self):
        if not self.temp_cap > 0:
            raise ConfigError(f"temp_cap must be > 0, got {self.temp_cap}")
        if not 0.0 < self.outlier_alpha < 1.0:
            raise ConfigError(f"outlier_alpha must lie in (0, 1), got {self.outlier_alpha}")


@dataclass(frozen=True)
class Schema:
    """Column-name mapping for delimited well tables.

    ``temps`` lists thermocouple columns explicitly; when empty, every
    header starting with ``temp_prefix`` is taken in file order.  Set a
    response column to ``None`` when the file does not carry it.
    """

    well: str = "well"
    day: str = "day"
    fluid: str | None = "fluid_prod"
    gas: str | None = "gas_prod"
    temps: tuple[str, ...] = ()
    temp_prefix: str = "THERMOCOUPLE"

    def temp_columns(self, header: Sequence[str]) -> list[str]:
        if self.temps:
            return list(self.temps)
        cols = [h for h in header if h.startswith(self.temp_prefix)]
        if not cols:
            raise SchemaError(f"no thermocouple columns with prefix {self.temp_prefix!r}", self.temp_prefix)
        return cols


def _parse_float(cell: str) -> float:
    cell = cell.strip()
    if not cell:
        return float("nan")
    try:
        return float(cell)
    except ValueError:
        return float("nan")


def _parse_day(cell: str, location: str) -> int:
    try:
        value = float(cell.strip())
    except ValueError:
        raise ParseError(f"day value {cell!r} is not an integer", location) from None
    if not value.is_integer():
        raise ParseError(f"day value {cell!r} is not an integer", location)
    return int(value)


def load_wells(source: str | os.PathLike | IO[str], schema: Schema | None = None) -> list[WellSeries]:
    """Read a delimited table into one WellSeries per well.

    The delimiter (tab or comma) is detected from the header line.  Lines
    starting with ``#`` are treated as comments, which lets files written
    by this package carry their provenance header.  Wells are returned in
    order of first appearance and rows are sorted by day.
    """
    schema = schema or Schema()
    if isinstance(source, (str, os.PathLike)):
        with open(source, encoding="utf-8", newline="") as fh:
            text = fh.read()
        name = os.fspath(source)
    else:
        text = source.read()
        name = getattr(source, "name", "<stream>")

    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines:
        raise SchemaError(f"{name}: no header row")
    delimiter = "\t" if "\t" in lines[0] else ","
    reader = csv.reader(io.StringIO("\n".join(lines)), delimiter=delimiter)
    header = [h.strip() for h in next(reader)]

    temp_cols = schema.temp_columns(header)
    mandatory = [schema.well, schema.day, *temp_cols]
    mandatory += [c for c in (schema.fluid, schema.gas) if c is not None]
    index = {h: i for i, h in enumerate(header)}
    for col in mandatory:
        if col not in index:
            raise SchemaError(f"{name}: missing column {col!r}", col)

    rows: dict[str, list[tuple[int, list[float], float, float]]] = {}
    for lineno, record in enumerate(reader, start=2):
        if len(record) < len(header):
            record = record + [""] * (len(header) - len(record))
        loc = f"{name}:{lineno}"
        well = record[index[schema.well]].strip()
        if not well:
            raise ParseError("empty well id", loc)
        day = _parse_day(record[index[schema.day]], loc)
        temps = [_parse_float(record[index[c]]) for c in temp_cols]
        fluid = _parse_float(record[index[schema.fluid]]) if schema.fluid else float("nan")
        gas = _parse_float(record[index[schema.gas]]) if schema.gas else float("nan")
        rows.setdefault(well, []).append((day, temps, fluid, gas))

    out = []
    for well, recs in rows.items():
        recs.sort(key=lambda r: r[0])
        days = [r[0] for r in recs]
        for a, b in zip(days, days[1:]):
            if a == b:
                raise DuplicateRowError(f"{name}: duplicate rows for well {well!r}, day {a}")
        out.append(
            WellSeries(
                well_id=well,
                day=np.array(days, dtype=np.int64),
                temps=np.array([r[1] for r in recs], dtype=float).reshape(len(recs), len(temp_cols)),
                temp_labels=tuple(temp_cols),
                fluid_prod=np.array([r[2] for r in recs]),
                gas_prod=np.array([r[3] for r in recs]),
            )
        )
    return out


def _fmt(x: float) -> str:
    if np.isnan(x):
        return ""
    return repr(float(x))


def write_wells(wells: Iterable[WellSeries], stream: IO[str], header_lines: Sequence[str] = ()) -> None:
    """Write wells in the comma-delimited layout read by :func:`load_wells`."""
    wells = list(wells)
    if not wells:
        raise EmptyDatasetError("no wells to write")
    labels = wells[0].temp_labels
    for w in wells:
        if w.temp_labels != labels:
            raise ShapeError(f"well {w.well_id} has different thermocouple labels")
    for line in header_lines:
        stream.write(f"# {line}\n")
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(["well", "day", "fluid_prod", "gas_prod", *labels])
    for w in wells:
        for i in range(w.n):
            writer.writerow(
                [w.well_id, int(w.day[i]), _fmt(w.fluid_prod[i]), _fmt(w.gas_prod[i])]
                + [_fmt(t) for t in w.temps[i]]
            )


def cap_temperatures(series: WellSeries, cap: float = 700.0) -> tuple[WellSeries, int]:
    """Clamp every temperature to at most ``cap``.

    Returns the capped series and the number of cells that changed.
    Missing cells stay missing.
    """
    if not cap > 0:
        raise ConfigError(f"cap must be > 0, got {cap}")
    over = series.temps > cap  # NaN compares False
    if not over.any():
        return series, 0
    capped = np.where(over, cap, series.temps)
    return replace(series, temps=capped), int(over.sum())


def complete_rows(series: WellSeries, response: str | None = None) -> np.ndarray:
    """Boolean mask of rows with all temperatures, and the response if given, usable."""
    mask = np.all(np.isfinite(series.temps), axis=1)
    if response is not None:
        y = series.response(response)
        mask &= np.isfinite(y) & (y >= 0)
    return mask


def drop_incomplete_rows(series: WellSeries, response: str) -> WellSeries:
    """Keep only rows where the selected response and every temperature are present.

    Negative response values are treated as missing since production
    rates are non-negative.
    """
    mask = complete_rows(series, response)
    if not mask.any():
        raise EmptyDatasetError(f"well {series.well_id}: no complete rows for response {response!r}")
    if mask.all():
        return series
    return series.take(mask)


def holdout_split(series: WellSeries, fraction: float) -> tuple[WellSeries, WellSeries]:
    """Split off the last ``fraction`` of rows (by day) as a holdout set."""
    if not 0.0 <= fraction < 1.0:
        raise ConfigError(f"holdout fraction must lie in [0, 1), got {fraction}")
    n_hold = int(np.floor(series.n * fraction))
    n_train = series.n - n_hold
    if n_train < 1:
        raise EmptyDatasetError(f"well {series.well_id}: holdout leaves no training rows")
    return series.take(np.arange(n_train)), series.take(np.arange(n_train, series.n))
