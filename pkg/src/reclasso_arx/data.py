"""CSV ingestion, stationarity transforms and normalization.

Transform codes follow the FRED-MD/QD convention:

====  =================================
code  transform
====  =================================
1     level
2     first difference
3     second difference
4     log
5     first difference of log
6     second difference of log
7     first difference of percent change
====  =================================
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .arx import SeriesSet
from .errors import ConstantSeries, MissingColumn, NonFinite, NonPositiveForLog, ParseError

TRANSFORM_CODES = (1, 2, 3, 4, 5, 6, 7)
# number of leading observations each code consumes
_LOST = {1: 0, 2: 1, 3: 2, 4: 0, 5: 1, 6: 2, 7: 2}
_CODE_ROW_LABELS = {"transform", "transform:", "transforms", "tcode", "tcodes", "code", "codes"}

TARGET = "target"
EXOGENOUS = "exogenous"
IGNORE = "ignore"


def apply_transform(x, code: int) -> np.ndarray:
    """Apply a FRED transform code, dropping the undefined leading entries.

    >>> apply_transform([1.0, 3.0, 6.0], 2)
    array([2., 3.])
    """
    x = np.asarray(x, dtype=float)
    if code not in TRANSFORM_CODES:
        raise ValueError(f"transform code must be one of 1..7, got {code!r}")
    if code in (4, 5, 6):
        if np.any(x <= 0):
            raise NonPositiveForLog(f"code {code} needs strictly positive values")
        x = np.log(x)
    if code in (1, 4):
        return x.copy()
    if code in (2, 5):
        return np.diff(x)
    if code in (3, 6):
        return np.diff(x, n=2)
    with np.errstate(divide="ignore", invalid="ignore"):
        growth = x[1:] / x[:-1] - 1.0
    if not np.all(np.isfinite(growth)):
        raise NonFinite("code 7 divides by a zero value")
    return np.diff(growth)


def normalize(x, through: int | None = None, ddof: int = 1):
    """Standardize with mean and sd taken from the first ``through`` entries.

    ``x`` may be 1-d or 2-d (one series per row). Statistics use only the
    leading window so later observations never leak into the scaling.

    Returns
    -------
    z, mean, sd
    """
    x = np.asarray(x, dtype=float)
    window = x[..., :through] if through is not None else x
    if window.shape[-1] <= ddof:
        raise ValueError("normalization window too short")
    mean = window.mean(axis=-1, keepdims=True)
    sd = window.std(axis=-1, ddof=ddof, keepdims=True)
    if np.any(sd <= 0) or not np.all(np.isfinite(sd)):
        raise ConstantSeries("series is constant over the normalization window")
    z = (x - mean) / sd
    if x.ndim == 1:
        return z, float(mean[0]), float(sd[0])
    return z, mean[:, 0], sd[:, 0]


def normalize_series(series: SeriesSet, through: int | None = None) -> SeriesSet:
    """Standardize target and exogenous series with leading-window statistics."""
    y, _, _ = normalize(series.y, through)
    x = normalize(series.x, through)[0] if series.k else series.x
    return SeriesSet(y=y, x=x, labels=list(series.labels))


@dataclass
class IngestSpec:
    """How to turn CSV columns into a :class:`SeriesSet`.

    Parameters
    ----------
    target : str
        Column forecast by the model.
    exogenous : list of str, optional
        Exogenous columns. ``None`` takes every column that is neither the
        target nor listed in ``ignore``.
    ignore : list of str
        Columns to drop.
    codes : dict, optional
        Transform codes by column name. They override a code row in the
        file; columns without a code anywhere are left in levels.
    aggregate : int
        Average non-overlapping blocks of this many rows before
        transforming (3 turns monthly data into quarterly).
    """

    target: str
    exogenous: list | None = None
    ignore: list = field(default_factory=list)
    codes: dict = field(default_factory=dict)
    aggregate: int = 1

    def roles(self, columns):
        if self.target not in columns:
            raise MissingColumn(f"target column {self.target!r} not found")
        if self.exogenous is None:
            exo = [c for c in columns if c != self.target and c not in self.ignore]
        else:
            exo = list(self.exogenous)
            missing = [c for c in exo if c not in columns]
            if missing:
                raise MissingColumn(f"exogenous columns not found: {missing}")
        return exo


@dataclass
class RawTable:
    times: list
    columns: list
    values: np.ndarray  # (rows, columns), nan where a cell is blank
    codes: dict


def _parse_float(cell, row, col):
    text = cell.strip()
    if text == "":
        return math.nan
    try:
        val = float(text)
    except ValueError:
        raise ParseError(f"row {row}, column {col!r}: cannot parse {cell!r} as a number",
                         row=row, column=col) from None
    if not math.isfinite(val):
        raise NonFinite(f"row {row}, column {col!r}: non-finite value {cell!r}")
    return val


def read_table(path) -> RawTable:
    """Read the raw numeric table. Blank cells become NaN."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    rows = [r for r in rows if any(c.strip() for c in r)]
    if not rows:
        raise ParseError("empty file", row=0)
    header = [c.strip() for c in rows[0]]
    if len(header) < 2:
        raise ParseError("need a time column and at least one series", row=1)
    columns = header[1:]
    if len(set(columns)) != len(columns):
        raise ParseError("duplicate column names", row=1)
    body = rows[1:]
    codes = {}
    if body and body[0][0].strip().lower() in _CODE_ROW_LABELS:
        for col, cell in zip(columns, body[0][1:]):
            if cell.strip() == "":
                continue
            try:
                code = int(float(cell))
            except ValueError:
                raise ParseError(f"row 2, column {col!r}: bad transform code {cell!r}",
                                 row=2, column=col) from None
            if code not in TRANSFORM_CODES:
                raise ParseError(f"row 2, column {col!r}: transform code {code} not in 1..7",
                                 row=2, column=col)
            codes[col] = code
        body = body[1:]
        first_row = 3
    else:
        first_row = 2
    times, values = [], np.empty((len(body), len(columns)))
    for i, row in enumerate(body):
        lineno = first_row + i
        if len(row) != len(header):
            raise ParseError(f"row {lineno} has {len(row)} cells, expected {len(header)}",
                             row=lineno)
        times.append(row[0].strip())
        for j, col in enumerate(columns):
            values[i, j] = _parse_float(row[j + 1], lineno, col)
    return RawTable(times=times, columns=columns, values=values, codes=codes)


def aggregate_rows(values, block: int):
    """Mean over consecutive blocks of ``block`` rows; a partial tail is dropped."""
    values = np.asarray(values, dtype=float)
    if block <= 1:
        return values
    n = (values.shape[0] // block) * block
    return values[:n].reshape(n // block, block, *values.shape[1:]).mean(axis=1)


def _leading_trim(col, name):
    ok = np.flatnonzero(~np.isnan(col))
    if ok.size == 0:
        raise NonFinite(f"column {name!r} has no values")
    start = ok[0]
    if np.any(np.isnan(col[start:])):
        raise NonFinite(f"column {name!r} has missing values after its first observation")
    return col[start:]


def load_csv(path, spec: IngestSpec, return_times: bool = False):
    """Load, aggregate, transform and align series from a CSV file.

    Leading blank cells mark a series that starts late; after transforms
    every series is cut from the left to the shortest common length.
    """
    table = read_table(path)
    exo = spec.roles(table.columns)
    names = [spec.target] + exo
    index = {c: j for j, c in enumerate(table.columns)}
    values = aggregate_rows(table.values, spec.aggregate)
    times = table.times[spec.aggregate - 1::spec.aggregate][:values.shape[0]]
    out = []
    for name in names:
        code = spec.codes.get(name, table.codes.get(name, 1))
        col = values[:, index[name]]
        try:
            out.append(apply_transform(_leading_trim(col, name), code))
        except (NonPositiveForLog, NonFinite) as exc:
            raise type(exc)(f"column {name!r}: {exc}") from None
    length = min(len(s) for s in out)
    if length < 2:
        raise NonFinite("fewer than two aligned observations after transforms")
    aligned = np.vstack([s[len(s) - length:] for s in out])
    series = SeriesSet(y=aligned[0], x=aligned[1:], labels=names)
    if return_times:
        return series, times[len(times) - length:]
    return series


def write_csv(series: SeriesSet, path, times=None, codes=None):
    """Write a series set in the format :func:`load_csv` reads.

    Values are written with ``repr`` so they round-trip exactly.
    """
    times = list(range(1, series.T + 1)) if times is None else list(times)
    if len(times) != series.T:
        raise ValueError("times must match the series length")
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t"] + list(series.labels))
        if codes is not None:
            w.writerow(["transform"] + [int(codes.get(c, 1)) for c in series.labels])
        data = np.vstack([series.y, series.x])
        for i, t in enumerate(times):
            w.writerow([t] + [repr(float(v)) for v in data[:, i]])
