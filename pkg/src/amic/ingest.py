"""Loading, cleaning, resampling, alignment and rank transform of raw series."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path

import numpy as np
from scipy.stats import rankdata


class IngestError(ValueError):
    """Raised when an input series cannot be loaded or prepared."""


@dataclass(frozen=True)
class RawSeries:
    timestamps: np.ndarray  # int64 epoch seconds
    values: np.ndarray  # float64

    def __len__(self) -> int:
        return len(self.timestamps)


@dataclass(frozen=True)
class SeriesPair:
    timestamps: np.ndarray
    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        n = len(self.timestamps)
        if len(self.x) != n or len(self.y) != n:
            raise IngestError("pair arrays must have equal length")
        if n < 2:
            raise IngestError("a pair needs at least 2 samples")

    def __len__(self) -> int:
        return len(self.timestamps)


@dataclass(frozen=True)
class RankedPair:
    u: np.ndarray
    v: np.ndarray
    source: SeriesPair

    def __len__(self) -> int:
        return len(self.u)


def _parse_timestamp(text: str) -> tuple[int, str]:
    text = text.strip()
    try:
        return int(text), "epoch"
    except ValueError:
        pass
    iso = text[:-1] + "+00:00" if text.endswith(("Z", "z")) else text
    dt = datetime.fromisoformat(iso)
    if dt.tzinfo is None:
        raise ValueError("timestamp without a UTC offset")
    return int(dt.timestamp()), "rfc3339"


def load_series(path: str | Path, format: str = "csv") -> RawSeries:
    """Read a ``timestamp,value`` CSV file in file order.

    Timestamps may be integer epoch seconds or RFC 3339 strings with a
    ``Z`` or explicit offset; one file must use a single form.
    """
    if format != "csv":
        raise IngestError(f"unsupported format: {format}")
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise IngestError(f"cannot read {path}: {exc}") from exc
    ts, vals = [], []
    form = None
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader, None)
        except (csv.Error, UnicodeDecodeError) as exc:
            raise IngestError(f"{path}: unreadable header: {exc}") from exc
        if header is None or [h.strip().lower() for h in header] != ["timestamp", "value"]:
            raise IngestError(f"{path}: expected header 'timestamp,value'")
        row_no = 1
        try:
            for row in reader:
                row_no += 1
                if not row or all(not c.strip() for c in row):
                    continue
                if len(row) != 2:
                    raise IngestError(f"{path}: row {row_no}: expected 2 columns")
                try:
                    t, kind = _parse_timestamp(row[0])
                    val = float(row[1])
                except ValueError as exc:
                    raise IngestError(f"{path}: row {row_no}: {exc}") from exc
                if form is None:
                    form = kind
                elif kind != form:
                    raise IngestError(f"{path}: row {row_no}: mixed timestamp forms")
                ts.append(t)
                vals.append(val)
        except (csv.Error, UnicodeDecodeError) as exc:
            raise IngestError(f"{path}: row {row_no}: {exc}") from exc
    if not ts:
        raise IngestError(f"{path}: empty series")
    return RawSeries(np.asarray(ts, dtype=np.int64), np.asarray(vals, dtype=np.float64))


def native_step(series: RawSeries) -> int:
    """Median positive spacing between distinct timestamps."""
    t = np.unique(series.timestamps)
    if len(t) < 2:
        raise IngestError("fewer than 2 distinct timestamps")
    return int(np.median(np.diff(t)))


def clean(series: RawSeries, grid_step: int) -> RawSeries:
    """Deduplicate, drop non-finite values and interpolate onto a regular grid.

    The grid runs from the first to the last timestamp in steps of
    `grid_step`; missing points are linearly interpolated from the nearest
    present neighbours. Nothing is extrapolated.
    """
    if grid_step <= 0:
        raise IngestError("grid_step must be positive")
    if len(series) == 0:
        raise IngestError("empty series")
    order = np.argsort(series.timestamps, kind="stable")
    t = series.timestamps[order]
    x = series.values[order]
    # stable sort keeps file order among equal stamps, so this keeps the first
    first = np.ones(len(t), dtype=bool)
    first[1:] = t[1:] != t[:-1]
    t, x = t[first], x[first]
    ok = np.isfinite(x)
    t, x = t[ok], x[ok]
    if len(t) < 2:
        raise IngestError("fewer than 2 distinct timestamps")
    grid = np.arange(t[0], t[-1] + 1, grid_step, dtype=np.int64)
    vals = np.interp(grid.astype(np.float64), t.astype(np.float64), x)
    # exact copies where the grid hits a sample
    hit = np.searchsorted(t, grid)
    hit_ok = hit < len(t)
    hit_ok[hit_ok] = t[hit[hit_ok]] == grid[hit_ok]
    vals[hit_ok] = x[hit[hit_ok]]
    return RawSeries(grid, vals)


def resample(series: RawSeries, resolution: int, aggregator: str = "mean") -> RawSeries:
    """Aggregate into buckets ``[t, t + resolution)`` anchored at the first sample."""
    if aggregator not in ("mean", "sum"):
        raise IngestError(f"unknown aggregator: {aggregator}")
    t = series.timestamps
    if len(t) == 0:
        raise IngestError("empty series")
    if len(t) > 1:
        step = int(np.min(np.diff(t)))
        if resolution < step:
            raise IngestError(f"resolution {resolution} is finer than the native step {step}")
    elif resolution <= 0:
        raise IngestError("resolution must be positive")
    bucket = (t - t[0]) // resolution
    starts = np.flatnonzero(np.r_[True, bucket[1:] != bucket[:-1]])
    sums = np.add.reduceat(series.values, starts)
    if aggregator == "mean":
        counts = np.diff(np.r_[starts, len(t)])
        sums = sums / counts
    return RawSeries(t[0] + bucket[starts] * resolution, sums)


def align_pair(a: RawSeries, b: RawSeries) -> SeriesPair:
    """Restrict two series to their shared timestamps."""
    lo = max(a.timestamps[0], b.timestamps[0])
    hi = min(a.timestamps[-1], b.timestamps[-1])
    if lo > hi:
        raise IngestError("series do not overlap in time")
    common, ia, ib = np.intersect1d(a.timestamps, b.timestamps, assume_unique=True,
                                    return_indices=True)
    if len(common) < 2:
        raise IngestError("fewer than 2 shared timestamps")
    return SeriesPair(common, a.values[ia], b.values[ib])


def rank_values(x: np.ndarray) -> np.ndarray:
    """Average ranks mapped to [0, 1]."""
    n = len(x)
    r = rankdata(x, method="average")
    return (r - 1.0) / (n - 1)


def rank_transform(pair: SeriesPair) -> RankedPair:
    return RankedPair(rank_values(pair.x), rank_values(pair.y), pair)


def ranked_from_arrays(x, y, timestamps=None) -> RankedPair:
    """Convenience wrapper building a ranked pair straight from arrays."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if timestamps is None:
        timestamps = np.arange(len(x), dtype=np.int64)
    return rank_transform(SeriesPair(np.asarray(timestamps, dtype=np.int64), x, y))
