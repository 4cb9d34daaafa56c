"""Time-series containers, grid alignment, normalization and gap splitting.

Timestamps are integer UTC epoch seconds. Values are float64 (W/m^2 unless
noted otherwise). All containers are immutable; operations return new
objects and never modify their inputs.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime, timezone

import numpy as np

DEFAULT_STEP = 120


class SeriesError(ValueError):
    """Raised when a series violates its invariants or cannot be aligned."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class TimeSeries:
    timestamps: np.ndarray
    values: np.ndarray
    nominal_step: int = DEFAULT_STEP

    def __post_init__(self):
        ts = np.array(self.timestamps, dtype=np.int64).reshape(-1)
        vs = np.array(self.values, dtype=np.float64).reshape(-1)
        if ts.shape != vs.shape:
            raise SeriesError(
                f"timestamps ({ts.size}) and values ({vs.size}) differ in length")
        if ts.size > 1 and np.any(np.diff(ts) <= 0):
            raise SeriesError("timestamps must be strictly increasing")
        if not np.all(np.isfinite(vs)):
            raise SeriesError("values must be finite")
        if self.nominal_step <= 0:
            raise SeriesError("nominal_step must be positive")
        object.__setattr__(self, "timestamps", _frozen(ts))
        object.__setattr__(self, "values", _frozen(vs))

    def __len__(self) -> int:
        return int(self.timestamps.size)

    def slice(self, start: int, stop: int) -> TimeSeries:
        return TimeSeries(self.timestamps[start:stop], self.values[start:stop],
                          self.nominal_step)

    def select(self, mask_or_index) -> TimeSeries:
        return TimeSeries(self.timestamps[mask_or_index],
                          self.values[mask_or_index], self.nominal_step)


@dataclass(frozen=True, eq=False)
class ForecastSeries:
    """Predictions valid at their own timestamps, issued ``horizon`` seconds earlier."""

    inner: TimeSeries
    horizon: int
    producer: str = "forecast"
    loss: str = "-"

    def __post_init__(self):
        step = self.inner.nominal_step
        if self.horizon < 0 or self.horizon % step:
            raise SeriesError(
                f"horizon {self.horizon}s is not a multiple of the {step}s step")

    @property
    def timestamps(self) -> np.ndarray:
        return self.inner.timestamps

    @property
    def values(self) -> np.ndarray:
        return self.inner.values

    def __len__(self) -> int:
        return len(self.inner)


@dataclass(frozen=True, eq=False)
class AlignedPair:
    timestamps: np.ndarray
    test: np.ndarray
    reference: np.ndarray
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        ts = np.asarray(self.timestamps, dtype=np.int64)
        t = np.asarray(self.test, dtype=np.float64)
        r = np.asarray(self.reference, dtype=np.float64)
        if not (ts.shape == t.shape == r.shape):
            raise SeriesError("aligned arrays must share one grid")
        object.__setattr__(self, "timestamps", _frozen(ts))
        object.__setattr__(self, "test", _frozen(t))
        object.__setattr__(self, "reference", _frozen(r))

    def __len__(self) -> int:
        return int(self.timestamps.size)

    def select(self, mask_or_index) -> AlignedPair:
        return AlignedPair(self.timestamps[mask_or_index], self.test[mask_or_index],
                           self.reference[mask_or_index], self.meta)


def _as_series(x) -> TimeSeries:
    return x.inner if isinstance(x, ForecastSeries) else x


def align(test, reference=None) -> AlignedPair:
    """Pair ``test`` and ``reference`` on the intersection of their grids.

    Missing points are dropped, never interpolated. Either argument may be a
    TimeSeries, a ForecastSeries or an AlignedPair (whose own test/reference
    sides are re-used, which makes alignment idempotent).
    """
    if isinstance(test, AlignedPair):
        test, reference = (TimeSeries(test.timestamps, test.test),
                           TimeSeries(test.timestamps, test.reference))
    a, b = _as_series(test), _as_series(reference)
    common, ia, ib = np.intersect1d(a.timestamps, b.timestamps,
                                    assume_unique=True, return_indices=True)
    if common.size == 0:
        raise SeriesError("no overlap between test and reference grids")
    return AlignedPair(common, a.values[ia], b.values[ib])


def minmax_normalize(values) -> np.ndarray:
    v = np.asarray(values, dtype=np.float64)
    if v.size == 0:
        raise SeriesError("cannot normalize an empty array")
    lo, hi = v.min(), v.max()
    if hi == lo:
        return np.zeros_like(v)
    return (v - lo) / (hi - lo)


def split_contiguous(series: TimeSeries, max_gap: int) -> list[TimeSeries]:
    """Cut ``series`` wherever consecutive timestamps are more than ``max_gap`` apart."""
    if len(series) == 0:
        return []
    cuts = np.flatnonzero(np.diff(series.timestamps) > max_gap) + 1
    bounds = [0, *cuts.tolist(), len(series)]
    return [series.slice(lo, hi) for lo, hi in zip(bounds[:-1], bounds[1:])]


def contiguous_runs(timestamps: np.ndarray, max_gap: int) -> list[tuple[int, int]]:
    """Index ranges ``[lo, hi)`` of the runs produced by :func:`split_contiguous`."""
    ts = np.asarray(timestamps)
    if ts.size == 0:
        return []
    cuts = np.flatnonzero(np.diff(ts) > max_gap) + 1
    bounds = [0, *cuts.tolist(), int(ts.size)]
    return list(zip(bounds[:-1], bounds[1:]))


def utc_day(timestamps) -> np.ndarray:
    """UTC calendar-day number (days since the epoch) of each timestamp."""
    return np.floor_divide(np.asarray(timestamps, dtype=np.int64), 86400)


def parse_timestamp(text: str) -> int:
    """Parse an ISO-8601 instant into UTC epoch seconds.

    Naive timestamps are taken as UTC. A trailing ``Z`` is accepted.
    """
    s = text.strip()
    if s.endswith(("Z", "z")):
        s = s[:-1] + "+00:00"
    dt = datetime.fromisoformat(s)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return int(dt.timestamp())


def format_timestamp(epoch: int) -> str:
    return datetime.fromtimestamp(int(epoch), tz=timezone.utc).strftime(
        "%Y-%m-%dT%H:%M:%SZ")
