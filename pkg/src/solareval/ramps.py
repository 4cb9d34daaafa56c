"""Swinging-door ramp extraction and the ramp score between two series.

Slopes are in W/m^2/min. Times are UTC epoch seconds.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .series import TimeSeries, utc_day

TAU_CLS = 0.05


@dataclass(frozen=True)
class RampSegment:
    t_start: int
    t_end: int
    slope: float
    start_index: int
    end_index: int


@dataclass(frozen=True)
class SlopeFunction:
    """Piecewise-constant slope: ``slopes[k]`` holds on ``[breakpoints[k], breakpoints[k+1])``."""

    breakpoints: np.ndarray
    slopes: np.ndarray

    def __post_init__(self):
        bp = np.asarray(self.breakpoints, dtype=np.float64)
        sl = np.asarray(self.slopes, dtype=np.float64)
        if bp.size != sl.size + 1 or sl.size == 0:
            raise ValueError("need len(breakpoints) == len(slopes) + 1 >= 2")
        if np.any(np.diff(bp) <= 0):
            raise ValueError("breakpoints must be strictly increasing")
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "slopes", sl)

    @classmethod
    def from_segments(cls, segments: list[RampSegment]) -> SlopeFunction:
        bps = [segments[0].t_start] + [s.t_end for s in segments]
        return cls(np.array(bps), np.array([s.slope for s in segments]))

    def __call__(self, t):
        k = np.searchsorted(self.breakpoints, t, side="right") - 1
        return self.slopes[np.clip(k, 0, self.slopes.size - 1)]


def epsilon_for_day(clearsky_day, tau: float = TAU_CLS) -> float:
    """Door half-width for one day: ``tau`` times the day's clear-sky maximum."""
    vals = clearsky_day.values if isinstance(clearsky_day, TimeSeries) else clearsky_day
    vals = np.asarray(vals, dtype=np.float64)
    if vals.size == 0:
        raise ValueError("empty clear-sky day")
    return float(tau) * float(vals.max())


def swinging_door(series: TimeSeries, epsilon: float) -> list[RampSegment]:
    """Greedy left-to-right piecewise-linear segmentation.

    From the current pivot, the upper door is the smallest slope that keeps
    every visited point within ``+epsilon`` and the lower door the largest
    slope keeping them within ``-epsilon``. When a new point makes the doors
    cross, the segment closes on the previous point, which becomes the next
    pivot. Each segment's slope is its pivot-to-close chord.
    """
    if epsilon < 0:
        raise ValueError("epsilon must be >= 0")
    n = len(series)
    if n < 2:
        raise ValueError("swinging door needs at least two points")
    t = series.timestamps.tolist()
    y = series.values.tolist()
    eps = float(epsilon)

    segments = []
    p = 0
    tp, yp = t[0], y[0]
    upper = float("inf")
    lower = float("-inf")
    m = 1
    while m < n:
        dt = t[m] - tp
        u = (y[m] + eps - yp) / dt
        lo = (y[m] - eps - yp) / dt
        new_upper = u if u < upper else upper
        new_lower = lo if lo > lower else lower
        if new_lower > new_upper and m - 1 > p:
            segments.append(_segment(t, y, p, m - 1))
            p = m - 1
            tp, yp = t[p], y[p]
            upper = float("inf")
            lower = float("-inf")
            continue
        upper, lower = new_upper, new_lower
        m += 1
    segments.append(_segment(t, y, p, n - 1))
    return segments


def _segment(t, y, i, j) -> RampSegment:
    minutes = (t[j] - t[i]) / 60.0
    return RampSegment(int(t[i]), int(t[j]), (y[j] - y[i]) / minutes, i, j)


def ramp_score(seg_test: SlopeFunction, seg_ref: SlopeFunction,
               t_min: float, t_max: float) -> float:
    """Time-average of ``|slope_test - slope_ref|`` over ``[t_min, t_max]``, integrated exactly."""
    if not t_max > t_min:
        raise ValueError("ramp score needs a positive-length interval")
    for f in (seg_test, seg_ref):
        if f.breakpoints[0] > t_min or f.breakpoints[-1] < t_max:
            raise ValueError("slope function does not cover the scoring interval")
    cuts = np.union1d(seg_test.breakpoints, seg_ref.breakpoints)
    cuts = cuts[(cuts > t_min) & (cuts < t_max)]
    edges = np.concatenate(([t_min], cuts, [t_max]))
    mids = 0.5 * (edges[:-1] + edges[1:])
    widths = np.diff(edges)
    diff = np.abs(seg_test(mids) - seg_ref(mids))
    return float(np.sum(diff * widths) / (t_max - t_min))


@dataclass(frozen=True)
class DayRamp:
    day: int
    epsilon: float
    t_min: int
    t_max: int
    score: float
    test_segments: list
    ref_segments: list


def daily_ramp_scores(timestamps, test, reference, clearsky_ts, clearsky_values,
                      tau: float = TAU_CLS, epsilon: float | None = None) -> list[DayRamp]:
    """Segment each UTC day of a test/reference pair and score it.

    ``epsilon`` per day is ``tau`` times the day's clear-sky maximum, taken
    from ``clearsky_values`` sampled at ``clearsky_ts``; a fixed ``epsilon``
    overrides that rule. Days with fewer than two points are skipped.
    """
    ts = np.asarray(timestamps, dtype=np.int64)
    test = np.asarray(test, dtype=np.float64)
    reference = np.asarray(reference, dtype=np.float64)
    days = utc_day(ts)
    clr_days = utc_day(clearsky_ts)
    clearsky_values = np.asarray(clearsky_values, dtype=np.float64)

    out = []
    bounds = np.flatnonzero(np.diff(days)) + 1
    for lo, hi in zip([0, *bounds.tolist()], [*bounds.tolist(), ts.size]):
        if hi - lo < 2:
            continue
        day = int(days[lo])
        if epsilon is None:
            clr = clearsky_values[clr_days == day]
            eps = epsilon_for_day(clr, tau) if clr.size else 0.0
        else:
            eps = float(epsilon)
        seg_t = swinging_door(TimeSeries(ts[lo:hi], test[lo:hi]), eps)
        seg_r = swinging_door(TimeSeries(ts[lo:hi], reference[lo:hi]), eps)
        score = ramp_score(SlopeFunction.from_segments(seg_t),
                           SlopeFunction.from_segments(seg_r),
                           float(ts[lo]), float(ts[hi - 1]))
        out.append(DayRamp(day, eps, int(ts[lo]), int(ts[hi - 1]), score, seg_t, seg_r))
    return out


def weighted_ramp_score(days: list[DayRamp]) -> float:
    """Day scores averaged with weights equal to each day's scored duration."""
    if not days:
        return float("nan")
    w = np.array([d.t_max - d.t_min for d in days], dtype=np.float64)
    s = np.array([d.score for d in days])
    return float(np.sum(w * s) / np.sum(w))
