"""Deterministic synthetic irradiance scenarios with known structure."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .series import DEFAULT_STEP, ForecastSeries, TimeSeries
from .solar import SIRTA_LAT, SIRTA_LON, haurwitz, solar_position


@dataclass(frozen=True)
class CloudEvent:
    start: int          # epoch seconds
    duration: int       # seconds
    attenuation: float  # clear-sky index inside the dip
    edge: int = 0       # linear ramp width on each side, seconds

    def __post_init__(self):
        if not 0.0 <= self.attenuation <= 1.0:
            raise ValueError("attenuation must lie in [0, 1]")
        if self.duration <= 0 or self.edge < 0:
            raise ValueError("duration must be > 0 and edge >= 0")


@dataclass(frozen=True)
class ScenarioSpec:
    start: int
    end: int  # exclusive
    lat_deg: float = SIRTA_LAT
    lon_deg: float = SIRTA_LON
    cadence: int = DEFAULT_STEP
    events: tuple[CloudEvent, ...] = ()
    noise_sigma: float = 0.0
    seed: int = 0
    # (mean, amplitude, period seconds): sinusoidal clear-sky index drift
    kc_drift: tuple[float, float, float] | None = None
    daylight_only: bool = True
    extra: dict = field(default_factory=dict, compare=False)


@dataclass(frozen=True)
class Scenario:
    timestamps: np.ndarray
    ghi: np.ndarray
    ghi_clr: np.ndarray
    kc: np.ndarray
    sza_deg: np.ndarray
    saa_deg: np.ndarray
    cadence: int

    @property
    def series(self) -> TimeSeries:
        return TimeSeries(self.timestamps, self.ghi, self.cadence)

    @property
    def clear(self) -> TimeSeries:
        return TimeSeries(self.timestamps, self.ghi_clr, self.cadence)

    def frame_means(self) -> tuple[np.ndarray, np.ndarray]:
        """Plausible mean pixel intensities for long and short exposures."""
        cz = np.cos(np.radians(self.sza_deg)).clip(0, 1)
        cloud = 1.0 - np.clip(self.kc, 0, 1)
        long_ = np.clip(70.0 + 90.0 * cz + 60.0 * cloud, 0, 255)
        short = np.clip(20.0 + 50.0 * cz * np.clip(self.kc, 0, 1.5), 0, 255)
        return np.round(long_, 3), np.round(short, 3)


def _grid(spec: ScenarioSpec):
    if spec.end <= spec.start:
        raise ValueError("scenario end must follow start")
    first = -(-spec.start // spec.cadence) * spec.cadence
    ts = np.arange(first, spec.end, spec.cadence, dtype=np.int64)
    ang = solar_position(spec.lat_deg, spec.lon_deg, ts)
    return ts, np.asarray(ang.sza_deg), np.asarray(ang.saa_deg)


def _check_overlaps(events):
    ordered = sorted(events, key=lambda e: e.start)
    for a, b in zip(ordered, ordered[1:]):
        if b.start < a.start + a.duration:
            raise ValueError(f"cloud events overlap at {b.start}")


def attenuation_profile(ts: np.ndarray, events) -> np.ndarray:
    """Multiplicative clear-sky index profile made of smoothed rectangular dips."""
    _check_overlaps(events)
    kc = np.ones(ts.size)
    t = ts.astype(np.float64)
    for e in events:
        lo, hi = e.start, e.start + e.duration
        a, b = np.searchsorted(ts, [lo, hi], side="left")
        seg = t[a:b]
        if e.edge > 0:
            w = np.minimum(np.clip((seg - lo) / e.edge, 0, 1), np.clip((hi - seg) / e.edge, 0, 1))
        else:
            w = np.ones(seg.size)
        kc[a:b] *= 1.0 - (1.0 - e.attenuation) * w
    return kc


def periodic_events(start: int, end: int, period: int, duration: int,
                    attenuation: float, edge: int = 0) -> tuple[CloudEvent, ...]:
    """Dips of ``duration`` seconds repeating every ``period`` seconds."""
    if duration >= period:
        raise ValueError("dip duration must be shorter than the period")
    return tuple(CloudEvent(s, duration, attenuation, edge)
                 for s in range(start, end, period))


def _build(spec: ScenarioSpec, with_clouds: bool) -> Scenario:
    ts, sza, saa = _grid(spec)
    clr = haurwitz(sza)
    kc = np.ones(ts.size)
    if with_clouds:
        kc = attenuation_profile(ts, spec.events)
        if spec.kc_drift is not None:
            mean, amp, period = spec.kc_drift
            kc = kc * (mean + amp * np.sin(2 * np.pi * ts / period))
        if spec.noise_sigma > 0:
            rng = np.random.default_rng(spec.seed)
            kc = kc * (1.0 + spec.noise_sigma * rng.standard_normal(ts.size))
        kc = np.clip(kc, 0.0, None)
    keep = sza < 90.0 if spec.daylight_only else np.ones(ts.size, bool)
    ghi = kc * clr
    return Scenario(ts[keep], ghi[keep], clr[keep], kc[keep], sza[keep], saa[keep],
                    spec.cadence)


def gen_clear_day(spec: ScenarioSpec) -> TimeSeries:
    """Haurwitz clear-sky GHI at every grid timestamp with the sun above the horizon."""
    return _build(spec, with_clouds=False).series


def gen_cloud_transits(spec: ScenarioSpec) -> TimeSeries:
    return _build(spec, with_clouds=True).series


def gen_scenario(spec: ScenarioSpec) -> Scenario:
    """Full scenario including clear-sky values and solar angles."""
    return _build(spec, with_clouds=True)


def lag_forecast(series, k: int) -> ForecastSeries:
    """Forecast that reports at ``t`` the value observed at ``t - k * step``."""
    if k <= 0:
        raise ValueError("lag must be a positive number of steps")
    base_h = 0
    producer = f"lag{k}"
    if isinstance(series, ForecastSeries):
        base_h = series.horizon
        producer = f"{series.producer}+lag{k}"
        series = series.inner
    shift = k * series.nominal_step
    ts = series.timestamps
    target = ts + shift
    keep = np.isin(target, ts)
    return ForecastSeries(TimeSeries(target[keep], series.values[keep], series.nominal_step),
                          base_h + shift, producer=producer)
