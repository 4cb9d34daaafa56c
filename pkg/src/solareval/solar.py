"""Solar geometry, clear-sky irradiance and persistence reference forecasts."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .series import ForecastSeries, SeriesError, TimeSeries

CLEARSKY_FLOOR = 20.0
KC_MAX = 1.5

# Haurwitz clear-sky constants (W/m^2, unitless)
HAURWITZ_A = 1098.0
HAURWITZ_B = 0.057

SIRTA_LAT = 48.713
SIRTA_LON = 2.208


class ClearSkyError(LookupError):
    pass


@dataclass(frozen=True)
class SolarAngles:
    sza_deg: np.ndarray | float
    saa_deg: np.ndarray | float


def _civil_parts(timestamps):
    ts = np.asarray(timestamps, dtype=np.int64)
    days = ts.astype("datetime64[s]").astype("datetime64[D]")
    years = days.astype("datetime64[Y]")
    doy = (days - years).astype(np.int64) + 1
    year_num = years.astype(np.int64) + 1970
    leap = ((year_num % 4 == 0) & (year_num % 100 != 0)) | (year_num % 400 == 0)
    seconds_of_day = ts - days.astype("datetime64[s]").astype(np.int64)
    return doy, np.where(leap, 366.0, 365.0), seconds_of_day / 3600.0


def solar_position(lat_deg: float, lon_deg: float, timestamps) -> SolarAngles:
    """Low-accuracy solar zenith and azimuth (degrees) for UTC epoch seconds.

    Uses the Fourier-series declination and equation of time of Spencer (1971)
    as popularised by NOAA; typical error is a few tenths of a degree.
    Azimuth is measured clockwise from north. Accepts scalars or arrays.
    """
    if abs(lat_deg) > 90 or abs(lon_deg) > 180:
        raise ValueError(f"invalid site ({lat_deg}, {lon_deg})")
    scalar = np.ndim(timestamps) == 0
    doy, ndays, hours = _civil_parts(np.atleast_1d(timestamps))
    g = 2.0 * np.pi / ndays * (doy - 1 + (hours - 12.0) / 24.0)
    eqtime = 229.18 * (0.000075 + 0.001868 * np.cos(g) - 0.032077 * np.sin(g)
                       - 0.014615 * np.cos(2 * g) - 0.040849 * np.sin(2 * g))
    decl = (0.006918 - 0.399912 * np.cos(g) + 0.070257 * np.sin(g)
            - 0.006758 * np.cos(2 * g) + 0.000907 * np.sin(2 * g)
            - 0.002697 * np.cos(3 * g) + 0.00148 * np.sin(3 * g))
    true_solar_min = hours * 60.0 + eqtime + 4.0 * lon_deg
    ha = np.radians(true_solar_min / 4.0 - 180.0)
    lat = np.radians(lat_deg)

    cosz = np.sin(lat) * np.sin(decl) + np.cos(lat) * np.cos(decl) * np.cos(ha)
    sza = np.degrees(np.arccos(np.clip(cosz, -1.0, 1.0)))
    saa = np.degrees(np.arctan2(np.sin(ha),
                                np.cos(ha) * np.sin(lat) - np.tan(decl) * np.cos(lat)))
    saa = np.mod(saa + 180.0, 360.0)
    if scalar:
        return SolarAngles(float(sza[0]), float(saa[0]))
    return SolarAngles(sza, saa)


def haurwitz(sza_deg):
    """Clear-sky GHI from the zenith angle alone; zero with the sun at or below the horizon."""
    z = np.radians(np.asarray(sza_deg, dtype=np.float64))
    cz = np.cos(z)
    up = np.degrees(z) < 90.0
    safe = np.where(up, cz, 1.0)
    out = np.where(up, HAURWITZ_A * safe * np.exp(-HAURWITZ_B / safe), 0.0)
    out = np.maximum(out, 0.0)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class ClearSkyProvider:
    """Source of clear-sky GHI: Haurwitz at a site, or an explicit time table."""

    mode: str = "analytic"
    lat_deg: float = SIRTA_LAT
    lon_deg: float = SIRTA_LON
    table_timestamps: np.ndarray | None = None
    table_values: np.ndarray | None = None

    def __post_init__(self):
        if self.mode not in ("analytic", "file"):
            raise ValueError(f"unknown clear-sky mode {self.mode!r}")
        if self.mode == "file":
            ts = np.asarray(self.table_timestamps, dtype=np.int64)
            vs = np.asarray(self.table_values, dtype=np.float64)
            if ts.shape != vs.shape:
                raise ValueError("clear-sky table columns differ in length")
            if ts.size > 1 and np.any(np.diff(ts) <= 0):
                raise ValueError("clear-sky table timestamps must be strictly increasing")
            if np.any(vs < 0) or not np.all(np.isfinite(vs)):
                raise ValueError("clear-sky table values must be finite and >= 0")
            object.__setattr__(self, "table_timestamps", ts)
            object.__setattr__(self, "table_values", vs)

    @classmethod
    def from_table(cls, timestamps, values) -> ClearSkyProvider:
        return cls(mode="file", table_timestamps=timestamps, table_values=values)


def clearsky_ghi(provider: ClearSkyProvider, timestamps):
    """Clear-sky GHI (W/m^2) at the given UTC epoch seconds."""
    scalar = np.ndim(timestamps) == 0
    ts = np.atleast_1d(np.asarray(timestamps, dtype=np.int64))
    if provider.mode == "analytic":
        out = haurwitz(solar_position(provider.lat_deg, provider.lon_deg, ts).sza_deg)
    else:
        table = provider.table_timestamps
        idx = np.searchsorted(table, ts)
        idx_c = np.minimum(idx, table.size - 1)
        hit = (idx < table.size) & (table[idx_c] == ts)
        if not np.all(hit):
            missing = ts[~hit][0]
            raise ClearSkyError(f"no clear-sky value for timestamp {int(missing)}")
        out = provider.table_values[idx_c]
    return float(out[0]) if scalar else out


def clearsky_index(ghi, ghi_clr, floor: float = CLEARSKY_FLOOR, kc_max: float = KC_MAX):
    """Ratio of measured to clear-sky GHI, set to 1 below ``floor`` and clamped to [0, kc_max]."""
    g = np.asarray(ghi, dtype=np.float64)
    c = np.asarray(ghi_clr, dtype=np.float64)
    low = c < floor
    kc = np.where(low, 1.0, g / np.where(low, 1.0, c))
    kc = np.clip(kc, 0.0, kc_max)
    return float(kc) if kc.ndim == 0 else kc


def _shift_pairs(timestamps: np.ndarray, horizon: int):
    target = timestamps + horizon
    pos = np.searchsorted(timestamps, target)
    pos_c = np.minimum(pos, timestamps.size - 1)
    ok = (pos < timestamps.size) & (timestamps[pos_c] == target)
    return np.flatnonzero(ok), pos_c[ok]


def _check_horizon(series: TimeSeries, horizon: int):
    if horizon < 0 or horizon % series.nominal_step:
        raise SeriesError(
            f"horizon {horizon}s is not a multiple of the {series.nominal_step}s step")


def smart_persistence(series: TimeSeries, provider: ClearSkyProvider | None,
                      horizon: int, *, clearsky: np.ndarray | None = None) -> ForecastSeries:
    """Hold the clear-sky index constant over ``horizon`` seconds.

    ``clearsky`` may carry precomputed clear-sky values on the series grid, in
    which case ``provider`` is not consulted.
    """
    _check_horizon(series, horizon)
    ts = series.timestamps
    src, dst = _shift_pairs(ts, horizon)
    clr = clearsky if clearsky is not None else clearsky_ghi(provider, ts)
    clr = np.asarray(clr, dtype=np.float64)
    kc = clearsky_index(series.values[src], clr[src])
    values = np.asarray(kc, dtype=np.float64) * clr[dst]
    return ForecastSeries(TimeSeries(ts[dst], values, series.nominal_step),
                          horizon, producer="smart_persistence")


def simple_persistence(series: TimeSeries, horizon: int) -> ForecastSeries:
    _check_horizon(series, horizon)
    src, dst = _shift_pairs(series.timestamps, horizon)
    return ForecastSeries(
        TimeSeries(series.timestamps[dst], series.values[src], series.nominal_step),
        horizon, producer="simple_persistence")
