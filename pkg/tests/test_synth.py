import numpy as np
import pytest

from solareval.series import TimeSeries
from solareval.solar import ClearSkyProvider, clearsky_ghi
from solareval.synth import (CloudEvent, ScenarioSpec, attenuation_profile, gen_clear_day,
                             gen_cloud_transits, gen_scenario, lag_forecast, periodic_events)

from .conftest import day_epoch


def spec(day="2019-07-26", **kw):
    t0 = day_epoch(day)
    return ScenarioSpec(start=t0, end=t0 + 86400, **kw)


def test_clear_day_matches_clearsky():
    s = spec()
    day = gen_clear_day(s)
    p = ClearSkyProvider(lat_deg=s.lat_deg, lon_deg=s.lon_deg)
    np.testing.assert_allclose(day.values, clearsky_ghi(p, day.timestamps), rtol=1e-12)
    assert len(day) > 0 and np.all(np.diff(day.timestamps) == 120)


def test_summer_brighter_than_winter():
    assert gen_clear_day(spec("2019-06-21")).values.max() > gen_clear_day(spec("2019-12-21")).values.max()


def test_polar_night_is_empty():
    assert len(gen_clear_day(spec("2019-12-21", lat_deg=80.0, lon_deg=0.0))) == 0


def test_single_dip_inside_value():
    t0 = day_epoch()
    ev = CloudEvent(t0 + 12 * 3600, 1200, 0.3, edge=120)
    sc = gen_scenario(spec(events=(ev,)))
    inside = (sc.timestamps >= ev.start + 240) & (sc.timestamps <= ev.start + 1200 - 240)
    np.testing.assert_allclose(sc.ghi[inside], 0.3 * sc.ghi_clr[inside], rtol=1e-12)
    outside = (sc.timestamps < ev.start) | (sc.timestamps >= ev.start + 1200)
    np.testing.assert_allclose(sc.ghi[outside], sc.ghi_clr[outside], rtol=1e-12)


def test_no_events_no_noise_is_clear():
    np.testing.assert_array_equal(gen_cloud_transits(spec()).values, gen_clear_day(spec()).values)


def test_periodic_dips_alternate(periodic_day):
    kc = periodic_day.kc
    low, high = np.isclose(kc, 0.3), np.isclose(kc, 1.0)
    assert low.sum() > 100 and high.sum() > 100
    # 20-min period at 2-min cadence: the pattern repeats every 10 samples
    np.testing.assert_allclose(kc[10:], kc[:-10])


def test_overlapping_events_rejected():
    t0 = day_epoch()
    with pytest.raises(ValueError, match="overlap"):
        attenuation_profile(np.arange(t0, t0 + 3600, 120),
                            [CloudEvent(t0, 600, 0.5), CloudEvent(t0 + 300, 600, 0.5)])
    with pytest.raises(ValueError):
        CloudEvent(t0, 600, 1.5)
    with pytest.raises(ValueError):
        periodic_events(t0, t0 + 3600, 600, 600, 0.5)


def test_bounds_and_determinism():
    t0 = day_epoch()
    events = periodic_events(t0, t0 + 86400, 2400, 900, 0.2, 300)
    a = gen_scenario(spec(events=events))
    assert np.all(a.ghi >= 0) and np.all(a.ghi <= a.ghi_clr + 1e-12)
    noisy1 = gen_scenario(spec(events=events, noise_sigma=0.2, seed=4))
    noisy2 = gen_scenario(spec(events=events, noise_sigma=0.2, seed=4))
    np.testing.assert_array_equal(noisy1.ghi, noisy2.ghi)
    assert np.all(noisy1.ghi >= 0)


def test_night_stays_zero_with_noise():
    sc = gen_scenario(spec(noise_sigma=0.5, seed=1, daylight_only=False))
    night = sc.sza_deg >= 90
    assert night.any() and np.all(sc.ghi[night] == 0)


def test_lag_forecast():
    s = TimeSeries(np.arange(20) * 120, np.arange(20.0) ** 2)
    f = lag_forecast(s, 5)
    assert f.horizon == 600
    assert f.timestamps[0] == 600 and f.values[0] == 0.0
    np.testing.assert_array_equal(f.values, s.values[:15])
    with pytest.raises(ValueError):
        lag_forecast(s, 0)
    twice = lag_forecast(lag_forecast(s, 2), 3)
    once = lag_forecast(s, 5)
    np.testing.assert_array_equal(twice.timestamps, once.timestamps)
    np.testing.assert_array_equal(twice.values, once.values)
    assert twice.horizon == once.horizon
