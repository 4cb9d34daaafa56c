import numpy as np
import pytest

from solareval.dataset import RecordTable
from solareval.series import parse_timestamp
from solareval.synth import ScenarioSpec, gen_scenario, periodic_events

DAY = "2019-07-26"


def day_epoch(text=DAY):
    return parse_timestamp(f"{text}T00:00:00Z")


def scenario_records(sc):
    long_, short = sc.frame_means()
    return RecordTable.from_columns(sc.timestamps, sc.ghi, sza_deg=sc.sza_deg,
                                    saa_deg=sc.saa_deg, ghi_clr=sc.ghi_clr,
                                    frame_mean_long=long_, frame_mean_short=short)


@pytest.fixture
def clear_day():
    t0 = day_epoch()
    return gen_scenario(ScenarioSpec(start=t0, end=t0 + 86400))


@pytest.fixture
def periodic_day():
    """Dips to k_c = 0.3 for 10 min every 20 min: the phase-opposition driver."""
    t0 = day_epoch()
    events = periodic_events(t0, t0 + 86400, period=1200, duration=600,
                             attenuation=0.3, edge=120)
    return gen_scenario(ScenarioSpec(start=t0, end=t0 + 86400, events=events))


@pytest.fixture
def rng():
    return np.random.default_rng(20190726)


def multi_year_records(days_per_year=4, years=(2017, 2018, 2019), **kw):
    """A few contiguous summer days in each year, as one record table."""
    tables = []
    for k, y in enumerate(years):
        t0 = day_epoch(f"{y}-06-10")
        sc = gen_scenario(ScenarioSpec(start=t0, end=t0 + days_per_year * 86400,
                                       seed=k, **kw))
        tables.append(scenario_records(sc))
    cols = {c: np.concatenate([getattr(t, c) for t in tables]) for c in
            ("timestamp", "ghi", "sza_deg", "saa_deg", "ghi_clr",
             "frame_mean_long", "frame_mean_short")}
    return RecordTable(**cols)


@pytest.fixture(scope="session")
def three_years():
    return multi_year_records(noise_sigma=0.1)


def linear_problem(seed=3, n=400, d=35):
    """Noiseless affine targets over badly scaled features."""
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, d)) * rng.uniform(1, 50, d) + rng.uniform(-100, 100, d)
    w = rng.normal(size=d) * 5
    return X, X @ w + 300.0


def drift_tabular_sets(horizon=600):
    """Train/validation/test tables from days whose k_c drifts slowly (2 h period)."""
    from solareval.learner import build_tabular, window_complete

    def tab(day, days, seed, step=2):
        t0 = day_epoch(day)
        sc = gen_scenario(ScenarioSpec(t0, t0 + days * 86400, kc_drift=(0.65, 0.3, 7200.0),
                                       seed=seed))
        recs = scenario_records(sc)
        anchors = np.flatnonzero(window_complete(recs, horizon) & (recs.sza_deg < 80))[::step]
        return build_tabular(recs, anchors, horizon)

    return tab("2019-05-01", 10, 0), tab("2019-06-01", 3, 1), tab("2019-07-01", 4, 2)
