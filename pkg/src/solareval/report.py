"""Benchmark evaluation of forecasts against observations, and report serialisation.

Every row scores one (producer, loss, horizon) forecast. Skill and percentage
deltas are taken against smart persistence evaluated on exactly the same
timestamps; those reference values are stored in the row (``ref_*``) so each
percentage can be recomputed from the row alone.
"""
from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .dataset import DatasetError, RecordTable, SplitSpec, build_sequences
from .distortion import sequence_distortion, summarize
from .metrics import error_summary, forecast_skill
from .ramps import TAU_CLS, daily_ramp_scores, weighted_ramp_score
from .series import AlignedPair, ForecastSeries, TimeSeries, parse_timestamp
from .solar import SIRTA_LAT, SIRTA_LON, haurwitz, simple_persistence, smart_persistence, solar_position

SCHEMA_VERSION = 1
SPM = "smart_persistence"
SIMPLE = "simple_persistence"

CSV_FIELDS = (
    "schema_version", "producer", "loss", "horizon_min", "n",
    "fs_mse_pct", "fs_rmse_pct", "fs_mae_pct",
    "ramp_score", "ramp_delta_pct", "q95_abs", "q95_delta_pct",
    "tdi_pct", "tdm", "mae", "mse", "rmse",
    "ref_mae", "ref_mse", "ref_rmse", "ref_q95_abs", "ref_ramp_score",
    "tdi_adv_pct", "tdi_late_pct", "tdm_mean", "n_sequences", "n_days",
)
PCT_FIELDS = {"fs_mse_pct", "fs_rmse_pct", "fs_mae_pct", "ramp_delta_pct",
              "q95_delta_pct", "tdi_pct", "tdi_adv_pct", "tdi_late_pct"}


class ForecastFileError(ValueError):
    pass


@dataclass
class EvalSettings:
    horizons_min: tuple[int, ...] = (10,)
    tau_cls: float = TAU_CLS
    gamma: float = 0.1
    sza_max: float = 80.0
    seed: int = 0
    sequence_count: int = 100
    sequence_length: int = 100
    sequence_gap: int = 1800
    cadence: int = 120
    lat_deg: float = SIRTA_LAT
    lon_deg: float = SIRTA_LON
    epsilon: float | None = None


@dataclass
class Context:
    """Observation-side arrays shared by every row."""

    records: RecordTable
    reference: TimeSeries
    clearsky: np.ndarray
    sza: np.ndarray
    clearsky_source: str


def build_context(records: RecordTable, settings: EvalSettings) -> Context:
    if len(records) < 2:
        raise DatasetError("dataset needs at least two records")
    ts = records.timestamp
    if records.has("sza_deg"):
        sza = records.sza_deg
    else:
        sza = np.asarray(solar_position(settings.lat_deg, settings.lon_deg, ts).sza_deg)
    if records.has("ghi_clr"):
        clr, source = records.ghi_clr, "file"
    else:
        clr, source = haurwitz(sza), "haurwitz"
    ref = TimeSeries(ts, records.ghi, settings.cadence)
    return Context(records, ref, np.asarray(clr, dtype=np.float64), np.asarray(sza), source)


def _values_at(fc: ForecastSeries, ts: np.ndarray) -> np.ndarray:
    pos = np.searchsorted(fc.timestamps, ts)
    return fc.values[pos]


def _pct(x: float) -> float:
    return 100.0 * x


def _delta_pct(value: float, ref: float) -> float:
    if ref == 0 or not math.isfinite(ref):
        return 0.0 if value == ref else float("nan")
    return 100.0 * (value - ref) / ref


def evaluate(records: RecordTable, forecasts: list[ForecastSeries],
             settings: EvalSettings) -> dict:
    """Score smart persistence, simple persistence and every supplied forecast."""
    ctx = build_context(records, settings)
    ts = ctx.reference.timestamps
    sunlit = ctx.sza < settings.sza_max
    rows = []
    for h_min in sorted(set(settings.horizons_min)):
        h = int(h_min) * 60
        spm = smart_persistence(ctx.reference, None, h, clearsky=ctx.clearsky)
        candidates = [spm, simple_persistence(ctx.reference, h)]
        extra = sorted((f for f in forecasts if f.horizon == h),
                       key=lambda f: (f.producer, f.loss))
        candidates += extra

        # windows must be fully covered by every row of this horizon
        covered = np.ones(ts.size, bool)
        for fc in candidates:
            covered &= np.isin(ts, fc.timestamps)
        spec = SplitSpec({}, {}, sza_max_deg=settings.sza_max, rng_seed=settings.seed,
                         cadence=settings.cadence, sequence_length=settings.sequence_length,
                         sequence_gap=settings.sequence_gap,
                         sequence_count=settings.sequence_count)
        seqs = build_sequences(records, spec, mask=covered) if settings.sequence_count else None

        for fc in candidates:
            rows.append(_score_row(ctx, fc, spm, sunlit, seqs, settings))
    return {
        "schema_version": SCHEMA_VERSION,
        "metadata": {
            "clear_sky_source": ctx.clearsky_source,
            "n_records": len(records),
            "settings": asdict(settings),
            "tdi_aggregation": "mean of per-sequence TDI; TDM from pooled late/advance areas",
        },
        "rows": rows,
    }


def _score_row(ctx: Context, fc: ForecastSeries, spm: ForecastSeries, sunlit,
               seqs, settings: EvalSettings) -> dict:
    ts = ctx.reference.timestamps
    in_grid = np.isin(ts, fc.timestamps) & np.isin(ts, spm.timestamps) & sunlit
    common = ts[in_grid]
    if common.size == 0:
        raise DatasetError(f"{fc.producer} at {fc.horizon // 60} min has no scorable points")
    obs = ctx.reference.values[in_grid]
    pred = _values_at(fc, common)
    ref_pred = _values_at(spm, common)
    err = error_summary(AlignedPair(common, pred, obs))
    ref_err = error_summary(AlignedPair(common, ref_pred, obs))

    days = daily_ramp_scores(common, pred, obs, ts, ctx.clearsky, settings.tau_cls,
                             settings.epsilon)
    ref_days = daily_ramp_scores(common, ref_pred, obs, ts, ctx.clearsky,
                                 settings.tau_cls, settings.epsilon)
    ramp, ref_ramp = weighted_ramp_score(days), weighted_ramp_score(ref_days)

    reports = []
    if seqs is not None:
        for window in seqs.windows:
            wts = ts[window]
            reports.append(sequence_distortion(
                AlignedPair(wts, _values_at(fc, wts), ctx.reference.values[window])))
    dist = summarize(reports)

    def fs(a, b):
        return _pct(forecast_skill(a, b)) if b > 0 else float("nan")

    return {
        "producer": fc.producer,
        "loss": fc.loss,
        "horizon_min": fc.horizon // 60,
        "n": err.n,
        "mae": err.mae, "mse": err.mse, "rmse": err.rmse, "q95_abs": err.q95_abs,
        "ref_mae": ref_err.mae, "ref_mse": ref_err.mse, "ref_rmse": ref_err.rmse,
        "ref_q95_abs": ref_err.q95_abs,
        "fs_mse_pct": fs(err.mse, ref_err.mse),
        "fs_rmse_pct": fs(err.rmse, ref_err.rmse),
        "fs_mae_pct": fs(err.mae, ref_err.mae),
        "ramp_score": ramp,
        "ref_ramp_score": ref_ramp,
        "ramp_delta_pct": _delta_pct(ramp, ref_ramp),
        "q95_delta_pct": _delta_pct(err.q95_abs, ref_err.q95_abs),
        "tdi_pct": dist.tdi,
        "tdi_adv_pct": dist.tdi_adv,
        "tdi_late_pct": dist.tdi_late,
        "tdm": dist.tdm,
        "tdm_mean": dist.tdm_mean,
        "n_sequences": dist.n_sequences,
        "n_days": len(days),
    }


# --------------------------------------------------------------------------- I/O

def load_forecast_csv(path, cadence: int = 120) -> list[ForecastSeries]:
    """Read a forecast file: ``timestamp,forecast,horizon_min[,producer][,loss]``.

    One file may hold several producers and horizons; each combination becomes
    one :class:`ForecastSeries`. ``producer`` defaults to the file stem.
    """
    path = Path(path)
    groups: dict[tuple[str, str, int], list[tuple[int, float, int]]] = {}
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ForecastFileError(f"{path}: empty file") from None
        need = ("timestamp", "forecast", "horizon_min")
        if any(c not in header for c in need):
            raise ForecastFileError(f"{path}:1: header must contain {', '.join(need)}")
        pos = {c: header.index(c) for c in header}
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise ForecastFileError(f"{path}:{lineno}: expected {len(header)} fields")
            try:
                t = parse_timestamp(row[pos["timestamp"]])
                v = float(row[pos["forecast"]])
                h = int(row[pos["horizon_min"]])
            except ValueError as exc:
                raise ForecastFileError(f"{path}:{lineno}: {exc}") from None
            if not math.isfinite(v):
                raise ForecastFileError(f"{path}:{lineno}: forecast is not finite")
            if h <= 0:
                raise ForecastFileError(f"{path}:{lineno}: horizon_min must be positive")
            producer = row[pos["producer"]].strip() if "producer" in pos else path.stem
            loss = row[pos["loss"]].strip() if "loss" in pos else "-"
            groups.setdefault((producer or path.stem, loss or "-", h), []).append((t, v, lineno))
    out = []
    for (producer, loss, h), items in sorted(groups.items()):
        items.sort()
        for a, b in zip(items, items[1:]):
            if a[0] == b[0]:
                raise ForecastFileError(f"{path}:{b[2]}: duplicate timestamp for {producer}/{h} min")
        series = TimeSeries([i[0] for i in items], [i[1] for i in items], cadence)
        try:
            out.append(ForecastSeries(series, h * 60, producer=producer, loss=loss))
        except ValueError as exc:
            raise ForecastFileError(f"{path}: {exc}") from None
    return out


def write_forecast_csv(path, forecasts: list[ForecastSeries]) -> None:
    from .series import format_timestamp
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["timestamp", "forecast", "horizon_min", "producer", "loss"])
        for fc in forecasts:
            for t, v in zip(fc.timestamps.tolist(), fc.values.tolist()):
                w.writerow([format_timestamp(t), repr(v), fc.horizon // 60, fc.producer, fc.loss])


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _json_safe(obj):
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, np.generic):
        return _json_safe(obj.item())
    return obj


def dump_json(path, doc) -> None:
    Path(path).write_text(json.dumps(_json_safe(doc), indent=2, sort_keys=True) + "\n",
                          encoding="utf-8")


def _cell(name: str, value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        if not math.isfinite(value):
            return ""
        return f"{value:.1f}" if name in PCT_FIELDS else f"{value:.6g}"
    return str(value)


def write_report_csv(path, report: dict) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_FIELDS)
        for row in report["rows"]:
            full = {"schema_version": report["schema_version"], **row}
            w.writerow([_cell(c, full.get(c)) for c in CSV_FIELDS])


@dataclass
class Table:
    """Plain delimited table with a header, used for the plot-ready exports."""

    header: tuple[str, ...]
    rows: list = field(default_factory=list)

    def write(self, path) -> None:
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.header)
            w.writerows(self.rows)
