"""Command-line interface.

Subcommands: ``evaluate``, ``ramps``, ``distortion``, ``train``, ``synth`` and
``split``. Every subcommand writes into the ``--out`` directory. Any flag may
also be given in a JSON file passed with ``--config`` (keys are the flag
names with dashes replaced by underscores); explicit flags win.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from datetime import date, datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .dataset import (ROLES, DatasetError, RecordTable, SplitSpec, build_sequences,
                      load_csv, qc_filter, select_samples, split_stats, write_csv,
                      write_split_stats)
from .distortion import sequence_path, summarize, tdi_tdm
from .learner import (FEATURE_NAMES, TrainConfig, build_tabular, learning_curve, predict,
                      rmse, save_checkpoint, train, window_complete)
from .metrics import forecast_skill
from .ramps import daily_ramp_scores, weighted_ramp_score
from .report import (SCHEMA_VERSION, EvalSettings, Table, build_context, dump_json, evaluate,
                     load_forecast_csv, sha256_file, write_forecast_csv, write_report_csv)
from .series import AlignedPair, ForecastSeries, TimeSeries, format_timestamp
from .solar import SIRTA_LAT, SIRTA_LON, smart_persistence
from .synth import CloudEvent, ScenarioSpec, gen_scenario, lag_forecast, periodic_events

log = logging.getLogger("solareval")

DEFAULT_COUNTS = {"train": 35000, "validation": 10000, "test": 10000}


class CliError(Exception):
    pass


# --------------------------------------------------------------------------- helpers

def _day_epoch(text: str) -> int:
    d = date.fromisoformat(text)
    return int(datetime(d.year, d.month, d.day, tzinfo=timezone.utc).timestamp())


def _parse_roles(text: str) -> dict[int, str]:
    roles = {}
    for item in text.split(","):
        year, _, role = item.partition(":")
        if role not in ROLES:
            raise CliError(f"bad role mapping {item!r}; expected YEAR:{'|'.join(ROLES)}")
        roles[int(year)] = role
    return roles


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _settings(args) -> EvalSettings:
    return EvalSettings(
        horizons_min=tuple(args.horizon or [10]),
        tau_cls=args.tau_cls,
        gamma=args.gamma,
        sza_max=args.sza_max,
        seed=args.seed,
        sequence_count=args.sequences,
        cadence=args.cadence,
        lat_deg=args.lat,
        lon_deg=args.lon,
        epsilon=getattr(args, "epsilon", None),
    )


def _load_forecasts(args) -> list[ForecastSeries]:
    out = []
    for path in args.forecast or []:
        out.extend(load_forecast_csv(path, args.cadence))
    return out


def _hashes(args) -> dict:
    return {"dataset_sha256": sha256_file(args.dataset),
            "forecast_sha256": {Path(p).name: sha256_file(p) for p in args.forecast or []}}


# --------------------------------------------------------------------------- commands

def cmd_evaluate(args) -> int:
    records = load_csv(args.dataset)
    report = evaluate(records, _load_forecasts(args), _settings(args))
    report["metadata"].update(_hashes(args))
    report["metadata"]["seed"] = args.seed
    out = _out_dir(args)
    dump_json(out / "report.json", report)
    write_report_csv(out / "report.csv", report)
    for row in report["rows"]:
        log.info("%-22s %-3s %3d min  FS_RMSE %6.1f%%  ramp %.2f  TDI %.1f%%  TDM %.2f",
                 row["producer"], row["loss"], row["horizon_min"], row["fs_rmse_pct"],
                 row["ramp_score"], row["tdi_pct"], row["tdm"])
    return 0


def _rows_for(args, records):
    """(label, ForecastSeries) pairs: supplied forecasts, or smart persistence."""
    settings = _settings(args)
    ctx = build_context(records, settings)
    forecasts = _load_forecasts(args)
    wanted = {h * 60 for h in settings.horizons_min}
    chosen = [f for f in forecasts if f.horizon in wanted]
    if not forecasts:
        chosen = [smart_persistence(ctx.reference, None, h, clearsky=ctx.clearsky)
                  for h in sorted(wanted)]
    return settings, ctx, chosen


def cmd_ramps(args) -> int:
    records = load_csv(args.dataset)
    settings, ctx, chosen = _rows_for(args, records)
    ts = ctx.reference.timestamps
    seg_table = Table(("schema_version", "series", "producer", "loss", "horizon_min", "day",
                       "epsilon", "t_start", "t_end", "slope", "start_index", "end_index"))
    summary = []

    def emit(series, producer, loss, h, days, which):
        for d in days:
            for s in getattr(d, which):
                seg_table.rows.append([SCHEMA_VERSION, series, producer, loss, h,
                                       format_timestamp(d.day * 86400)[:10], repr(d.epsilon),
                                       format_timestamp(s.t_start), format_timestamp(s.t_end),
                                       repr(s.slope), s.start_index, s.end_index])

    if args.observed_only:
        days = daily_ramp_scores(ts, ctx.reference.values, ctx.reference.values, ts,
                                 ctx.clearsky, settings.tau_cls, settings.epsilon)
        emit("reference", "observed", "-", 0, days, "ref_segments")
    else:
        for fc in chosen:
            keep = np.isin(ts, fc.timestamps) & (ctx.sza < settings.sza_max)
            common = ts[keep]
            pred = fc.values[np.searchsorted(fc.timestamps, common)]
            days = daily_ramp_scores(common, pred, ctx.reference.values[keep], ts, ctx.clearsky,
                                     settings.tau_cls, settings.epsilon)
            h = fc.horizon // 60
            emit("reference", fc.producer, fc.loss, h, days, "ref_segments")
            emit("test", fc.producer, fc.loss, h, days, "test_segments")
            summary.append({"producer": fc.producer, "loss": fc.loss, "horizon_min": h,
                            "ramp_score": weighted_ramp_score(days), "n_days": len(days),
                            "days": [{"day": format_timestamp(d.day * 86400)[:10],
                                      "epsilon": d.epsilon, "score": d.score} for d in days]})
    out = _out_dir(args)
    seg_table.write(out / "segments.csv")
    dump_json(out / "ramps.json", {"schema_version": SCHEMA_VERSION, "tau_cls": settings.tau_cls,
                                   "epsilon": settings.epsilon, "rows": summary})
    return 0


def cmd_distortion(args) -> int:
    records = load_csv(args.dataset)
    settings, ctx, chosen = _rows_for(args, records)
    ts = ctx.reference.timestamps
    covered = np.ones(ts.size, bool)
    for fc in chosen:
        covered &= np.isin(ts, fc.timestamps)
    spec = SplitSpec({}, {}, sza_max_deg=settings.sza_max, rng_seed=settings.seed,
                     cadence=settings.cadence, sequence_count=settings.sequence_count)
    seqs = build_sequences(records, spec, mask=covered)
    path_table = Table(("schema_version", "producer", "loss", "horizon_min", "sequence", "i", "j"))
    seq_table = Table(("schema_version", "producer", "loss", "horizon_min", "sequence",
                       "t_start", "t_end", "tdi_pct", "tdi_adv_pct", "tdi_late_pct", "tdm"))
    rows = []
    for fc in chosen:
        h = fc.horizon // 60
        reports = []
        for k, window in enumerate(seqs.windows):
            wts = ts[window]
            pair = AlignedPair(wts, fc.values[np.searchsorted(fc.timestamps, wts)],
                               ctx.reference.values[window])
            path = sequence_path(pair)
            rep = tdi_tdm(path)
            reports.append(rep)
            seq_table.rows.append([SCHEMA_VERSION, fc.producer, fc.loss, h, k,
                                   format_timestamp(wts[0]), format_timestamp(wts[-1]),
                                   repr(rep.tdi), repr(rep.tdi_adv), repr(rep.tdi_late), repr(rep.tdm)])
            path_table.rows.extend([SCHEMA_VERSION, fc.producer, fc.loss, h, k, i, j]
                                   for i, j in path.steps.tolist())
        rows.append({"producer": fc.producer, "loss": fc.loss, "horizon_min": h,
                     **summarize(reports).as_dict()})
    out = _out_dir(args)
    path_table.write(out / "warp_paths.csv")
    seq_table.write(out / "sequences.csv")
    dump_json(out / "distortion.json", {"schema_version": SCHEMA_VERSION, "rows": rows})
    return 0


def _split_spec(args, counts) -> SplitSpec:
    return SplitSpec(role_by_year=_parse_roles(args.roles), sample_counts=counts,
                     min_spacing=args.min_spacing * 60, sza_max_deg=args.sza_max,
                     rng_seed=args.seed, cadence=args.cadence, gamma=args.gamma,
                     sequence_count=args.sequences)


def _counts(args, default):
    return {role: (getattr(args, f"{role}_count") if getattr(args, f"{role}_count") is not None
                   else default.get(role)) for role in ROLES}


def cmd_split(args) -> int:
    records = load_csv(args.dataset)
    spec = _split_spec(args, _counts(args, DEFAULT_COUNTS))
    flags = qc_filter(records, spec.gamma)
    picks = select_samples(records, spec, flags)
    out = _out_dir(args)
    stats = {}
    for role, idx in picks.items():
        Table(("timestamp",), [[format_timestamp(t)] for t in records.timestamp[idx].tolist()]
              ).write(out / f"split_{role}.csv")
        stats[role] = split_stats(records, idx, spec.sza_max_deg)
    write_split_stats(out / "split_stats.csv", stats)
    summary = {"schema_version": SCHEMA_VERSION, "seed": args.seed,
               "dataset_sha256": sha256_file(args.dataset), "qc_flagged": int(flags.sum()),
               "counts": {r: int(i.size) for r, i in picks.items()}, "sequences": {}}
    if args.sequences:
        for role in picks:
            seqs = build_sequences(records, spec, role=role)
            Table(("sequence", "t_start", "t_end"),
                  [[k, format_timestamp(records.timestamp[s]),
                    format_timestamp(records.timestamp[s + seqs.length - 1])]
                   for k, s in enumerate(seqs.starts.tolist())]
                  ).write(out / f"sequences_{role}.csv")
            summary["sequences"][role] = seqs.count
    dump_json(out / "split.json", summary)
    return 0


def cmd_train(args) -> int:
    records = load_csv(args.dataset)
    horizon = args.horizon[0] * 60 if args.horizon else 600
    spec = _split_spec(args, _counts(args, {}))
    picks = select_samples(records, spec, require=window_complete(records, horizon))
    for role in ROLES:
        if picks.get(role) is None or picks[role].size == 0:
            raise CliError(f"no {role} samples; check --roles against the dataset years")
    sets = {role: build_tabular(records, picks[role], horizon) for role in ROLES}
    config = TrainConfig(loss=args.loss, weight_decay=args.weight_decay,
                         learning_rate=args.lr, batch_size=args.batch, epochs=args.epochs,
                         seed=args.seed, horizon=horizon, architecture=args.arch,
                         hidden=args.hidden)
    params, history = train(sets["train"], sets["validation"], config)
    out = _out_dir(args)
    save_checkpoint(out / "model.json", params, config)
    Table(("epoch", "train_loss", "val_loss", "best_val_loss"),
          [[h.epoch, repr(h.train_loss), repr(h.val_loss), repr(h.best_val_loss)] for h in history]
          ).write(out / "history.csv")

    test = sets["test"]
    pred = predict(params, test.X)
    model_rmse, spm_rmse = rmse(pred, test.y), rmse(test.spm, test.y)
    fc = ForecastSeries(TimeSeries(test.timestamps, pred, args.cadence), horizon,
                        producer=f"tabular_{args.arch}", loss=args.loss)
    write_forecast_csv(out / "forecast.csv", [fc])
    metrics = {"schema_version": SCHEMA_VERSION, "n": {r: len(s) for r, s in sets.items()},
               "features": list(FEATURE_NAMES), "test_rmse": model_rmse,
               "test_rmse_spm": spm_rmse,
               "fs_rmse_pct": 100.0 * forecast_skill(model_rmse, spm_rmse)}
    if args.fractions:
        curve = learning_curve(sets["train"], sets["validation"], test, config, args.fractions)
        Table(("fraction", "n_train", "rmse", "rmse_spm", "fs_rmse_pct"),
              [[c["fraction"], c["n_train"], repr(c["rmse"]), repr(c["rmse_spm"]),
                f"{100 * c['fs_rmse']:.1f}"] for c in curve]).write(out / "learning_curve.csv")
        metrics["learning_curve"] = curve
    dump_json(out / "metrics.json", metrics)
    log.info("test RMSE %.2f W/m2 vs SPM %.2f -> FS %.1f%%", model_rmse, spm_rmse,
             metrics["fs_rmse_pct"])
    return 0


def cmd_synth(args) -> int:
    periods = args.period or [f"{args.start}:{args.end}"]
    tables, forecasts = [], []
    for k, item in enumerate(periods):
        a, _, b = item.partition(":")
        start, end = _day_epoch(a), _day_epoch(b)
        events = ()
        if args.cloud_period:
            events = periodic_events(start + args.cloud_offset * 60, end, args.cloud_period * 60,
                                     args.cloud_duration * 60, args.attenuation,
                                     args.cloud_edge * 60)
        drift = tuple(args.drift) if args.drift else None
        spec = ScenarioSpec(start=start, end=end, lat_deg=args.lat, lon_deg=args.lon,
                            cadence=args.cadence, events=events, noise_sigma=args.noise,
                            seed=args.seed + k, kc_drift=drift)
        sc = gen_scenario(spec)
        long_, short = sc.frame_means()
        ghi = np.round(sc.ghi, 6)
        tables.append(RecordTable(sc.timestamps, ghi, np.round(sc.sza_deg, 6),
                                  np.round(sc.saa_deg, 6), np.round(sc.ghi_clr, 6), long_, short))
        if args.lag:
            # lag the values as written, so the forecast replays the file exactly
            forecasts.append(lag_forecast(TimeSeries(sc.timestamps, ghi, args.cadence), args.lag))
    table = RecordTable(**{c: np.concatenate([getattr(t, c) for t in tables])
                           for c in ("timestamp", "ghi", "sza_deg", "saa_deg", "ghi_clr",
                                     "frame_mean_long", "frame_mean_short")})
    out = _out_dir(args)
    write_csv(out / "dataset.csv", table)
    if forecasts:
        merged = ForecastSeries(
            TimeSeries(np.concatenate([f.timestamps for f in forecasts]),
                       np.concatenate([f.values for f in forecasts]), args.cadence),
            forecasts[0].horizon, producer=f"lag{args.lag}")
        write_forecast_csv(out / "forecast_lag.csv", [merged])
    log.info("wrote %d records to %s", len(table), out / "dataset.csv")
    return 0


# --------------------------------------------------------------------------- parser

def _common(p: argparse.ArgumentParser, dataset=True):
    if dataset:
        p.add_argument("--dataset", required=True, help="dataset CSV")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--cadence", type=int, default=120, help="nominal step in seconds")
    p.add_argument("--sza-max", type=float, default=80.0)
    p.add_argument("--gamma", type=float, default=0.1, help="QC jump threshold")
    p.add_argument("--lat", type=float, default=SIRTA_LAT)
    p.add_argument("--lon", type=float, default=SIRTA_LON)
    p.add_argument("--config", help="JSON file with default values for these flags")


def _eval_flags(p):
    p.add_argument("--forecast", action="append", help="forecast CSV (repeatable)")
    p.add_argument("--horizon", type=int, action="append", help="minutes (repeatable)")
    p.add_argument("--tau-cls", "--epsilon-tau", dest="tau_cls", type=float, default=0.05)
    p.add_argument("--sequences", type=int, default=100, help="number of TDI sequences")


def _split_flags(p):
    p.add_argument("--roles", default="2017:train,2018:validation,2019:test")
    p.add_argument("--min-spacing", type=int, default=4, help="minutes between samples")
    for role in ROLES:
        p.add_argument(f"--{role}-count", type=int, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="solareval", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("evaluate", help="benchmark report: skill, ramps, q95, TDI/TDM")
    _common(p)
    _eval_flags(p)
    p.add_argument("--epsilon", type=float, default=None, help="fixed door width, W/m2")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("ramps", help="swinging-door segments and ramp scores")
    _common(p)
    _eval_flags(p)
    p.add_argument("--epsilon", type=float, default=None, help="fixed door width, W/m2")
    p.add_argument("--observed-only", action="store_true",
                   help="segment the observed series only")
    p.set_defaults(func=cmd_ramps)

    p = sub.add_parser("distortion", help="DTW warp paths and TDI/TDM")
    _common(p)
    _eval_flags(p)
    p.set_defaults(func=cmd_distortion)

    p = sub.add_parser("split", help="train/validation/test sample selection")
    _common(p)
    _split_flags(p)
    p.add_argument("--sequences", type=int, default=0, help="TDM sequences per role (0: none)")
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("train", help="train the tabular baseline forecaster")
    _common(p)
    _split_flags(p)
    p.add_argument("--horizon", type=int, action="append", help="minutes")
    p.add_argument("--loss", choices=("L1", "L2"), default="L2")
    p.add_argument("--lr", type=float, default=1e-4)
    p.add_argument("--weight-decay", type=float, default=1e-5)
    p.add_argument("--batch", type=int, default=10)
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--arch", choices=("linear", "mlp"), default="linear")
    p.add_argument("--hidden", type=int, default=32)
    p.add_argument("--fractions", type=lambda s: [float(x) for x in s.split(",")],
                   help="comma-separated training fractions for a learning curve")
    p.set_defaults(func=cmd_train, sequences=0)

    p = sub.add_parser("synth", help="write a synthetic dataset CSV")
    _common(p, dataset=False)
    p.add_argument("--start", default="2019-07-26")
    p.add_argument("--end", default="2019-07-27", help="exclusive")
    p.add_argument("--period", action="append", help="START:END dates (repeatable)")
    p.add_argument("--cloud-period", type=int, default=40, help="minutes; 0 for clear sky")
    p.add_argument("--cloud-duration", type=int, default=20, help="minutes")
    p.add_argument("--cloud-offset", type=int, default=0, help="minutes after midnight")
    p.add_argument("--cloud-edge", type=int, default=4, help="minutes")
    p.add_argument("--attenuation", type=float, default=0.3)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--drift", type=float, nargs=3, metavar=("MEAN", "AMP", "PERIOD_S"))
    p.add_argument("--lag", type=int, default=0, help="also write a lag-k forecast file")
    p.set_defaults(func=cmd_synth)
    return parser


def parse_args(argv=None) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "config", None):
        cfg = json.loads(Path(args.config).read_text(encoding="utf-8"))
        sub = parser._subparsers._group_actions[0].choices[args.command]
        sub.set_defaults(**{k.replace("-", "_"): v for k, v in cfg.items()})
        args = parser.parse_args(argv)
    return args


def main(argv=None) -> int:
    args = parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (CliError, DatasetError, ValueError, LookupError, OSError,
            FloatingPointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
