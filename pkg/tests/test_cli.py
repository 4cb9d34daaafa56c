import csv
import json
import math

import numpy as np
import pytest

from solareval.cli import main
from solareval.dataset import RecordTable, write_csv
from solareval.series import format_timestamp, parse_timestamp

from .conftest import multi_year_records


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


@pytest.fixture(scope="module")
def synth_day(tmp_path_factory):
    out = tmp_path_factory.mktemp("synth")
    assert main(["synth", "--out", str(out), "--start", "2019-07-26", "--end", "2019-07-28",
                 "--noise", "0.02", "--seed", "3", "--lag", "5"]) == 0
    return out


@pytest.fixture(scope="module")
def years_csv(tmp_path_factory):
    path = tmp_path_factory.mktemp("years") / "years.csv"
    write_csv(path, multi_year_records(days_per_year=3, noise_sigma=0.05))
    return path


def evaluate_args(synth_day, out, *extra):
    return ["evaluate", "--dataset", str(synth_day / "dataset.csv"),
            "--forecast", str(synth_day / "forecast_lag.csv"), "--horizon", "10",
            "--horizon", "20", "--sequences", "3", "--seed", "1", "--out", str(out), *extra]


@pytest.fixture(scope="module")
def report_dir(synth_day, tmp_path_factory):
    out = tmp_path_factory.mktemp("report")
    assert main(evaluate_args(synth_day, out)) == 0
    return out


def test_evaluate_rows_and_spm_zero(report_dir):
    report = json.loads((report_dir / "report.json").read_text())
    assert report["schema_version"] == 1
    assert len(report["metadata"]["dataset_sha256"]) == 64
    keys = [(r["producer"], r["horizon_min"]) for r in report["rows"]]
    assert keys == [("smart_persistence", 10), ("simple_persistence", 10), ("lag5", 10),
                    ("smart_persistence", 20), ("simple_persistence", 20)]
    for row in report["rows"]:
        if row["producer"] == "smart_persistence":
            assert row["fs_mse_pct"] == row["fs_rmse_pct"] == row["fs_mae_pct"] == 0
            assert row["ramp_delta_pct"] == 0
    csv_rows = read_rows(report_dir / "report.csv")
    assert csv_rows[0]["schema_version"] == "1" and csv_rows[0]["fs_rmse_pct"] == "0.0"


def test_percent_columns_recomputable(report_dir):
    report = json.loads((report_dir / "report.json").read_text())
    for row in report["rows"]:
        for metric in ("mse", "rmse", "mae"):
            expected = 100 * (1 - row[metric] / row[f"ref_{metric}"])
            assert abs(row[f"fs_{metric}_pct"] - expected) <= 1e-9
        assert abs(row["ramp_delta_pct"]
                   - 100 * (row["ramp_score"] - row["ref_ramp_score"]) / row["ref_ramp_score"]) <= 1e-9
        assert abs(row["q95_delta_pct"]
                   - 100 * (row["q95_abs"] - row["ref_q95_abs"]) / row["ref_q95_abs"]) <= 1e-9
        assert abs(row["tdi_adv_pct"] + row["tdi_late_pct"] - row["tdi_pct"]) <= 1e-9
    for row, line in zip(report["rows"], read_rows(report_dir / "report.csv")):
        assert line["fs_rmse_pct"] == f"{row['fs_rmse_pct']:.1f}"


def test_lag_forecast_row_on_cloudy_day(report_dir):
    report = json.loads((report_dir / "report.json").read_text())
    lag = next(r for r in report["rows"] if r["producer"] == "lag5")
    simple = next(r for r in report["rows"]
                  if r["producer"] == "simple_persistence" and r["horizon_min"] == 10)
    assert lag["tdm"] > 0.5 and lag["tdi_pct"] > 0
    assert lag["rmse"] == simple["rmse"]


def test_lag_forecast_row_on_ramp(tmp_path):
    t = parse_timestamp("2019-07-26T06:00:00Z") + 120 * np.arange(300)
    ghi = 100 + 0.01 * np.arange(300.0) ** 2
    write_csv(tmp_path / "ramp.csv", RecordTable.from_columns(
        t, ghi, sza_deg=np.full(300, 40.0), ghi_clr=np.full(300, 1000.0)))
    with open(tmp_path / "lag.csv", "w") as fh:
        fh.write("timestamp,forecast,horizon_min,producer\n")
        for k in range(5, 300):
            fh.write(f"{format_timestamp(t[k])},{float(ghi[k - 5])!r},10,lag5\n")
    assert main(["evaluate", "--dataset", str(tmp_path / "ramp.csv"), "--forecast",
                 str(tmp_path / "lag.csv"), "--sequences", "2", "--out", str(tmp_path)]) == 0
    rows = json.loads((tmp_path / "report.json").read_text())["rows"]
    lag = next(r for r in rows if r["producer"] == "lag5")
    assert lag["tdm"] == 1.0 and lag["tdi_pct"] > 0 and lag["n_sequences"] == 2


def test_evaluate_byte_identical(synth_day, report_dir, tmp_path):
    assert main(evaluate_args(synth_day, tmp_path)) == 0
    for name in ("report.json", "report.csv"):
        assert (tmp_path / name).read_bytes() == (report_dir / name).read_bytes()


def test_split_byte_identical(years_csv, tmp_path):
    outs = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        assert main(["split", "--dataset", str(years_csv), "--out", str(out), "--seed", "7",
                     "--train-count", "100", "--validation-count", "50",
                     "--test-count", "50", "--sequences", "3"]) == 0
        outs.append(out)
    names = sorted(p.name for p in outs[0].iterdir())
    assert names == ["sequences_test.csv", "sequences_train.csv", "sequences_validation.csv",
                     "split.json", "split_stats.csv", "split_test.csv", "split_train.csv",
                     "split_validation.csv"]
    for name in names:
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()
    assert len(read_rows(outs[0] / "split_train.csv")) == 100
    out = tmp_path / "other"
    main(["split", "--dataset", str(years_csv), "--out", str(out), "--seed", "8",
          "--train-count", "100", "--validation-count", "50", "--test-count", "50"])
    assert (out / "split_train.csv").read_bytes() != (outs[0] / "split_train.csv").read_bytes()


def test_split_shortfall_exit_code(years_csv, tmp_path, capsys):
    code = main(["split", "--dataset", str(years_csv), "--out", str(tmp_path)])
    assert code == 1
    assert "short by" in capsys.readouterr().err


def test_ramps_hand_trace(tmp_path):
    t = parse_timestamp("2019-07-26T10:00:00Z") + 60 * np.arange(5)
    n = t.size
    table = RecordTable.from_columns(t, np.array([0, 0, 5, 10, 10.0]), sza_deg=np.full(n, 30.0),
                                     saa_deg=np.full(n, 180.0), ghi_clr=np.full(n, 20.0))
    write_csv(tmp_path / "walk.csv", table)
    assert main(["ramps", "--dataset", str(tmp_path / "walk.csv"), "--out", str(tmp_path),
                 "--cadence", "60", "--epsilon-tau", "0.05", "--observed-only"]) == 0
    rows = read_rows(tmp_path / "segments.csv")
    got = [(int(r["start_index"]), int(r["end_index"]), float(r["slope"])) for r in rows]
    assert got == [(0, 1, 0.0), (1, 3, 5.0), (3, 4, 0.0)]
    assert {float(r["epsilon"]) for r in rows} == {1.0}


def test_ramps_scores(synth_day, tmp_path):
    assert main(["ramps", "--dataset", str(synth_day / "dataset.csv"), "--out", str(tmp_path),
                 "--horizon", "10"]) == 0
    doc = json.loads((tmp_path / "ramps.json").read_text())
    (row,) = doc["rows"]
    assert row["producer"] == "smart_persistence" and row["n_days"] == 2
    assert row["ramp_score"] > 0
    series = {r["series"] for r in read_rows(tmp_path / "segments.csv")}
    assert series == {"test", "reference"}


def test_distortion_outputs(synth_day, tmp_path):
    assert main(["distortion", "--dataset", str(synth_day / "dataset.csv"),
                 "--forecast", str(synth_day / "forecast_lag.csv"), "--horizon", "10",
                 "--sequences", "4", "--out", str(tmp_path)]) == 0
    doc = json.loads((tmp_path / "distortion.json").read_text())
    (row,) = doc["rows"]
    assert row["producer"] == "lag5" and row["n_sequences"] == 4 and row["tdm"] > 0.5
    seqs = read_rows(tmp_path / "sequences.csv")
    assert len(seqs) == 4
    paths = read_rows(tmp_path / "warp_paths.csv")
    first = [(int(p["i"]), int(p["j"])) for p in paths if p["sequence"] == "0"]
    assert first[0] == (0, 0) and first[-1] == (99, 99)


def test_train_defaults_and_outputs(years_csv, tmp_path):
    assert main(["train", "--dataset", str(years_csv), "--out", str(tmp_path), "--epochs", "2",
                 "--fractions", "0.5,1.0"]) == 0
    model = json.loads((tmp_path / "model.json").read_text())
    assert model["config"]["learning_rate"] == 1e-4
    assert model["config"]["batch_size"] == 10
    assert model["config"]["weight_decay"] == 1e-5
    assert model["config"]["loss"] == "L2"
    assert len(read_rows(tmp_path / "history.csv")) == 3
    assert len(read_rows(tmp_path / "learning_curve.csv")) == 2
    metrics = json.loads((tmp_path / "metrics.json").read_text())
    assert len(metrics["features"]) == 35
    assert math.isfinite(metrics["fs_rmse_pct"])
    assert read_rows(tmp_path / "forecast.csv")[0]["horizon_min"] == "10"


def test_config_file(synth_day, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"horizon": [20], "sequences": 2, "tau-cls": 0.1}))
    out = tmp_path / "out"
    assert main(["evaluate", "--dataset", str(synth_day / "dataset.csv"), "--config", str(cfg),
                 "--out", str(out)]) == 0
    report = json.loads((out / "report.json").read_text())
    assert {r["horizon_min"] for r in report["rows"]} == {20}
    assert report["metadata"]["settings"]["tau_cls"] == 0.1
    out2 = tmp_path / "out2"
    assert main(["evaluate", "--dataset", str(synth_day / "dataset.csv"), "--config", str(cfg),
                 "--tau-cls", "0.05", "--out", str(out2)]) == 0
    assert json.loads((out2 / "report.json").read_text())["metadata"]["settings"]["tau_cls"] == 0.05


def test_bad_dataset_diagnostics(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("timestamp,ghi\n2019-07-26T10:00:00Z,100\n2019-07-26T10:02:00Z,oops\n")
    assert main(["evaluate", "--dataset", str(bad), "--out", str(tmp_path / "o")]) == 1
    assert f"{bad}:3" in capsys.readouterr().err


def test_bad_forecast_horizon(synth_day, tmp_path, capsys):
    bad = tmp_path / "fc.csv"
    bad.write_text("timestamp,forecast,horizon_min\n2019-07-26T10:00:00Z,100,3\n")
    assert main(["evaluate", "--dataset", str(synth_day / "dataset.csv"), "--forecast", str(bad),
                 "--out", str(tmp_path / "o")]) == 1
    assert "error:" in capsys.readouterr().err
