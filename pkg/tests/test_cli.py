import csv
import json

import pytest
from hypothesis import given, settings, strategies as st

from kpplab.cli import ConfigError, RunConfig, RunRecord, main, run_scenario, sweep

from conftest import well_mu

TALL = {"potential": {"kind": "square_well", "height": 3.0, "half_width": 1.0}}
WELL_125 = {"potential": {"kind": "square_well", "lambda": 1.25, "half_width": 1.0}}


def _cfg(scenario, **kw):
    return RunConfig.from_dict({"scenario": scenario, **kw})


@pytest.mark.parametrize("raw,path", [
    ({"scenario": "eigen", "profile": {"potential": {"heigth": 3}}}, "config.profile.potential.heigth"),
    ({"scenario": "eigen", "profile": TALL, "extra": 1}, "config.extra"),
    ({"scenario": "eigen", "profile": TALL, "params": {"tol": "small"}}, "config.params.tol"),
    ({"scenario": "simulate", "profile": TALL}, "config.grid"),
    ({"scenario": "simulate", "profile": TALL, "grid": {"x_min": 0, "x_max": 1, "dx": -1},
      "time": {"t_end": 1}}, "config.grid.dx"),
    ({"scenario": "front", "profile": TALL}, "config.params.c"),
    ({"scenario": "nope"}, "config.scenario"),
])
def test_config_errors_name_the_field(raw, path):
    with pytest.raises(ConfigError, match=path.replace(".", r"\.")):
        RunConfig.from_dict(raw)


def test_eigen_record(tmp_path):
    rec = run_scenario(_cfg("eigen", profile=TALL), tmp_path)
    assert rec.passed
    assert rec.results["lambda"] > 2.0
    assert rec.results["lambda"] == pytest.approx(1 + well_mu(3.0), abs=1e-7)
    assert rec.results["lambda_trace"]
    assert (tmp_path / "psi.csv").exists() and (tmp_path / "lambda_trace.csv").exists()


def test_front_outside_window_fails_before_compute(tmp_path):
    cfg = _cfg("front", profile=WELL_125, params={"c": 2.6})
    with pytest.raises(ConfigError, match="speed window"):
        run_scenario(cfg, tmp_path)
    assert not (tmp_path / "record.json").exists()


def test_record_roundtrip(tmp_path):
    rec = run_scenario(_cfg("eigen", profile=TALL), tmp_path)
    back = RunRecord.from_json((tmp_path / "record.json").read_text())
    assert back.to_dict() == rec.to_dict()
    assert back.passed == rec.passed


@settings(max_examples=50, deadline=None)
@given(results=st.dictionaries(st.text(min_size=1, max_size=8),
                               st.one_of(st.floats(allow_nan=False), st.integers(), st.text(),
                                         st.lists(st.floats(allow_nan=False), max_size=4))),
       checks=st.dictionaries(st.text(min_size=1, max_size=8), st.booleans()))
def test_record_roundtrip_property(results, checks):
    rec = RunRecord("eigen", {"seed": 0}, {"kpplab": "x"}, 1.5, results, checks)
    back = RunRecord.from_json(rec.to_json())
    assert back.to_dict() == rec.to_dict()


SIM = {"profile": {"potential": {"kind": "square_well", "height": 1.0, "half_width": 1.0},
                   "nonlinearity": {"kind": "logistic"}},
       "grid": {"x_min": -30, "x_max": 60, "dx": 0.1},
       "time": {"t_end": 8, "snapshot_stride": 2, "sample_interval": 0.25},
       "params": {"initial": {"kind": "step", "hi": -5}}}


def test_simulate_is_bit_deterministic(tmp_path):
    outs = []
    for i in range(2):
        d = tmp_path / str(i)
        rec = run_scenario(_cfg("simulate", **SIM), d)
        assert rec.passed
        outs.append([(d / f).read_bytes() for f in ("trace.csv", "final.csv", "snapshots.csv")])
    assert outs[0] == outs[1]


def test_csv_has_header_and_full_precision(tmp_path):
    run_scenario(_cfg("simulate", **SIM), tmp_path)
    with open(tmp_path / "final.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["x", "u"]
    vals = [r[1] for r in rows[1:] if "e" not in r[1] and r[1] not in ("0", "1")]
    assert any(len(v.replace("-", "").replace(".", "").lstrip("0")) >= 16 for v in vals)


def test_analyze_reads_simulate_output(tmp_path):
    run_scenario(_cfg("simulate", **SIM), tmp_path / "sim")
    cfg = _cfg("analyze", params={"trace": str(tmp_path / "sim" / "trace.csv"),
                                  "snapshots": str(tmp_path / "sim" / "snapshots.csv")})
    rec = run_scenario(cfg, tmp_path / "an")
    assert rec.error is None
    diag = json.loads((tmp_path / "an" / "diagnostics.json").read_text())
    assert 1.0 < diag["c_hat"] < 2.5


def test_sweep_rows_match_grid(tmp_path):
    grid = {"height": [1.0, 1.5, 2.5], "half_width": [0.5, 1.0]}
    cfg = _cfg("sweep", profile={"potential": {"kind": "square_well"}}, params={"grid": grid})
    records, rows = sweep(cfg, tmp_path, workers=2)
    assert len(rows) == len(records) == 6
    with open(tmp_path / "summary.csv") as fh:
        assert len(list(csv.reader(fh))) == 7
    assert len(list((tmp_path / "records").glob("*.json"))) == 6


def test_sweep_threshold_flip(tmp_path):
    hs = [1.70, 1.72, 1.74, 1.7402, 1.76, 1.78]
    cfg = _cfg("sweep", profile={"potential": {"kind": "square_well"}}, params={"grid": {"height": hs}})
    _, rows = sweep(cfg, tmp_path, workers=1)
    labels = [r["classification"] for r in rows]
    assert labels == ["front-exists"] * 3 + ["growth-dominated"] * 3


def test_sweep_speed_classes(tmp_path):
    cfg = _cfg("sweep", profile=WELL_125, params={"grid": {"c": [1.9, 2.1, 2.45, 2.6]}})
    _, rows = sweep(cfg, tmp_path, workers=1)
    assert [r["classification"] for r in rows] == [
        "rejected-by-threshold", "front-exists", "front-exists", "rejected-by-threshold"]


def test_empty_sweep(tmp_path):
    cfg = _cfg("sweep", profile={"potential": {"kind": "square_well"}}, params={"grid": {}})
    rec = run_scenario(cfg, tmp_path)
    assert rec.passed
    with open(tmp_path / "summary.csv") as fh:
        assert len(list(csv.reader(fh))) == 1


def test_duplicate_sweep_entries_identical(tmp_path):
    cfg = _cfg("sweep", profile={"potential": {"kind": "square_well"}},
               params={"grid": {"height": [2.0, 2.0]}})
    records, _ = sweep(cfg, tmp_path, workers=2)
    a, b = (r.to_dict() for r in records)
    a.pop("wall_time"), b.pop("wall_time")
    assert a == b


def test_sweep_entry_failure_is_recorded(tmp_path):
    cfg = _cfg("sweep", profile={"potential": {"kind": "square_well"}},
               params={"grid": {"height": [1.0, -5.0]}})
    _, rows = sweep(cfg, tmp_path, workers=1)
    assert rows[0]["classification"] != "error"
    assert rows[1]["classification"] == "error" and rows[1]["error"]


def test_main_exit_codes(tmp_path, capsys):
    good = tmp_path / "good.json"
    good.write_text(json.dumps({"profile": TALL}))
    assert main(["eigen", "--config", str(good), "--out", str(tmp_path / "o"), "--quiet"]) == 0
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"profile": TALL, "typo": 1}))
    assert main(["eigen", "--config", str(bad), "--out", str(tmp_path / "b")]) == 2
    assert "config.typo" in capsys.readouterr().err
