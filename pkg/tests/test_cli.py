import csv
import io
import json

import numpy as np
import pytest

from qadkit import cli, registry
from qadkit.errors import DegenerateError


def run(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def _gen(tmp_path, name="d.json", **kw):
    path = tmp_path / name
    args = ["generate", "--out", path]
    for k, v in kw.items():
        args += [f"--{k.replace('_', '-')}", v]
    assert cli.main([str(a) for a in args]) == 0
    return path


def test_generate_byte_identical(tmp_path):
    a = _gen(tmp_path, "a.json", M=4, d=4, seed=3, holdout=2)
    b = _gen(tmp_path, "b.json", M=4, d=4, seed=3, holdout=2)
    assert a.read_bytes() == b.read_bytes()


def test_generate_delta_zero_identical(tmp_path):
    ts = registry.load(_gen(tmp_path, delta=0, anomaly="none"))
    v = ts.training_vectors()
    assert np.allclose(v, v[0])


def test_generate_large_round_trip(tmp_path):
    path = _gen(tmp_path, M=8, d=16, seed=1)
    ts = registry.load(path)
    assert (ts.M, ts.dim) == (8, 16)
    assert registry.dumps(ts) == path.read_text()


def test_generate_uses_env_seed(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.SEED_ENV, "17")
    a = _gen(tmp_path, "a.json")
    monkeypatch.delenv(cli.SEED_ENV)
    b = _gen(tmp_path, "b.json", seed=17)
    assert a.read_bytes() == b.read_bytes()


def test_generate_invalid_spec(tmp_path, capsys):
    code, _, err = run(capsys, "generate", "--M", 1, "--out", tmp_path / "x.json")
    assert code == 2
    doc = json.loads(err)
    assert {"module", "operation", "precondition"} <= set(doc)


def test_score_kpca_identical_set(tmp_path, capsys):
    data = _gen(tmp_path, delta=0, anomaly="none")
    code, out, _ = run(capsys, "score", "--dataset", data, "--detector", "kpca")
    assert code == 0
    recs = json.loads(out)
    assert recs[0]["f"] == 0.0 and recs[0]["state_id"] == "test"


def test_score_ocsvm_both_routes(tmp_path, capsys):
    data = _gen(tmp_path, seed=2, anomaly="rotation", anomaly_param=0.5)
    csv_path = tmp_path / "s.csv"
    code, out, _ = run(capsys, "score", "--dataset", data, "--detector", "ocsvm", "--route",
                       "all", "--csv", csv_path)
    assert code == 0
    recs = json.loads(out)
    assert [r["route"] for r in recs] == ["direct", "overlap-circuit"]
    assert recs[0]["f"] == pytest.approx(recs[1]["f"], abs=1e-10)
    rows = list(csv.reader(io.StringIO(csv_path.read_text())))
    assert tuple(rows[0]) == cli.CSV_COLUMNS
    assert len(rows) == 3


def test_score_shots_deterministic(tmp_path):
    data = _gen(tmp_path, holdout=1)
    outs = []
    for name in ("a.json", "b.json"):
        args = ["score", "--dataset", data, "--detector", "kpca", "--route", "all",
                "--mode", "shots", "--shots", 200, "--seed", 4, "--out", tmp_path / name]
        assert cli.main([str(a) for a in args]) == 0
        outs.append((tmp_path / name).read_bytes())
    assert outs[0] == outs[1]


def test_score_config_file_and_override(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"dataset_spec": {"M": 3, "d": 4, "holdout": 1},
                               "detector": "ocsvm", "route": "direct"}))
    code, out, _ = run(capsys, "score", "--config", cfg, "--detector", "kpca", "--route", "auto")
    assert code == 0
    recs = json.loads(out)
    assert {r["detector"] for r in recs} == {"kpca"}
    assert [r["state_id"] for r in recs] == ["test", "holdout-0"]


def test_score_timing_only_on_request(tmp_path, capsys):
    data = _gen(tmp_path)
    _, out, _ = run(capsys, "score", "--dataset", data)
    assert json.loads(out)[0]["timing"] is None
    _, out, _ = run(capsys, "score", "--dataset", data, "--timing")
    assert json.loads(out)[0]["timing"] >= 0


def test_unknown_config_field(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"detector": "kpca", "colour": "blue"}))
    code, _, err = run(capsys, "score", "--config", cfg)
    assert code == 2
    assert "colour" in json.loads(err)["precondition"]


def test_bad_route_is_config_error(tmp_path, capsys):
    data = _gen(tmp_path)
    code, _, err = run(capsys, "score", "--dataset", data, "--detector", "ocsvm", "--route",
                       "global")
    assert code == 2
    assert json.loads(err)["module"] == "cli"


def test_numerical_error_exit_code(tmp_path, capsys, monkeypatch):
    def boom(cfg):
        raise DegenerateError("centroid undefined", module="stateprep",
                              operation="prepare_centroid", precondition="sum psi nonzero")
    monkeypatch.setattr(cli, "cmd_score", boom)
    code, _, err = run(capsys, "score", "--dataset", _gen(tmp_path))
    assert code == 3
    doc = json.loads(err)
    assert doc["module"] == "stateprep" and doc["precondition"] == "sum psi nonzero"


def test_missing_dataset_file(tmp_path, capsys):
    code, _, err = run(capsys, "score", "--dataset", tmp_path / "nope.json")
    assert code == 2
    assert json.loads(err)["operation"] == "load"


def test_score_record_round_trip():
    rec = cli.ScoreRecord("test", "kpca", "global", "shots", 0.125, 0.01, 400,
                          {"p_chi": 0.75}, ["fallback"], None)
    text = json.dumps(rec.to_dict())
    assert cli.ScoreRecord.from_dict(json.loads(text)) == rec


def test_validate_scope_filter(capsys):
    code, out, _ = run(capsys, "validate", "--scope", "hamsim")
    assert code == 0
    lines = [l for l in out.splitlines() if l.startswith(("PASS", "FAIL"))]
    assert len(lines) == 1 and " C6 " in lines[0]


def test_validate_injected_perturbation(capsys, tmp_path):
    report = tmp_path / "r.json"
    code, out, _ = run(capsys, "validate", "--scope", "hamsim", "--inject", "C6",
                       "--out", report)
    assert code == 1
    assert out.startswith("FAIL C6")
    assert json.loads(report.read_text())[0]["passed"] is False


def _sweep(capsys, *args):
    code, out, _ = run(capsys, "sweep", *args)
    assert code == 0
    rows = list(csv.reader(io.StringIO(out)))
    assert tuple(rows[0]) == cli.SWEEP_COLUMNS
    return rows[1:]


def test_sweep_shots_error_decreases(capsys):
    rows = _sweep(capsys, "--sweep", "shots", "--grid", "100,1000,10000", "--trials", 50)
    med = [float(r[2]) for r in rows]
    assert med[0] > med[1] > med[2]
    assert [float(r[1]) for r in rows] == [100, 1000, 10000]


def test_sweep_theta_nondecreasing(capsys):
    rows = _sweep(capsys, "--sweep", "theta")
    f = [float(r[2]) for r in rows]
    assert all(b >= a for a, b in zip(f, f[1:]))
    assert f[0] == 0.0


def test_sweep_reps_ratio(capsys):
    rows = _sweep(capsys, "--sweep", "reps", "--grid", "16,32,64")
    err = [float(r[2]) for r in rows]
    assert 1.6 <= err[0] / err[1] <= 2.4 and 1.6 <= err[1] / err[2] <= 2.4


def test_sweep_order_independent_of_workers(capsys):
    a = _sweep(capsys, "--sweep", "reps", "--grid", "64,16,32", "--workers", 1)
    b = _sweep(capsys, "--sweep", "reps", "--grid", "64,16,32", "--workers", 3)
    assert a == b
    assert [r[1] for r in a] == ["64", "16", "32"]


def test_sweep_bad_grid(capsys):
    code, _, err = run(capsys, "sweep", "--sweep", "reps", "--grid", "0,4")
    assert code == 2
