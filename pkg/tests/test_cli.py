import json

import pytest

from hermes_dsa.cli import main

TINY = {"n_ues": 4, "m_rbgs": 2, "frames": 6, "batch_size": 4, "train_steps": 1}


def _json_out(capsys):
    return json.loads(capsys.readouterr().out)


def test_match_json_and_csv(tmp_path, capsys):
    m = tmp_path / "m.json"
    m.write_text("[[10, 2], [3, 1]]")
    assert main(["match", "--matrix", str(m)]) == 0
    assert _json_out(capsys) == {"strategy": "maximin", "assignment": [1, 0], "bottleneck": 2.0, "total": 5.0}
    c = tmp_path / "m.csv"
    c.write_text("10,2\n3,1\n")
    assert main(["match", "--matrix", str(c), "--strategy", "km"]) == 0
    out = _json_out(capsys)
    assert out["assignment"] == [0, 1] and out["total"] == 11.0


def test_run_then_analyze(tmp_path, capsys):
    cfg = tmp_path / "s.json"
    cfg.write_text(json.dumps(TINY))
    out = tmp_path / "out"
    assert main(["run", "--config", str(cfg), "--out", str(out), "--seed", "3"]) == 0
    head = _json_out(capsys)
    assert head["seed"] == 3 and head["method"] == "hermes"
    assert main(["analyze", "--in", str(out)]) == 0
    again = _json_out(capsys)
    assert again["window"]["jfi"] == head["jfi"]
    assert json.loads((out / "config.resolved.json").read_text())["seed"] == 3


def test_run_bundled_name_with_overrides(tmp_path, capsys):
    assert main(["run", "--config", "toy-2x1", "--frames", "3", "--method", "pf", "--out", str(tmp_path)]) == 0
    assert _json_out(capsys)["method"] == "pf"


def test_sweep_writes_one_dir_per_value(tmp_path, capsys):
    doc = {"base": TINY, "sweep": {"field": "m_rbgs", "values": [1, 2]}}
    cfg = tmp_path / "sweep.json"
    cfg.write_text(json.dumps(doc))
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    results = _json_out(capsys)
    assert sorted(results) == ["m_rbgs=1", "m_rbgs=2"]
    for label in results:
        assert (tmp_path / "o" / label / "timeseries.csv").exists()
    assert json.loads((tmp_path / "o" / "sweep.json").read_text()) == results


def test_scenarios_lists_bundled(capsys):
    assert main(["scenarios"]) == 0
    assert "20ue-6rbg-500f" in capsys.readouterr().out.split()


@pytest.mark.parametrize(
    "doc, field",
    [({"n_ues": 2, "m_rbgs": 0, "frames": 1}, "m_rbgs"), ({"n_ues": 2, "m_rbgs": 1, "frames": 1, "bogus": 1}, "bogus")],
)
def test_invalid_scenario_exits_2(tmp_path, capsys, doc, field):
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps(doc))
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "ScenarioError" and field in err["message"]
    assert not (tmp_path / "o").exists()


def test_missing_inputs_exit_2(tmp_path, capsys):
    assert main(["run", "--config", str(tmp_path / "nope.json")]) == 2
    assert json.loads(capsys.readouterr().err)["error"] == "FileNotFoundError"
    bad = tmp_path / "m.json"
    bad.write_text("[[1, 2, 3]]")
    assert main(["match", "--matrix", str(bad)]) == 2
    assert "square" in json.loads(capsys.readouterr().err)["message"]


def test_malformed_json_exit_2(tmp_path, capsys):
    cfg = tmp_path / "broken.json"
    cfg.write_text("{not json")
    assert main(["run", "--config", str(cfg)]) == 2
    json.loads(capsys.readouterr().err)
