import json

import pytest

from acbc import cli
from acbc.config import EXAMPLES_DIR


def _case1(tmp_path, **sections):
    raw = json.loads((EXAMPLES_DIR / "case1.json").read_text())
    for sec, vals in sections.items():
        if sec == "plant":
            raw["plant"].update(vals)
        else:
            raw.setdefault(sec, {}).update(vals)
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(raw))
    return str(p)


def test_synthesize_verify_simulate(tmp_path, capsys):
    out = tmp_path / "o"
    assert cli.main(["synthesize", "--config", "case1", "--out", str(out)]) == cli.EXIT_OK
    rep = json.loads((out / "certificate.json").read_text())
    assert rep["certificate"]["horizon_T"] >= 10
    assert (out / "trajectory.csv").exists()
    cfg = _case1(tmp_path, verification={"grid_res": 21, "n_runs": 100, "rollout_csv_runs": 3})
    rc = cli.main(["verify", "--config", cfg, "--certificate", str(out / "certificate.json"), "--out", str(out)])
    assert rc == cli.EXIT_OK
    ver = json.loads((out / "verification.json").read_text())
    assert ver["passed"] and ver["rollouts"]["runs"] == 100
    assert (out / "heatmap.csv").exists() and (out / "rollouts.csv").exists()
    rc = cli.main(["simulate", "--config", cfg, "--controller", str(out / "certificate.json"),
                   "--out", str(tmp_path / "s"), "--T", "5", "--runs", "2"])
    assert rc == cli.EXIT_OK
    assert len((tmp_path / "s" / "rollouts.csv").read_text().splitlines()) == 1 + 2 * 6
    assert "PASS" in capsys.readouterr().out


def test_verify_failure_exit_code(tmp_path, case1_synth):
    rep = json.loads(json.dumps(case1_synth.report, default=cli._jsonable))
    rep["certificate"]["eta_a"] *= 0.5  # understated initial level: the level check must fail
    p = tmp_path / "bad.json"
    p.write_text(json.dumps(rep))
    cfg = _case1(tmp_path, verification={"grid_res": 11, "n_runs": 10})
    assert cli.main(["verify", "--config", cfg, "--certificate", str(p), "--out", str(tmp_path)]) == cli.EXIT_VERIFY_FAILED


@pytest.mark.parametrize("plant,code", [
    ({"dictionary": ["x1", "x2", "u1", "sin(x1"]}, cli.EXIT_USAGE),
    ({"dictionary": ["x1", "x2", "u1", "sin(x3)"]}, cli.EXIT_USAGE),
    ({"initial_boxes": [{"lower": [-4, -4], "upper": [1, 1]}]}, cli.EXIT_USAGE),
])
def test_bad_configs(tmp_path, plant, code, capsys):
    cfg = _case1(tmp_path, plant=plant)
    assert cli.main(["synthesize", "--config", cfg, "--out", str(tmp_path / "o")]) == code
    assert "error" in capsys.readouterr().err


def test_richness_exit_code(tmp_path):
    cfg = _case1(tmp_path, experiment={"T": 5})
    assert cli.main(["synthesize", "--config", cfg, "--out", str(tmp_path / "o")]) == cli.EXIT_RICHNESS


def test_levels_exit_code(tmp_path):
    # initial set hugging the unsafe set: gamma_a <= eta_a
    cfg = _case1(tmp_path, plant={"initial_boxes": [{"lower": [-2.9, -2.9], "upper": [2.9, 2.9]}]})
    assert cli.main(["synthesize", "--config", cfg, "--out", str(tmp_path / "o")]) == cli.EXIT_LEVELS


def test_scenario_no_y_exit_code(tmp_path):
    cfg = _case1(tmp_path, scenario={"coupling": "off"})
    assert cli.main(["scenario", "--config", cfg, "--out", str(tmp_path / "o")]) == cli.EXIT_SCENARIO_NO_Y


def test_missing_config(tmp_path):
    assert cli.main(["synthesize", "--config", str(tmp_path / "nope.json")]) == cli.EXIT_USAGE


def test_seed_override_changes_trajectory(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert cli.main(["synthesize", "--config", "case1", "--out", str(a), "--seed", "3"]) == 0
    assert cli.main(["synthesize", "--config", "case1", "--out", str(b), "--seed", "4"]) == 0
    assert (a / "trajectory.csv").read_text() != (b / "trajectory.csv").read_text()
    assert json.loads((a / "certificate.json").read_text())["experiment"]["seed"] == 3
