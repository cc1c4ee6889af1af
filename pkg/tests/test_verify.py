import csv
from dataclasses import replace

import numpy as np

from acbc.synth import Certificate, DynamicController
from acbc.verify import check_decrement, check_levels, decrement_values, rollout, verify_all


def test_decrement_matches_manual_step(case1_synth, rng):
    r = case1_synth
    z = r.aug.state_box.sample(rng, 5)
    got = decrement_values(r.aug, r.cert, r.ctrl, z)
    for k in range(5):
        v = r.ctrl.virtual_input(r.aug.aug_dictionary, z[:, k])
        nxt = r.aug.step(z[:, k], v)
        want = nxt @ r.P @ nxt - z[:, k] @ r.P @ z[:, k] - r.cert.c_a
        assert abs(got[k] - want) <= 1e-9 * max(1.0, abs(want))


def test_grid_and_sampled_modes(case1_synth):
    r = case1_synth
    g = check_decrement(r.aug, r.cert, r.ctrl, grid_res=11)
    assert g.mode == "grid" and g.n_points == 11**3
    s = check_decrement(r.aug, r.cert, r.ctrl, grid_res=11, max_grid_points=100, n_samples=5000, seed=3)
    assert s.mode == "sampled" and s.n_points == 5000 and s.seed == 3
    s2 = check_decrement(r.aug, r.cert, r.ctrl, grid_res=11, max_grid_points=100, n_samples=5000, seed=3)
    assert s.max_value == s2.max_value


def test_heatmap_csv_limit(case1_synth, tmp_path):
    r = case1_synth
    d = check_decrement(r.aug, r.cert, r.ctrl, grid_res=11)
    d.write_csv(tmp_path / "h.csv", limit=10)
    rows = list(csv.reader(open(tmp_path / "h.csv")))
    assert rows[0] == ["zeta1", "zeta2", "zeta3", "value"]
    assert len(rows) == 11
    assert max(float(x[-1]) for x in rows[1:]) == d.max_value


def test_levels_check(case1_synth):
    r = case1_synth
    assert check_levels(r.cert, r.aug, 2000, seed=1).passed
    c = r.cert
    wrong = Certificate(c.P, c.eta_a * 0.5, c.gamma_a, c.c_a, c.varpi, 1)
    assert not check_levels(wrong, r.aug, 2000, seed=1).eta_ok


def test_rollout_flags_input_violation(case1_cfg, case1_synth):
    K = np.zeros((1, 10))
    K[0, 2] = 3.0  # u+ = 3u escapes the input box
    ro = rollout(case1_cfg.plant, DynamicController(K, case1_cfg.plant.dictionary), 20, 50, seed=0)
    assert ro.stats.input_violations == 50
    assert not ro.stats.passed


def test_rollout_flags_state_violation(case1_cfg):
    # x+ = 2x pushes same-sign initial states into [3, 5]^2 or [-5, -3]^2
    plant = case1_cfg.plant
    A = np.zeros((2, 10))
    A[0, 0] = A[1, 1] = 2.0
    ro = rollout(replace(plant, A=A), DynamicController(np.zeros((1, 10)), plant.dictionary), 4, 200, seed=0)
    assert ro.stats.state_violations > 0


def test_rollouts_seeded(case1_cfg, case1_synth, tmp_path):
    a = rollout(case1_cfg.plant, case1_synth.ctrl, 15, 30, seed=5)
    b = rollout(case1_cfg.plant, case1_synth.ctrl, 15, 30, seed=5)
    assert np.array_equal(a.x, b.x) and np.array_equal(a.u, b.u)
    a.write_csv(tmp_path / "r.csv", max_runs=2)
    rows = list(csv.reader(open(tmp_path / "r.csv")))
    assert rows[0] == ["run", "k", "x1", "x2", "u1"] and len(rows) == 1 + 2 * 16


def test_verify_all_passes_case1(case1_cfg, case1_synth):
    r = case1_synth
    rep, _ = verify_all(case1_cfg.plant, r.aug, r.cert, r.ctrl, int(r.cert.horizon_T), grid_res=21, n_runs=200)
    assert rep.passed
    assert rep.rollouts.bound_violations == 0
    js = rep.to_json()
    assert js["passed"] and js["decrement"]["mode"] == "grid"
