import math

import numpy as np
import pytest

from acbc.model import Box
from acbc.synth import (
    Certificate,
    DynamicController,
    SynthesisError,
    barrier_residuals,
    compute_ca,
    compute_levels,
    compute_levels_conservative,
    horizon,
    max_quadratic_on_box,
    min_quadratic_on_box,
    residual_sq,
    solve_z2,
)

from .conftest import REFERENCE_P


def test_horizon_rules():
    assert horizon(0.0, 10.0, 1.0) == 9  # q integral: strict inequality drops one
    assert horizon(0.0, 10.5, 1.0) == 10
    assert math.isinf(horizon(1.0, 2.0, 0.0))
    with pytest.raises(SynthesisError) as ei:
        horizon(2.0, 1.0, 0.1)
    assert ei.value.kind == "levels"
    with pytest.raises(SynthesisError):
        horizon(0.0, 0.5, 1.0)


def test_levels_against_brute_force(rng):
    A = rng.normal(size=(3, 3))
    P = A @ A.T + 0.1 * np.eye(3)
    b = Box([-1, 0.5, -2], [2, 1.5, 1])
    ax = [np.linspace(lo, hi, 41) for lo, hi in zip(b.lower, b.upper)]
    g = np.stack(np.meshgrid(*ax, indexing="ij")).reshape(3, -1)
    vals = np.einsum("ik,ij,jk->k", g, P, g)
    assert max_quadratic_on_box(P, b) == pytest.approx(vals.max(), rel=1e-12)
    lo, x = min_quadratic_on_box(P, b)
    assert lo <= vals.min() + 1e-9
    assert b.contains(x)


def test_reference_levels():
    from acbc.config import example_config
    from acbc.model import augment

    aug = augment(example_config("case1").plant)
    eta, gamma = compute_levels(REFERENCE_P, aug.initial_boxes, aug.unsafe_boxes)
    assert eta == pytest.approx(66.6553, abs=1e-3)
    assert gamma == pytest.approx(125.7459, abs=1e-2)
    ce, cg = compute_levels_conservative(REFERENCE_P, aug.initial_boxes, aug.unsafe_boxes)
    assert ce >= eta and cg <= gamma


def test_certificate_guards_and_json():
    P = np.eye(2)
    with pytest.raises(SynthesisError):
        Certificate(P, 2.0, 1.0, 0.1, 0.01, 5)
    with pytest.raises(SynthesisError):
        Certificate(P, 1.0, 2.0, 0.1, 0.01, 10)  # 1 + 0.1*10 is not < 2
    c = Certificate(P, 1.0, 2.0, 0.1, 0.01, 9)
    back = Certificate.from_json(c.to_json())
    assert back.horizon_T == 9 and np.array_equal(back.P, P)
    inf = Certificate(P, 1.0, 2.0, 0.0, 0.01, math.inf)
    assert Certificate.from_json(inf.to_json()).horizon_T == math.inf


def test_controller_json(case1_synth):
    ctrl = case1_synth.ctrl
    back = DynamicController.from_json(ctrl.to_json())
    assert np.array_equal(back.K, ctrl.K)
    x, u = np.array([0.3, -0.2]), np.array([1.0])
    assert np.array_equal(back(x, u), ctrl(x, u))


def test_controller_uses_data_only(case1_synth):
    """K = I [Y P, Z2] and the LMI residuals from the stored solution."""
    r = case1_synth
    tr, dm = r.data.traj, r.data.dm
    K = tr.I @ np.hstack([r.Y @ r.P, r.Z2])
    np.testing.assert_allclose(r.ctrl.K, K, rtol=0, atol=1e-12)
    chk = barrier_residuals(dm.M, tr.S_plus, np.linalg.inv(r.P), r.Y, r.cert.varpi)
    assert chk["eq_residual"] < 1e-6 and chk["lmi_min_eig"] > -1e-6


def test_frobenius_z2_satisfies_equality(case1_synth):
    r = case1_synth
    aug = r.aug
    Z2 = solve_z2(r.data.dm, r.data.traj.S_plus, aug.n, aug.m, norm="frobenius")
    target = np.vstack([np.zeros((aug.dim, aug.N - aug.dim)), np.eye(aug.N - aug.dim)])
    np.testing.assert_allclose(r.data.dm.M @ Z2, target, atol=1e-8)
    # spectral minimiser is no worse in spectral norm
    assert np.linalg.norm(r.data.traj.S_plus @ r.Z2, 2) <= np.linalg.norm(r.data.traj.S_plus @ Z2, 2) + 1e-6


def test_ca_bounds_sampled_residual(case1_synth, rng):
    r = case1_synth
    G = r.data.traj.S_plus @ r.Z2
    box = r.aug.state_box
    ca = compute_ca(r.P, G, r.aug.aug_dictionary, box, r.cert.varpi)
    z = box.sample(rng, 20_000)
    peak = residual_sq(G, r.aug.aug_dictionary, z).max()
    lam = np.linalg.eigvalsh(r.P)[-1]
    assert ca >= (1 + 1 / r.cert.varpi) * lam * peak * (1 - 1e-9)
    sound = compute_ca(r.P, G, r.aug.aug_dictionary, box, r.cert.varpi, sound=True)
    assert sound >= ca


def test_zero_residual_gives_zero_ca(case1_synth):
    aug = case1_synth.aug
    G = np.zeros((aug.dim, aug.N - aug.dim))
    assert compute_ca(np.eye(3), G, aug.aug_dictionary, aug.state_box, 0.01) == 0.0
