import numpy as np
import pytest

from acbc.model import Box, InputConstraints, ModelError, RegionSpec, augment, contains, sample_union

TAU = 0.01


def test_case1_augmented_sets(case1_cfg):
    aug = augment(case1_cfg.plant, 1 / 1500, 1499 / 1500)
    np.testing.assert_allclose(aug.state_box.lower, [-5, -5, -15.01], rtol=1e-14)
    np.testing.assert_allclose(aug.state_box.upper, [5, 5, 15.01], rtol=1e-14)
    (x0,) = aug.initial_boxes
    np.testing.assert_allclose(x0.lower, [-1, -1, -0.01], rtol=1e-12)
    np.testing.assert_allclose(x0.upper, [1, 1, 0.01], rtol=1e-12)
    # two state-unsafe boxes and two input bands
    assert len(aug.unsafe_boxes) == 4
    bands = aug.unsafe_boxes[2:]
    got = sorted((b.lower[2], b.upper[2]) for b in bands)
    np.testing.assert_allclose(got, [(-15.01, -15.0), (15.0, 15.01)], rtol=1e-12)
    for b in bands:
        np.testing.assert_array_equal(b.lower[:2], [-5, -5])


def test_augmented_matrices_bitwise(case1_cfg):
    aug = augment(case1_cfg.plant)
    A = np.zeros((3, 10))
    A[0, [0, 1, 9]] = [1, TAU, TAU]
    A[1, [0, 1, 2, 3]] = [-TAU, 1 + TAU, TAU, -TAU]
    assert np.array_equal(aug.A_aug, A)
    assert np.array_equal(aug.B, np.array([[0.0], [0.0], [1.0]]))


def test_augmented_step_matches_plant(case1_cfg, rng):
    aug = augment(case1_cfg.plant)
    z = aug.state_box.sample(rng, 1)[:, 0]
    v = np.array([0.3])
    nxt = aug.step(z, v)
    np.testing.assert_array_equal(nxt[:2], case1_cfg.plant.step(z[:2], z[2:]))
    assert nxt[2] == 0.3


def test_eps_validation(case1_cfg):
    with pytest.raises(ModelError):
        augment(case1_cfg.plant, 0.0, 0.5)
    with pytest.raises(ModelError):
        augment(case1_cfg.plant, 0.5, 1.0)


def test_box_basics(rng):
    b = Box([-1, -2], [1, 2])
    assert b.contains([1, 2]) and not b.contains([1.01, 0])
    assert b.vertices().shape == (2, 4)
    s = b.sample(rng, 1000)
    assert np.all(b.contains(s))
    assert Box.from_json(b.to_json()) == b
    assert b != Box([-1, -2], [1, 3])
    with pytest.raises(ModelError):
        Box([1], [0])


def test_union_membership_and_sampling(rng):
    boxes = [Box([-5, -5], [-3, -3]), Box([3, 3], [5, 5])]
    assert contains(boxes, [4, 4]) and not contains(boxes, [0, 0])
    pts = sample_union(boxes, rng, 500)
    assert np.all(contains(boxes, pts))


def test_region_spec_rejects_overlap():
    X = Box([-5, -5], [5, 5])
    with pytest.raises(ModelError):
        RegionSpec(X, [Box([-1, -1], [1, 1])], [Box([0, 0], [2, 2])])
    with pytest.raises(ModelError):
        RegionSpec(X, [Box([-1, -1], [6, 1])], [])


def test_input_constraints():
    ic = InputConstraints.from_bounds([-15], [15])
    assert ic.satisfied(np.array([15.0])) and not ic.satisfied(np.array([15.001]))
    lo, hi = ic.box_bounds()
    assert lo[0] == -15 and hi[0] == 15
    with pytest.raises(ModelError):
        InputConstraints(np.array([[1.0]]))  # unbounded below
    skew = InputConstraints(np.array([[1.0, 1.0], [-1.0, 0.0], [0.0, -1.0], [1.0, -1.0]]))
    assert skew.box_bounds() is None
