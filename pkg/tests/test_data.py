import numpy as np
import pytest

from acbc.data import TrajectoryData, assemble_M, check_richness, collect_trajectory, numerical_rank
from acbc.model import augment
from acbc.pipeline import collect_rich
from acbc.synth import SynthesisError


@pytest.fixture(scope="module")
def aug1(case1_cfg):
    return augment(case1_cfg.plant, 1 / 1500, 1499 / 1500)


def test_trajectory_shapes_and_shift(aug1):
    tr = collect_trajectory(aug1, 11, seed=0)
    assert tr.S.shape == (3, 11) and tr.I.shape == (1, 11) and tr.S_plus.shape == (3, 11)
    np.testing.assert_array_equal(tr.S[:, 1:], tr.S_plus[:, :-1])
    # the augmented input coordinate follows the virtual input exactly
    np.testing.assert_array_equal(tr.S_plus[2], tr.I[0])


def test_seeded_trajectories_are_identical(aug1):
    a, b = collect_trajectory(aug1, 20, seed=7), collect_trajectory(aug1, 20, seed=7)
    assert np.array_equal(a.S, b.S) and np.array_equal(a.I, b.I)
    c = collect_trajectory(aug1, 20, seed=8)
    assert not np.array_equal(a.I, c.I)


def test_richness_case1(aug1):
    dm = assemble_M(collect_trajectory(aug1, 11, seed=0), aug1.aug_dictionary)
    assert dm.M.shape == (10, 11)
    assert dm.rank == 10 and check_richness(dm)


def test_too_short_is_not_rich(aug1):
    dm = assemble_M(collect_trajectory(aug1, 10, seed=0), aug1.aug_dictionary)
    assert not check_richness(dm)


def test_short_experiment_raises_richness(case1_cfg):
    cfg = case1_cfg.with_overrides("experiment", T=5)
    aug = augment(cfg.plant)
    with pytest.raises(SynthesisError) as ei:
        collect_rich(aug, cfg)
    assert ei.value.kind == "richness"


def test_numerical_rank():
    M = np.outer(np.arange(1, 5.0), np.ones(6))
    assert numerical_rank(M) == 1
    assert numerical_rank(np.eye(4)) == 4


def test_csv_round_trip(aug1, tmp_path):
    tr = collect_trajectory(aug1, 11, seed=3)
    tr.to_csv(tmp_path / "t.csv")
    back = TrajectoryData.from_csv(tmp_path / "t.csv", 3)
    assert np.array_equal(back.S, tr.S) and np.array_equal(back.I, tr.I) and np.array_equal(back.S_plus, tr.S_plus)
