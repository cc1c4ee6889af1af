"""Single-trajectory experiments and the regressor matrix built from them."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .expr import Dictionary, DomainError, eval_dictionary
from .model import AugmentedModel, Box, sample_union


@dataclass(frozen=True)
class TrajectoryData:
    S: np.ndarray  # (n+m, T) states zeta(0..T-1)
    I: np.ndarray  # (m, T) virtual inputs v(0..T-1)
    S_plus: np.ndarray  # (n+m, T) states zeta(1..T)
    seed: Optional[int] = None

    @property
    def T(self) -> int:
        return self.S.shape[1]

    def to_csv(self, path) -> None:
        dim, m = self.S.shape[0], self.I.shape[0]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["k"] + [f"zeta{i + 1}" for i in range(dim)] + [f"v{j + 1}" for j in range(m)])
            states = np.hstack([self.S, self.S_plus[:, -1:]])
            for k in range(self.T + 1):
                inputs = self.I[:, k] if k < self.T else np.full(m, np.nan)
                w.writerow([k] + [repr(float(s)) for s in states[:, k]] + [repr(float(v)) for v in inputs])

    @classmethod
    def from_csv(cls, path, dim: int) -> "TrajectoryData":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))[1:]
        vals = np.array([[float(c) for c in r[1:]] for r in rows])
        states = vals[:, :dim].T
        inputs = vals[:-1, dim:].T
        return cls(S=states[:, :-1], I=inputs, S_plus=states[:, 1:])


@dataclass(frozen=True)
class DataMatrices:
    M: np.ndarray  # (N, T)
    rank: int

    @property
    def N(self) -> int:
        return self.M.shape[0]

    @property
    def T(self) -> int:
        return self.M.shape[1]


def default_excitation(aug: AugmentedModel) -> Box:
    """Uniform excitation over the zeta_2 part of the augmented state box."""
    return Box(aug.state_box.lower[aug.n :], aug.state_box.upper[aug.n :])


def collect_trajectory(
    aug: AugmentedModel,
    T: int,
    excitation: Optional[Box] = None,
    seed: int = 0,
    zeta0=None,
) -> TrajectoryData:
    """Simulate one experiment of length ``T`` under i.i.d. uniform inputs."""
    if T < 1:
        raise ValueError("trajectory length must be at least 1")
    exc = default_excitation(aug) if excitation is None else excitation
    if exc.dim != aug.m or not np.all(np.isfinite(exc.widths)):
        raise ValueError("excitation box must be finite and match the input dimension")
    rng = np.random.default_rng(seed)
    if zeta0 is None:
        zeta0 = sample_union(aug.initial_boxes, rng, 1)[:, 0]
    inputs = exc.sample(rng, T)

    states = np.empty((aug.dim, T + 1))
    states[:, 0] = zeta0
    for k in range(T):
        try:
            states[:, k + 1] = aug.step(states[:, k], inputs[:, k])
        except DomainError as exc_:
            raise DomainError(f"rollout failed at step {k}: {exc_}") from exc_
    return TrajectoryData(S=states[:, :-1], I=inputs, S_plus=states[:, 1:], seed=seed)


def numerical_rank(M: np.ndarray) -> int:
    if M.size == 0:
        return 0
    s = np.linalg.svd(M, compute_uv=False)
    tol = max(M.shape) * s[0] * np.finfo(float).eps * 16
    return int(np.sum(s > tol))


def assemble_M(traj: TrajectoryData, aug_dict: Dictionary) -> DataMatrices:
    M = eval_dictionary(aug_dict, traj.S)
    return DataMatrices(M=M, rank=numerical_rank(M))


def check_richness(dm: DataMatrices) -> bool:
    """Full row rank and at least ``N + 1`` samples."""
    return dm.rank == dm.N and dm.T >= dm.N + 1
