"""Model-based checks of a synthesized certificate and controller.

These use the simulation matrix ``A`` that synthesis never sees, so they act
as an independent audit of the data-driven result.
"""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .expr import DomainError, eval_dictionary
from .model import AugmentedModel, PlantModel, augment, contains, sample_union
from .synth import Certificate, DynamicController, max_quadratic_on_box

DECREMENT_TOL = 1e-6
LEVEL_TOL = 1e-9


@dataclass
class DecrementResult:
    max_value: float
    argmax: list
    mode: str  # "grid" or "sampled"
    n_points: int
    grid_res: Optional[int]
    seed: Optional[int]
    points: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)

    @property
    def passed(self) -> bool:
        return self.max_value <= DECREMENT_TOL

    def summary(self) -> dict:
        return {
            "max_value": self.max_value,
            "argmax": self.argmax,
            "mode": self.mode,
            "n_points": self.n_points,
            "grid_res": self.grid_res,
            "seed": self.seed,
            "passed": self.passed,
        }

    def write_csv(self, path, limit: Optional[int] = None) -> None:
        """Heatmap table. With ``limit`` only the largest values are kept."""
        pts, vals = self.points, self.values
        if limit is not None and vals.size > limit:
            idx = np.sort(np.argsort(vals)[::-1][:limit])
            pts, vals = pts[:, idx], vals[idx]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"zeta{i + 1}" for i in range(pts.shape[0])] + ["value"])
            for k in range(vals.size):
                w.writerow([repr(float(v)) for v in pts[:, k]] + [repr(float(vals[k]))])


def decrement_values(aug: AugmentedModel, cert: Certificate, ctrl: DynamicController, zeta: np.ndarray) -> np.ndarray:
    """``B(A F(zeta) + B v) - B(zeta) - c_a`` with ``v = K F(zeta)``."""
    F = aug.features(zeta)
    nxt = aug.A_aug @ F + aug.B @ (ctrl.K @ F)
    return cert.barrier(nxt) - cert.barrier(zeta) - cert.c_a


def check_decrement(
    aug: AugmentedModel,
    cert: Certificate,
    ctrl: DynamicController,
    grid_res: Optional[int] = None,
    max_grid_points: int = 10**6,
    n_samples: int = 10**6,
    seed: int = 0,
    chunk: int = 200_000,
) -> DecrementResult:
    """Evaluate the decrement condition on a grid, or on seeded uniform
    samples when the grid would exceed ``max_grid_points``."""
    box = aug.state_box
    dim = box.dim
    if grid_res is None:
        grid_res = 51 if dim <= 3 else 9
    if grid_res**dim <= max_grid_points:
        axes = [np.linspace(lo, hi, grid_res) for lo, hi in zip(box.lower, box.upper)]
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([g.reshape(-1) for g in mesh])
        mode, used_seed, res = "grid", None, grid_res
    else:
        pts = box.sample(np.random.default_rng(seed), n_samples)
        mode, used_seed, res = "sampled", seed, None
    vals = np.concatenate(
        [decrement_values(aug, cert, ctrl, pts[:, s : s + chunk]) for s in range(0, pts.shape[1], chunk)]
    )
    k = int(np.argmax(vals))
    return DecrementResult(float(vals[k]), pts[:, k].tolist(), mode, int(vals.size), res, used_seed, pts, vals)


@dataclass
class LevelCheck:
    max_initial: float
    min_unsafe: float
    eta_ok: bool
    gamma_ok: bool
    n_samples: int
    seed: int

    @property
    def passed(self) -> bool:
        return self.eta_ok and self.gamma_ok


def _region_points(boxes, rng, n: int) -> np.ndarray:
    pts = [sample_union(boxes, rng, n)]
    for b in boxes:
        if b.dim <= 16:
            pts.append(b.vertices())
    return np.hstack(pts)


def check_levels(cert: Certificate, aug: AugmentedModel, n_samples: int = 10_000, seed: int = 0) -> LevelCheck:
    """Sampled check of ``B <= eta_a`` on the initial set and ``B >= gamma_a``
    on the unsafe set; box vertices are always included."""
    rng = np.random.default_rng(seed)
    init = _region_points(aug.initial_boxes, rng, n_samples)
    unsafe = _region_points(aug.unsafe_boxes, rng, n_samples)
    hi = float(cert.barrier(init).max())
    if aug.dim <= 20:
        hi = max(hi, max(max_quadratic_on_box(cert.P, b) for b in aug.initial_boxes))
    lo = float(cert.barrier(unsafe).min())
    return LevelCheck(hi, lo, hi <= cert.eta_a + LEVEL_TOL, lo >= cert.gamma_a - LEVEL_TOL, n_samples, seed)


@dataclass
class RolloutStats:
    runs: int
    horizon: int
    state_violations: int
    input_violations: int
    domain_errors: int
    bound_violations: int  # steps where B(zeta(k)) > eta_a + k c_a
    max_barrier_ratio: float  # max over k < horizon of B(zeta(k)) / gamma_a
    seed: int

    @property
    def passed(self) -> bool:
        return self.state_violations == 0 and self.input_violations == 0 and self.domain_errors == 0


@dataclass
class Rollouts:
    stats: RolloutStats
    x: np.ndarray  # (T+1, n, runs)
    u: np.ndarray  # (T+1, m, runs)

    def write_csv(self, path, max_runs: Optional[int] = None) -> None:
        T1, n, runs = self.x.shape
        m = self.u.shape[1]
        runs = runs if max_runs is None else min(runs, max_runs)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["run", "k"] + [f"x{i + 1}" for i in range(n)] + [f"u{j + 1}" for j in range(m)])
            for r in range(runs):
                for k in range(T1):
                    w.writerow([r, k] + [repr(float(v)) for v in self.x[k, :, r]]
                               + [repr(float(v)) for v in self.u[k, :, r]])


def initial_conditions(aug: AugmentedModel, n_runs: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform draws over the augmented initial set (x and the small u slice)."""
    return sample_union(aug.initial_boxes, rng, n_runs)


def rollout(
    plant: PlantModel,
    ctrl: DynamicController,
    T: int,
    n_runs: int,
    seed: int = 0,
    aug: Optional[AugmentedModel] = None,
    cert: Optional[Certificate] = None,
) -> Rollouts:
    """Closed-loop runs of ``x+ = A f(x, u)``, ``u+ = K f(x, u)``.

    Unsafe-set entries are counted on the closed unsafe boxes over k = 0..T;
    input violations are any ``C_j^T u > 1``.
    """
    if T < 0:
        raise ValueError("horizon must be non-negative")
    if aug is None:
        aug = augment(plant)
    n, m = plant.n, plant.m
    rng = np.random.default_rng(seed)
    z0 = initial_conditions(aug, n_runs, rng)
    xs = np.empty((T + 1, n, n_runs))
    us = np.empty((T + 1, m, n_runs))
    xs[0], us[0] = z0[:n], z0[n:]
    bad = np.zeros(n_runs, dtype=bool)
    with np.errstate(all="ignore"):
        for k in range(T):
            x, u = xs[k], us[k]
            try:
                f = eval_dictionary(plant.dictionary, x, u)
            except DomainError:
                f = _eval_per_run(plant, x, u)
            xs[k + 1] = plant.A @ f
            us[k + 1] = ctrl.K @ f
            bad |= ~np.all(np.isfinite(xs[k + 1]), axis=0) | ~np.all(np.isfinite(us[k + 1]), axis=0)
    xs[:, :, bad] = np.nan_to_num(xs[:, :, bad], nan=0.0, posinf=0.0, neginf=0.0)
    us[:, :, bad] = np.nan_to_num(us[:, :, bad], nan=0.0, posinf=0.0, neginf=0.0)

    unsafe_x = plant.regions.unsafe_boxes
    state_hit = np.zeros(n_runs, dtype=bool)
    input_hit = np.zeros(n_runs, dtype=bool)
    bound_viol = 0
    ratio = 0.0
    for k in range(T + 1):
        state_hit |= contains(unsafe_x, xs[k]) & ~bad
        input_hit |= ~plant.inputs.satisfied(us[k]) & ~bad
        if cert is not None:
            B = cert.barrier(np.vstack([xs[k], us[k]]))[~bad]
            bound_viol += int(np.sum(B > cert.eta_a + k * cert.c_a + 1e-6))
            if B.size and k < T:
                ratio = max(ratio, float(B.max()) / cert.gamma_a)
    stats = RolloutStats(n_runs, T, int(state_hit.sum()), int(input_hit.sum()), int(bad.sum()),
                         bound_viol, ratio, seed)
    return Rollouts(stats, xs, us)


def _eval_per_run(plant: PlantModel, x: np.ndarray, u: np.ndarray) -> np.ndarray:
    out = np.full((plant.dictionary.N, x.shape[1]), np.nan)
    for r in range(x.shape[1]):
        try:
            out[:, r] = eval_dictionary(plant.dictionary, x[:, r], u[:, r])
        except DomainError:
            pass
    return out


@dataclass
class VerificationReport:
    decrement: DecrementResult
    levels: LevelCheck
    rollouts: RolloutStats

    @property
    def passed(self) -> bool:
        return self.decrement.passed and self.levels.passed and self.rollouts.passed

    def to_json(self) -> dict:
        lv = asdict(self.levels)
        lv["passed"] = self.levels.passed
        ro = asdict(self.rollouts)
        ro["passed"] = self.rollouts.passed
        return {
            "passed": self.passed,
            "decrement": self.decrement.summary(),
            "levels": lv,
            "rollouts": ro,
        }


def verify_all(
    plant: PlantModel,
    aug: AugmentedModel,
    cert: Certificate,
    ctrl: DynamicController,
    horizon: int,
    grid_res: Optional[int] = None,
    max_grid_points: int = 10**6,
    n_samples: int = 10**6,
    level_samples: int = 10_000,
    n_runs: int = 1000,
    seed: int = 0,
) -> tuple[VerificationReport, Rollouts]:
    # independent substreams per check
    s_dec, s_lev, s_roll = (int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(3))
    dec = check_decrement(aug, cert, ctrl, grid_res, max_grid_points, n_samples, s_dec)
    lev = check_levels(cert, aug, level_samples, s_lev)
    ro = rollout(plant, ctrl, horizon, n_runs, s_roll, aug=aug, cert=cert)
    return VerificationReport(dec, lev, ro.stats), ro


def rollout_horizon(cert: Certificate, fallback: int = 100) -> int:
    return fallback if math.isinf(cert.horizon_T) else int(cert.horizon_T)
