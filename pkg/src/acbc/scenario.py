"""Sampling-based computation of the decay constant.

The robust program "g(zeta) <= c_a for every zeta in the box" has infinitely
many constraints. Two sampled replacements are offered: a uniform grid with a
Lipschitz correction (deterministic), and i.i.d. samples with a chance-
constraint guarantee (probabilistic).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import sdp
from .expr import Dictionary, eval_dictionary
from .model import Box
from .synth import SynthesisError, lipschitz_of

MAX_GRID_POINTS = 10**7
LIPSCHITZ_MARGIN = 1.1
DEFAULT_P_FLOOR = 1.0


# ---------------------------------------------------------------------------
# samples


@dataclass(frozen=True)
class GridSpec:
    counts: tuple

    def __post_init__(self):
        counts = tuple(int(c) for c in self.counts)
        if any(c < 2 for c in counts):
            raise ValueError("a grid needs at least 2 points per axis")
        object.__setattr__(self, "counts", counts)

    @classmethod
    def uniform(cls, count: int, dim: int) -> "GridSpec":
        return cls((count,) * dim)

    def refined(self) -> "GridSpec":
        """Twice the per-axis resolution (cell size halved)."""
        return GridSpec(tuple(2 * c - 1 for c in self.counts))

    def spacing(self, box: Box) -> np.ndarray:
        return box.widths / (np.asarray(self.counts) - 1)

    def delta(self, box: Box) -> float:
        """Covering radius: half the diagonal of one grid cell."""
        return 0.5 * float(np.linalg.norm(self.spacing(box)))

    @property
    def size(self) -> int:
        return math.prod(self.counts)


def grid_samples(box: Box, spec: GridSpec) -> tuple[np.ndarray, float]:
    if len(spec.counts) != box.dim:
        raise ValueError("grid spec dimension differs from the box")
    if spec.size > MAX_GRID_POINTS:
        raise MemoryError(f"grid of {spec.size} points exceeds the {MAX_GRID_POINTS} limit")
    axes = [np.linspace(lo, hi, c) for lo, hi, c in zip(box.lower, box.upper, spec.counts)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.reshape(-1) for g in mesh]), spec.delta(box)


def iid_samples(box: Box, n: int, seed: int) -> np.ndarray:
    return box.sample(np.random.default_rng(seed), n)


# ---------------------------------------------------------------------------
# residual function g


def residual_vectors(G: np.ndarray, aug_dict: Dictionary, zeta: np.ndarray) -> np.ndarray:
    """Columns ``G Psi(zeta)``."""
    psi = eval_dictionary(aug_dict, zeta)[aug_dict.n :]
    return G @ psi


def g_values(P: np.ndarray, G: np.ndarray, aug_dict: Dictionary, zeta, varpi: float) -> np.ndarray:
    """``(1 + 1/varpi) Psi^T G^T P G Psi`` at each column of ``zeta``."""
    W = residual_vectors(G, aug_dict, np.asarray(zeta, dtype=float))
    return (1.0 + 1.0 / varpi) * np.einsum("ik,ij,jk->k", W, P, W)


def _chunked_g(P, G, aug_dict, pts, varpi, chunk=200_000):
    return np.concatenate(
        [g_values(P, G, aug_dict, pts[:, s : s + chunk], varpi) for s in range(0, pts.shape[1], chunk)]
    )


def _unique_columns(W: np.ndarray, rel: float = 1e-14) -> np.ndarray:
    """Representative columns after merging those equal up to ``rel`` times
    the largest entry; grids and even dictionaries repeat residuals a lot."""
    if W.shape[1] < 2:
        return W
    scale = float(np.abs(W).max()) or 1.0
    _, idx = np.unique(np.round(W / (rel * scale)), axis=1, return_index=True)
    return W[:, np.sort(idx)]


# ---------------------------------------------------------------------------
# scenario program in P


@dataclass
class ScpResult:
    P: np.ndarray
    c_a: float
    mu: float
    n_samples: int
    info: dict = field(default_factory=dict)


def solve_scp(
    samples: np.ndarray,
    G: np.ndarray,
    aug_dict: Dictionary,
    varpi: float,
    mode: str = "with_mu",
    p_floor: float = DEFAULT_P_FLOOR,
) -> ScpResult:
    """Solve the scenario program over ``P >= p_floor I``.

    In ``with_mu`` form the optimal value ``s = c_a + mu`` is unique but its
    split is not, and that flat optimal face stalls interior-point solvers.
    Both modes are therefore solved through the ``ca_only`` program, whose
    optimizer plus ``mu = 0`` is the smallest-``c_a`` optimizer of
    ``with_mu``. ``c_a`` is recomputed as the exact sample maximum at ``P``.
    """
    if mode not in ("with_mu", "ca_only"):
        raise ValueError(f"unknown mode {mode!r}")
    samples = np.asarray(samples, dtype=float)
    if samples.ndim != 2 or samples.shape[1] == 0:
        raise ValueError("scenario program needs at least one sample")
    if not varpi > 0:
        raise ValueError("varpi must be positive")
    dim = aug_dict.n
    if G.size == 0 or not np.any(G):
        return ScpResult(p_floor * np.eye(dim), 0.0, 0.0, samples.shape[1], {"trivial": True})
    W_all = residual_vectors(G, aug_dict, samples)
    W = _unique_columns(W_all)
    prob = sdp.build_scp_problem(W, np.eye(W.shape[0]), varpi, mode="ca_only", p_floor=p_floor)
    sol = sdp.solve(prob)
    if not sol.ok:
        raise SynthesisError(f"scenario program failed: {sol.status} {sol.info.get('reason', '')}", "sdp")
    P = prob.extract(sol.y, "P")
    P = 0.5 * (P + P.T)
    gmax = float(((1.0 + 1.0 / varpi) * np.einsum("ik,ij,jk->k", W_all, P, W_all)).max())
    info = {"distinct_residuals": int(W.shape[1]), "solver_status": sol.info.get("solver_status")}
    return ScpResult(P, max(gmax, 0.0), 0.0, samples.shape[1], info)


# ---------------------------------------------------------------------------
# deterministic route


def lipschitz_estimate(
    P: np.ndarray, G: np.ndarray, aug_dict: Dictionary, box: Box, varpi: float, fine_grid: np.ndarray
) -> float:
    """Sampled-gradient Lipschitz estimate of g, inflated by 10%. Heuristic."""
    if G.size == 0 or not np.any(G):
        return 0.0
    f = lambda z: g_values(P, G, aug_dict, z, varpi)  # noqa: E731
    return LIPSCHITZ_MARGIN * lipschitz_of(f, fine_grid, box)


def deterministic_check(mu: float, L: float, delta: float) -> bool:
    return mu + L * delta <= 0.0


@dataclass
class DeterministicResult:
    P: np.ndarray
    c_a: float  # decay constant valid on the whole box (given L)
    mu: float
    lipschitz: float
    delta: float
    scp_value: float
    passed: bool
    rounds: int
    grid: GridSpec

    def to_json(self) -> dict:
        return {
            "route": "deterministic",
            "grid_counts": list(self.grid.counts),
            "delta": self.delta,
            "lipschitz": self.lipschitz,
            "lipschitz_kind": "sampled-gradient estimate x1.1 (heuristic)",
            "scp_value": self.scp_value,
            "c_a": self.c_a,
            "mu": self.mu,
            "check_passed": self.passed,
            "rounds": self.rounds,
        }


def split_for_check(scp_value: float, L: float, delta: float) -> tuple[float, float]:
    """Member ``(c_a, mu)`` of the optimal face with ``mu = -L delta``.

    Every pair with ``c_a + mu = scp_value``, ``mu <= 0``, ``c_a >= 0`` is
    optimal; this one makes the grid-to-box check hold with equality.
    """
    mu = -L * delta
    return scp_value - mu, mu


def solve_deterministic(
    box: Box,
    spec: GridSpec,
    G: np.ndarray,
    aug_dict: Dictionary,
    varpi: float,
    rounds: int = 3,
    p_floor: float = DEFAULT_P_FLOOR,
    P_fixed: Optional[np.ndarray] = None,
) -> DeterministicResult:
    """Grid SCP, Lipschitz estimate, check; refine the grid on failure.

    With ``P_fixed`` the SCP is skipped and only the decay constant of that
    ``P`` is certified (used after a coupled design).
    """
    for r in range(rounds + 1):
        pts, delta = grid_samples(box, spec)
        if P_fixed is None:
            res = solve_scp(pts, G, aug_dict, varpi, mode="with_mu", p_floor=p_floor)
            P, s = res.P, res.c_a
        else:
            P = P_fixed
            s = float(_chunked_g(P, G, aug_dict, pts, varpi).max()) if np.any(G) else 0.0
        L = lipschitz_estimate(P, G, aug_dict, box, varpi, pts)
        c_a, mu = split_for_check(s, L, delta)
        ok = deterministic_check(mu, L, delta)
        if ok or r == rounds or spec.refined().size > MAX_GRID_POINTS:
            return DeterministicResult(P, c_a, mu, L, delta, s, ok, r + 1, spec)
        spec = spec.refined()
    raise AssertionError("unreachable")


# ---------------------------------------------------------------------------
# probabilistic route


def decision_sample_count(epsilon: float, beta: float, n_decisions: int) -> int:
    if not (0.0 < epsilon < 1.0 and 0.0 < beta < 1.0):
        raise ValueError("epsilon and beta must lie in (0, 1)")
    if n_decisions < 1:
        raise ValueError("need at least one decision variable")
    return math.ceil((2.0 / epsilon) * (math.log(1.0 / beta) + n_decisions))


def sample_count(epsilon: float, beta: float, dim: int) -> int:
    """Samples needed for a P-and-c_a program over a ``dim``-dimensional state."""
    if dim < 1:
        raise ValueError("dimension must be at least 1")
    return decision_sample_count(epsilon, beta, dim * (dim + 1) // 2 + 1)


@dataclass(frozen=True)
class ScenarioParams:
    epsilon: float
    beta: float
    seed: int = 0
    n_samples: Optional[int] = None

    def __post_init__(self):
        if not (0.0 < self.epsilon < 1.0 and 0.0 < self.beta < 1.0):
            raise ValueError("epsilon and beta must lie in (0, 1)")

    def required(self, dim: int) -> int:
        return sample_count(self.epsilon, self.beta, dim)

    def resolve(self, n_required: int) -> int:
        """Sample count to draw; an explicit count below the bound is an error."""
        if self.n_samples is None:
            return n_required
        if self.n_samples < n_required:
            raise ValueError(f"{self.n_samples} samples given, the guarantee needs {n_required}")
        return int(self.n_samples)


@dataclass
class ProbabilisticResult:
    P: np.ndarray
    c_a: float
    epsilon: float
    beta: float
    n_samples: int
    n_decisions: int
    seed: int
    info: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "route": "probabilistic",
            "epsilon": self.epsilon,
            "beta": self.beta,
            "n_samples": self.n_samples,
            "n_decisions": self.n_decisions,
            "seed": self.seed,
            "c_a": self.c_a,
            "confidence": 1.0 - self.beta,
            "statement": (
                f"with confidence >= 1 - {self.beta:g}, g(zeta) <= c_a holds on all of the"
                f" state box except a set of probability <= {self.epsilon:g}"
            ),
        }


def solve_probabilistic(
    params: ScenarioParams,
    box: Box,
    G: np.ndarray,
    aug_dict: Dictionary,
    varpi: float,
    p_floor: float = DEFAULT_P_FLOOR,
) -> ProbabilisticResult:
    dim = box.dim
    n = params.resolve(params.required(dim))
    pts = iid_samples(box, n, params.seed)
    res = solve_scp(pts, G, aug_dict, varpi, mode="ca_only", p_floor=p_floor)
    return ProbabilisticResult(res.P, res.c_a, params.epsilon, params.beta, n,
                               dim * (dim + 1) // 2 + 1, params.seed, res.info)


def violation_fraction(
    P: np.ndarray, c_a: float, G: np.ndarray, aug_dict: Dictionary, box: Box, varpi: float, n: int, seed: int
) -> float:
    """Monte Carlo estimate of the probability that ``g(zeta) > c_a``."""
    pts = iid_samples(box, n, seed)
    return float(np.mean(_chunked_g(P, G, aug_dict, pts, varpi) > c_a))


# ---------------------------------------------------------------------------
# coupled design: scenario constraints and the data LMI solved together


@dataclass
class CoupledResult:
    Pi: np.ndarray
    Y: np.ndarray
    P: np.ndarray
    c_a: float
    rounds: int
    active: int
    info: dict = field(default_factory=dict)


def coupled_decisions(dim: int, T: int, rank: int) -> int:
    """Free scalars of the coupled program: Pi, c_a and the part of Y the
    data equalities leave open."""
    return dim * (dim + 1) // 2 + 1 + max(T - rank, 0) * dim


def solve_coupled(
    S_plus: np.ndarray,
    M: np.ndarray,
    G: np.ndarray,
    aug_dict: Dictionary,
    samples: np.ndarray,
    varpi: float,
    max_rounds: int = 40,
) -> CoupledResult:
    """Minimise c_a over (Pi, Y) subject to the data LMI and every sample.

    Solved by constraint generation: only the samples that are violated get
    added, so the result equals the optimum over the full sample set.
    """
    dim = S_plus.shape[0]
    s2 = 1.0 + 1.0 / varpi
    W_all = residual_vectors(G, aug_dict, samples) if np.any(G) else np.zeros((dim, 1))
    # near-duplicate Schur blocks make the conic solver degenerate
    W = _unique_columns(W_all, rel=1e-7)
    norms = np.sum(W**2, axis=0)
    batch = 4 * dim
    active = list(np.argsort(norms)[::-1][: 2 * dim])
    for rnd in range(1, max_rounds + 1):
        prob = sdp.build_coupled_scenario_problem(S_plus, M, W[:, active], varpi)
        sol = sdp.solve(prob)
        if not sol.ok:
            raise SynthesisError(f"coupled scenario program failed: {sol.status} {sol.info.get('reason', '')}", "sdp")
        Pi = prob.extract(sol.y, "Pi")
        Pi = 0.5 * (Pi + Pi.T)
        P = np.linalg.inv(Pi)
        P = 0.5 * (P + P.T)
        g = s2 * np.einsum("ik,ij,jk->k", W, P, W)
        c_sol = float(prob.extract(sol.y, "c_a")[0, 0])
        bad = np.flatnonzero(g > c_sol * (1.0 + 1e-6) + 1e-12)
        bad = np.setdiff1d(bad, active)
        if bad.size == 0:
            Y = prob.extract(sol.y, "Y")
            c_a = float((s2 * np.einsum("ik,ij,jk->k", W_all, P, W_all)).max())
            return CoupledResult(Pi, Y, P, c_a, rnd, len(active),
                                 {"distinct_residuals": int(W.shape[1])})
        active += list(bad[np.argsort(g[bad])[::-1][:batch]])
    raise SynthesisError("coupled scenario program did not converge", "sdp")


def solve_y_given_P(M: np.ndarray, S_plus: np.ndarray, P: np.ndarray, varpi: float) -> Optional[np.ndarray]:
    """``Y`` completing a fixed ``P`` to a data-consistent certificate, or None."""
    Pi = np.linalg.inv(P)
    Pi = 0.5 * (Pi + Pi.T)
    prob = sdp.build_y_given_pi_problem(S_plus, M, Pi, varpi)
    sol = sdp.solve(prob)
    if not sol.ok:
        return None
    t = float(prob.extract(sol.y, "t")[0, 0])
    if t < 0.0:
        return None
    return prob.extract(sol.y, "Y")
