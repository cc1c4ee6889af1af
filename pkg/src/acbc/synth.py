"""Data-driven synthesis of a quadratic augmented barrier certificate and
its dynamic safety controller."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import sdp
from .data import DataMatrices
from .expr import Dictionary, eval_dictionary
from .model import AugmentedModel, Box

INFINITE_HORIZON = math.inf


class SynthesisError(RuntimeError):
    """Pipeline failure; ``kind`` selects the CLI exit code."""

    def __init__(self, msg: str, kind: str = "sdp"):
        super().__init__(msg)
        self.kind = kind


@dataclass
class Certificate:
    P: np.ndarray
    eta_a: float
    gamma_a: float
    c_a: float
    varpi: float
    horizon_T: float  # int, or math.inf

    def __post_init__(self):
        if not self.gamma_a > self.eta_a:
            raise SynthesisError("level sets do not separate (gamma_a <= eta_a)", "levels")
        if self.c_a > 0 and not self.horizon_T < (self.gamma_a - self.eta_a) / self.c_a:
            raise SynthesisError("horizon violates eta_a + c_a T < gamma_a", "levels")

    def barrier(self, zeta) -> np.ndarray:
        zeta = np.asarray(zeta, dtype=float)
        return np.einsum("i...,ij,j...->...", zeta, self.P, zeta)

    def to_json(self) -> dict:
        return {
            "P": self.P.tolist(),
            "eta_a": self.eta_a,
            "gamma_a": self.gamma_a,
            "c_a": self.c_a,
            "varpi": self.varpi,
            "horizon_T": "inf" if math.isinf(self.horizon_T) else int(self.horizon_T),
        }

    @classmethod
    def from_json(cls, obj) -> "Certificate":
        T = obj["horizon_T"]
        return cls(
            P=np.array(obj["P"], dtype=float),
            eta_a=float(obj["eta_a"]),
            gamma_a=float(obj["gamma_a"]),
            c_a=float(obj["c_a"]),
            varpi=float(obj["varpi"]),
            horizon_T=math.inf if T == "inf" else int(T),
        )


@dataclass
class DynamicController:
    """``u+ = K f(x, u)`` on the plant dictionary."""

    K: np.ndarray  # (m, N)
    dictionary: Dictionary

    def __call__(self, x, u) -> np.ndarray:
        return self.K @ eval_dictionary(self.dictionary, x, u)

    def virtual_input(self, aug_dict: Dictionary, zeta) -> np.ndarray:
        return self.K @ eval_dictionary(aug_dict, zeta)

    def to_json(self) -> dict:
        return {"K": self.K.tolist(), "dictionary": self.dictionary.to_strings(),
                "n": self.dictionary.n, "m": self.dictionary.m}

    @classmethod
    def from_json(cls, obj) -> "DynamicController":
        d = Dictionary.from_strings(obj["n"], obj["m"], obj["dictionary"])
        return cls(np.array(obj["K"], dtype=float), d)


# ---------------------------------------------------------------------------
# SDP stages


def solve_z2(dm: DataMatrices, S_plus, n: int, m: int, norm: str = "spectral") -> np.ndarray:
    """Minimum-norm nonlinear part ``Z2`` with ``M Z2 = [0; I]``."""
    M = dm.M
    N, T = M.shape
    dim = n + m
    r = N - dim
    if r == 0:
        return np.zeros((T, 0))
    target = np.vstack([np.zeros((dim, r)), np.eye(r)])
    if norm == "frobenius":
        # Z2 = Z0 + null(M) W, least squares in W
        Z0 = np.linalg.lstsq(M, target, rcond=None)[0]
        _, s, Vt = np.linalg.svd(M)
        null = Vt[dm.rank :].T
        if null.shape[1]:
            W = np.linalg.lstsq(S_plus @ null, -S_plus @ Z0, rcond=None)[0]
            Z0 = Z0 + null @ W
        Z2 = Z0
    elif norm == "spectral":
        prob = sdp.build_spectral_norm_problem(S_plus, M, n, m, N)
        sol = sdp.solve(prob)
        if not sol.ok:
            raise SynthesisError(f"Z2 program failed: {sol.status} {sol.info}")
        Z2 = prob.extract(sol.y, "Z2")
    else:
        raise ValueError(f"unknown norm {norm!r}")
    if np.abs(M @ Z2 - target).max() > 1e-7:
        raise SynthesisError("Z2 does not satisfy the data equality", "richness")
    return Z2


@dataclass
class BarrierSolution:
    Pi: np.ndarray
    Y: np.ndarray
    P: np.ndarray
    kappa: float
    info: dict = field(default_factory=dict)


def solve_barrier(dm: DataMatrices, S_plus, varpi: float) -> BarrierSolution:
    prob = sdp.build_barrier_lmi_problem(S_plus, dm.M, varpi)
    sol = sdp.solve(prob)
    if not sol.ok:
        raise SynthesisError(
            f"no quadratic certificate found with varpi={varpi} on this data ({sol.status})", "sdp"
        )
    Pi = prob.extract(sol.y, "Pi")
    Y = prob.extract(sol.y, "Y")
    kappa = float(prob.extract(sol.y, "kappa")[0, 0])
    checks = barrier_residuals(dm.M, S_plus, Pi, Y, varpi)
    if checks["pi_min_eig"] < 1e-8:
        raise SynthesisError("Pi is not positive definite", "sdp")
    if checks["eq_residual"] > 1e-7 or checks["lmi_min_eig"] < -1e-8:
        raise SynthesisError(f"barrier LMI solution inaccurate: {checks}", "sdp")
    P = np.linalg.inv(Pi)
    P = 0.5 * (P + P.T)
    return BarrierSolution(Pi, Y, P, kappa, {**checks, **sol.info})


def barrier_residuals(M, S_plus, Pi, Y, varpi) -> dict:
    dim = Pi.shape[0]
    N = M.shape[0]
    target = np.vstack([Pi, np.zeros((N - dim, dim))])
    SY = S_plus @ Y
    lmi = np.block([[Pi / (1.0 + varpi), SY], [SY.T, Pi]])
    return {
        "eq_residual": float(np.abs(M @ Y - target).max()),
        "lmi_min_eig": float(np.linalg.eigvalsh(0.5 * (lmi + lmi.T))[0]),
        "pi_min_eig": float(np.linalg.eigvalsh(Pi)[0]),
    }


# ---------------------------------------------------------------------------
# decay constant


def _grid(box: Box, res: int) -> np.ndarray:
    axes = [np.linspace(lo, hi, res) for lo, hi in zip(box.lower, box.upper)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.reshape(-1) for g in mesh])


def _pattern_search(f, x0: np.ndarray, box: Box, step0: np.ndarray, iters: int = 200, tol: float = 1e-10):
    """Maximise ``f`` from each column of ``x0`` by compass search in the box."""
    x = x0.copy()
    fx = f(x)
    step = np.broadcast_to(step0[:, None], x.shape).copy()
    dim, k = x.shape
    lo, hi = box.lower[:, None], box.upper[:, None]
    for _ in range(iters):
        improved = np.zeros(k, dtype=bool)
        for i in range(dim):
            for sgn in (1.0, -1.0):
                cand = x.copy()
                cand[i] = np.clip(x[i] + sgn * step[i], lo[i], hi[i])
                fc = f(cand)
                better = fc > fx
                x[:, better] = cand[:, better]
                fx = np.where(better, fc, fx)
                improved |= better
        step[:, ~improved] *= 0.5
        if np.all(step.max(axis=0) < tol):
            break
    return x, fx


def _dense_points(box: Box, grid_res: int, max_points: int, seed: int) -> tuple[np.ndarray, float]:
    """Grid points (or seeded uniform samples when the grid is too large) and
    the covering half-diagonal of a grid cell."""
    if grid_res ** box.dim <= max_points:
        h = box.widths / (grid_res - 1)
        return _grid(box, grid_res), 0.5 * float(np.linalg.norm(h))
    rng = np.random.default_rng(seed)
    pts = box.sample(rng, max_points)
    # nominal spacing of an equally-sized grid
    per_axis = max_points ** (1.0 / box.dim)
    h = box.widths / max(per_axis - 1.0, 1.0)
    return pts, 0.5 * float(np.linalg.norm(h))


def residual_sq(G: np.ndarray, aug_dict: Dictionary, zeta) -> np.ndarray:
    """``|G Psi(zeta)|^2`` for columns of ``zeta``."""
    dim = aug_dict.n
    psi = eval_dictionary(aug_dict, zeta)[dim:]
    return np.sum((G @ psi) ** 2, axis=0)


def max_residual_sq(
    G: np.ndarray,
    aug_dict: Dictionary,
    box: Box,
    grid_res: int = 21,
    n_starts: int = 20,
    max_points: int = 200_000,
    seed: int = 0,
) -> tuple[float, np.ndarray, float]:
    """Grid-seeded multi-start maximisation of ``|G Psi|^2`` over the box.

    Returns (max value, maximiser, grid half-diagonal).
    """
    if G.size == 0 or not np.any(G):
        return 0.0, box.lower.copy(), 0.0
    f = lambda z: residual_sq(G, aug_dict, z)  # noqa: E731
    pts, delta = _dense_points(box, grid_res, max_points, seed)
    vals = np.concatenate([f(pts[:, i : i + 50_000]) for i in range(0, pts.shape[1], 50_000)])
    top = np.argsort(vals)[::-1][:n_starts]
    step0 = box.widths / max(grid_res - 1, 1)
    x, fx = _pattern_search(f, pts[:, top], box, step0)
    best = int(np.argmax(fx))
    return float(fx[best]), x[:, best], delta


def lipschitz_of(f, pts: np.ndarray, box: Box, chunk: int = 20_000) -> float:
    """max over ``pts`` of the central-difference gradient norm of ``f``."""
    dim = pts.shape[0]
    hstep = 1e-6 * np.maximum(box.widths, 1e-12)
    best = 0.0
    for s in range(0, pts.shape[1], chunk):
        p = pts[:, s : s + chunk]
        grad = np.empty_like(p)
        for i in range(dim):
            e = np.zeros((dim, 1))
            e[i] = hstep[i]
            grad[i] = (f(p + e) - f(p - e)) / (2 * hstep[i])
        best = max(best, float(np.sqrt((grad**2).sum(axis=0)).max()))
    return best


def compute_ca(
    P: np.ndarray,
    G: np.ndarray,
    aug_dict: Dictionary,
    box: Box,
    varpi: float,
    grid_res: int = 21,
    sound: bool = False,
    seed: int = 0,
) -> float:
    """Decay constant ``(1 + 1/varpi) lam_max(P) max_box |G Psi|^2``."""
    if G.size == 0 or not np.any(G):
        return 0.0
    peak, _, delta = max_residual_sq(G, aug_dict, box, grid_res=grid_res, seed=seed)
    if sound:
        pts, _ = _dense_points(box, grid_res, 200_000, seed)
        L = 1.1 * lipschitz_of(lambda z: residual_sq(G, aug_dict, z), pts, box)
        peak += L * delta
    lam = float(np.linalg.eigvalsh(P)[-1])
    return (1.0 + 1.0 / varpi) * lam * peak


# ---------------------------------------------------------------------------
# level sets


MAX_VERTICES = 2**20


def max_quadratic_on_box(P: np.ndarray, box: Box) -> float:
    """Exact maximum of ``z^T P z`` (P >= 0) over a box: attained at a vertex."""
    if box.dim > 20:
        raise ValueError(f"vertex enumeration refused for dimension {box.dim}")
    best = -np.inf
    # enumerate in chunks to bound memory
    d = box.dim
    chunk = 1 << min(d, 16)
    for start in range(0, 2**d, chunk):
        ids = np.arange(start, min(start + chunk, 2**d))
        bits = (ids[None, :] >> np.arange(d)[:, None]) & 1
        V = np.where(bits == 1, box.upper[:, None], box.lower[:, None])
        best = max(best, float(np.einsum("ik,ij,jk->k", V, P, V).max()))
    return best


def min_quadratic_on_box(P: np.ndarray, box: Box, tol: float = 1e-10, max_iter: int = 200_000) -> tuple[float, np.ndarray]:
    """Minimise ``z^T P z`` over a box by accelerated projected gradient."""
    lo, hi = box.lower, box.upper
    x = np.clip(np.zeros(box.dim), lo, hi)
    if np.all(x == 0):
        return 0.0, x
    L = 2.0 * float(np.linalg.eigvalsh(P)[-1])
    if L <= 0:
        return 0.0, x
    y, t = x.copy(), 1.0
    fx = x @ P @ x
    for _ in range(max_iter):
        x_new = np.clip(y - (2.0 * P @ y) / L, lo, hi)
        f_new = x_new @ P @ x_new
        if f_new > fx:  # adaptive restart
            y, t = x.copy(), 1.0
            x_new = np.clip(x - (2.0 * P @ x) / L, lo, hi)
            f_new = x_new @ P @ x_new
        t_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
        y = x_new + ((t - 1.0) / t_new) * (x_new - x)
        converged = np.linalg.norm(x_new - x) <= tol * max(1.0, np.linalg.norm(x))
        x, fx, t = x_new, f_new, t_new
        if converged:
            break
    return float(fx), x


def compute_levels(P: np.ndarray, initial_boxes: Sequence[Box], unsafe_boxes: Sequence[Box]) -> tuple[float, float]:
    """Tightest levels: max of the barrier on the initial set, min on the unsafe set."""
    dim = P.shape[0]
    if 2**dim > MAX_VERTICES:
        raise ValueError(f"vertex enumeration refused above {MAX_VERTICES} vertices")
    eta = max(max_quadratic_on_box(P, b) for b in initial_boxes)
    gamma = min(min_quadratic_on_box(P, b)[0] for b in unsafe_boxes)
    return eta, gamma


def compute_levels_conservative(P: np.ndarray, initial_boxes, unsafe_boxes) -> tuple[float, float]:
    """Eigenvalue-bound levels ``lam_max |z|^2`` / ``lam_min |z|^2``."""
    lam = np.linalg.eigvalsh(P)
    far = max(float(np.sum(np.maximum(b.lower**2, b.upper**2))) for b in initial_boxes)
    near = min(float(np.sum(np.clip(0.0, b.lower, b.upper) ** 2)) for b in unsafe_boxes)
    return float(lam[-1]) * far, float(lam[0]) * near


def horizon(eta_a: float, gamma_a: float, c_a: float) -> float:
    """Largest integer T with ``eta_a + c_a T < gamma_a`` (inf when c_a = 0)."""
    if not gamma_a > eta_a:
        raise SynthesisError("level sets do not separate (gamma_a <= eta_a)", "levels")
    if c_a < 0:
        raise ValueError("c_a must be non-negative")
    if c_a == 0:
        return INFINITE_HORIZON
    q = (gamma_a - eta_a) / c_a
    T = math.ceil(q) - 1
    if T < 1:
        raise SynthesisError(f"decay too large: (gamma_a - eta_a)/c_a = {q:.4g} < 1", "levels")
    return T


# ---------------------------------------------------------------------------
# controller


def build_controller(I: np.ndarray, Y: np.ndarray, P: np.ndarray, Z2: np.ndarray, dictionary: Dictionary) -> DynamicController:
    Z = np.hstack([Y @ P, Z2])
    return DynamicController(np.asarray(I, dtype=float) @ Z, dictionary)


def closed_loop_residual(aug: AugmentedModel, K: np.ndarray, S_plus, Z1, Z2, zeta) -> np.ndarray:
    """Gap between the data-based closed loop and the true augmented step."""
    zeta = np.asarray(zeta, dtype=float)
    F = aug.features(zeta)
    dim = aug.dim
    data_side = S_plus @ Z1 @ F[:dim] + S_plus @ Z2 @ F[dim:]
    true_side = aug.A_aug @ F + aug.B @ (K @ F)
    return np.linalg.norm(data_side - true_side, axis=0)
