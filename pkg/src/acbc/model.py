"""Plant models, regions of interest and the integrator augmentation.

The plant is ``x+ = A f(x, u)`` with a known dictionary ``f`` and an unknown
coefficient matrix ``A``; ``A`` is kept here only so simulations can play the
role of the real system. Augmenting with one integrator turns the input into a
state, ``zeta = (x, u)``, driven by a virtual input ``v`` through ``u+ = v``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import linprog

from .expr import Dictionary, Var, eval_dictionary, map_variables

DEFAULT_EPS1 = 1.0 / 1500.0
DEFAULT_EPS2 = 1499.0 / 1500.0


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class Box:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float).reshape(-1)
        hi = np.asarray(self.upper, dtype=float).reshape(-1)
        if lo.shape != hi.shape:
            raise ModelError("box bounds differ in length")
        if np.any(lo > hi):
            raise ModelError(f"box lower bound exceeds upper bound: {lo} > {hi}")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Box):
            return NotImplemented
        return bool(np.array_equal(self.lower, other.lower) and np.array_equal(self.upper, other.upper))

    __hash__ = None

    @property
    def dim(self) -> int:
        return self.lower.size

    @property
    def widths(self) -> np.ndarray:
        return self.upper - self.lower

    def product(self, other: "Box") -> "Box":
        return Box(
            np.concatenate([self.lower, other.lower]),
            np.concatenate([self.upper, other.upper]),
        )

    def contains(self, p) -> np.ndarray | bool:
        p = np.asarray(p, dtype=float)
        if p.shape[0] != self.dim:
            raise ModelError(f"point has dimension {p.shape[0]}, box has {self.dim}")
        lo = self.lower.reshape((-1,) + (1,) * (p.ndim - 1))
        hi = self.upper.reshape((-1,) + (1,) * (p.ndim - 1))
        inside = np.all((p >= lo) & (p <= hi), axis=0)
        return bool(inside) if p.ndim == 1 else inside

    def intersects(self, other: "Box") -> bool:
        return bool(np.all(self.lower <= other.upper) and np.all(other.lower <= self.upper))

    def is_subset_of(self, other: "Box") -> bool:
        return bool(np.all(self.lower >= other.lower) and np.all(self.upper <= other.upper))

    def vertices(self) -> np.ndarray:
        """All ``2**dim`` corners as columns."""
        d = self.dim
        bits = (np.arange(2**d)[None, :] >> np.arange(d)[:, None]) & 1
        return np.where(bits == 1, self.upper[:, None], self.lower[:, None])

    def sample(self, rng: np.random.Generator, k: int) -> np.ndarray:
        return rng.uniform(self.lower[:, None], self.upper[:, None], size=(self.dim, k))

    def to_json(self) -> dict:
        return {"lower": self.lower.tolist(), "upper": self.upper.tolist()}

    @classmethod
    def from_json(cls, obj) -> "Box":
        return cls(obj["lower"], obj["upper"])


def contains(region: Sequence[Box], p) -> np.ndarray | bool:
    """Membership in a union of closed boxes."""
    p = np.asarray(p, dtype=float)
    if not region:
        return False if p.ndim == 1 else np.zeros(p.shape[1:], dtype=bool)
    hit = region[0].contains(p)
    for b in region[1:]:
        hit = hit | b.contains(p)
    return hit


def sample_union(boxes: Sequence[Box], rng: np.random.Generator, k: int) -> np.ndarray:
    """Uniform samples over a union of boxes (overlaps are double-counted)."""
    if len(boxes) == 1:
        return boxes[0].sample(rng, k)
    vol = np.array([np.prod(b.widths) for b in boxes])
    p = vol / vol.sum() if vol.sum() > 0 else np.full(len(boxes), 1.0 / len(boxes))
    which = rng.choice(len(boxes), size=k, p=p)
    out = np.empty((boxes[0].dim, k))
    for i, b in enumerate(boxes):
        idx = np.flatnonzero(which == i)
        out[:, idx] = b.sample(rng, idx.size)
    return out


@dataclass(frozen=True)
class RegionSpec:
    state_box: Box
    initial_boxes: tuple
    unsafe_boxes: tuple

    def __post_init__(self):
        object.__setattr__(self, "initial_boxes", tuple(self.initial_boxes))
        object.__setattr__(self, "unsafe_boxes", tuple(self.unsafe_boxes))
        for b in self.initial_boxes + self.unsafe_boxes:
            if b.dim != self.state_box.dim:
                raise ModelError("region box dimension differs from the state box")
            if not b.is_subset_of(self.state_box):
                raise ModelError("initial and unsafe boxes must lie in the state box")
        for a in self.initial_boxes:
            for b in self.unsafe_boxes:
                if a.intersects(b):
                    raise ModelError("initial and unsafe sets intersect")


@dataclass(frozen=True)
class InputConstraints:
    """Rows ``C_j`` of the admissible set ``{u : C_j^T u <= 1}``."""

    C: np.ndarray

    def __post_init__(self):
        C = np.atleast_2d(np.asarray(self.C, dtype=float))
        object.__setattr__(self, "C", C)
        m = C.shape[1]
        # bounded iff the LP max/min of each coordinate is finite
        for i in range(m):
            for sign in (1.0, -1.0):
                c = np.zeros(m)
                c[i] = -sign
                res = linprog(c, A_ub=C, b_ub=np.ones(len(C)), bounds=[(None, None)] * m)
                if res.status != 0:
                    raise ModelError("input constraint set is unbounded or empty")

    @property
    def m(self) -> int:
        return self.C.shape[1]

    @classmethod
    def from_bounds(cls, lower, upper) -> "InputConstraints":
        lower = np.asarray(lower, dtype=float)
        upper = np.asarray(upper, dtype=float)
        if np.any(lower >= 0) or np.any(upper <= 0):
            raise ModelError("input bounds must straddle zero (C_j^T u <= 1 form)")
        rows = []
        for i in range(lower.size):
            e = np.zeros(lower.size)
            e[i] = 1.0
            rows.append(e / upper[i])
            rows.append(e / lower[i])
        return cls(np.array(rows))

    def box_bounds(self) -> Optional[tuple[np.ndarray, np.ndarray]]:
        """Per-coordinate bounds when every row is axis-aligned, else None."""
        m = self.m
        lo = np.full(m, -np.inf)
        hi = np.full(m, np.inf)
        for row in self.C:
            nz = np.flatnonzero(row)
            if nz.size != 1:
                return None
            i = nz[0]
            if row[i] > 0:
                hi[i] = min(hi[i], 1.0 / row[i])
            else:
                lo[i] = max(lo[i], 1.0 / row[i])
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            return None
        return lo, hi

    def satisfied(self, u) -> np.ndarray | bool:
        u = np.asarray(u, dtype=float)
        ok = np.all(self.C @ u <= 1.0, axis=0)
        return bool(ok) if u.ndim == 1 else ok


@dataclass(frozen=True)
class PlantModel:
    dictionary: Dictionary
    A: Optional[np.ndarray]
    regions: RegionSpec
    inputs: InputConstraints

    def __post_init__(self):
        d = self.dictionary
        if self.regions.state_box.dim != d.n:
            raise ModelError("state box dimension does not match the dictionary")
        if self.inputs.m != d.m:
            raise ModelError("input constraints do not match the dictionary")
        if self.A is not None:
            A = np.asarray(self.A, dtype=float)
            if A.shape != (d.n, d.N):
                raise ModelError(f"A must be {d.n}x{d.N}, got {A.shape}")
            object.__setattr__(self, "A", A)

    @property
    def n(self) -> int:
        return self.dictionary.n

    @property
    def m(self) -> int:
        return self.dictionary.m

    def step(self, x, u) -> np.ndarray:
        if self.A is None:
            raise ModelError("plant has no simulation matrix")
        return self.A @ eval_dictionary(self.dictionary, x, u)


@dataclass(frozen=True)
class AugmentedModel:
    """Integrator-augmented system ``zeta+ = A_aug F(zeta) + B v``."""

    plant: PlantModel
    aug_dictionary: Dictionary
    A_aug: Optional[np.ndarray]
    B: np.ndarray
    eps1: float
    eps2: float
    state_box: Box
    initial_boxes: tuple
    unsafe_boxes: tuple
    input_box: Box  # admissible U (for reporting)
    meta: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.plant.n

    @property
    def m(self) -> int:
        return self.plant.m

    @property
    def dim(self) -> int:
        return self.plant.n + self.plant.m

    @property
    def N(self) -> int:
        return self.aug_dictionary.N

    def features(self, zeta) -> np.ndarray:
        return eval_dictionary(self.aug_dictionary, zeta)

    def psi(self, zeta) -> np.ndarray:
        """Nonlinear tail of the augmented dictionary."""
        return self.features(zeta)[self.dim :]

    def step(self, zeta, v) -> np.ndarray:
        if self.A_aug is None:
            raise ModelError("augmented model has no simulation matrix")
        return self.A_aug @ self.features(zeta) + self.B @ np.asarray(v, dtype=float)


def augment_dictionary(d: Dictionary) -> Dictionary:
    """Re-index every input ``u_k`` as state ``x_{n+k}``."""
    n = d.n

    def reindex(v: Var) -> Var:
        return Var("state", n + v.index) if v.kind == "input" else v

    return Dictionary(n + d.m, 0, tuple(map_variables(t, reindex) for t in d.terms))


def augment(
    plant: PlantModel, eps1: float = DEFAULT_EPS1, eps2: float = DEFAULT_EPS2
) -> AugmentedModel:
    if not (0.0 < eps1 < 1.0 and 0.0 < eps2 < 1.0):
        raise ModelError(f"eps1 and eps2 must lie in (0, 1), got {eps1}, {eps2}")
    bounds = plant.inputs.box_bounds()
    if bounds is None:
        raise ModelError("only axis-aligned (box) input constraints are supported")
    u_lo, u_hi = bounds
    n, m, N = plant.n, plant.m, plant.dictionary.N

    A_aug = None
    if plant.A is not None:
        A_aug = np.vstack([plant.A, np.zeros((m, N))])
    B = np.vstack([np.zeros((n, m)), np.eye(m)])

    X = plant.regions.state_box
    zeta2_box = Box((1.0 + eps1) * u_lo, (1.0 + eps1) * u_hi)
    zeta2_init = Box((1.0 - eps2) * u_lo, (1.0 - eps2) * u_hi)

    state_box = X.product(zeta2_box)
    initial = tuple(b.product(zeta2_init) for b in plant.regions.initial_boxes)
    unsafe = [b.product(zeta2_box) for b in plant.regions.unsafe_boxes]
    # input bands: the closed shell between the admissible box and its inflation
    for i in range(m):
        for lo_i, hi_i in ((zeta2_box.lower[i], u_lo[i]), (u_hi[i], zeta2_box.upper[i])):
            lo = zeta2_box.lower.copy()
            hi = zeta2_box.upper.copy()
            lo[i], hi[i] = lo_i, hi_i
            unsafe.append(X.product(Box(lo, hi)))

    aug_dict = augment_dictionary(plant.dictionary)
    aug_dict.check_ln_domain(state_box.lower, state_box.upper)
    return AugmentedModel(
        plant=plant,
        aug_dictionary=aug_dict,
        A_aug=A_aug,
        B=B,
        eps1=eps1,
        eps2=eps2,
        state_box=state_box,
        initial_boxes=initial,
        unsafe_boxes=tuple(unsafe),
        input_box=Box(u_lo, u_hi),
    )
