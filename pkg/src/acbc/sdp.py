"""Standard-form semidefinite programs and the problem builders used by the
synthesis pipeline.

A problem is stored as::

    minimize    c^T y
    subject to  A_eq y = b_eq
                G y <= h
                F0_k + sum_i y_i F_ik  >= 0   (PSD, one per block k)

Equalities are eliminated through a null-space parametrisation before the
reduced problem is handed to CVXOPT's conic solver.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg
import scipy.sparse as sp

log = logging.getLogger(__name__)

FORMAT_VERSION = 1

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
NUMERICAL_FAILURE = "numerical_failure"


class SdpError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# affine matrix expressions


class Affine:
    """Matrix-valued affine map ``y -> const + reshape(lin @ y)``.

    ``lin`` acts on the row-major vectorisation of the matrix.
    """

    __array_ufunc__ = None  # make ``ndarray - Affine`` defer to __rsub__

    def __init__(self, const: np.ndarray, lin: sp.spmatrix):
        self.const = np.atleast_2d(np.asarray(const, dtype=float))
        self.lin = sp.csr_matrix(lin)
        if self.lin.shape[0] != self.const.size:
            raise ValueError("affine map shape mismatch")

    @property
    def shape(self):
        return self.const.shape

    @property
    def nvars(self) -> int:
        return self.lin.shape[1]

    def _resized(self, d: int) -> sp.csr_matrix:
        if self.lin.shape[1] == d:
            return self.lin
        lin = self.lin.tocoo()
        return sp.csr_matrix((lin.data, (lin.row, lin.col)), shape=(lin.shape[0], d))

    @staticmethod
    def _lift(other, shape, d) -> "Affine":
        if isinstance(other, Affine):
            return other
        c = np.broadcast_to(np.asarray(other, dtype=float), shape)
        return Affine(c, sp.csr_matrix((c.size, d)))

    def __add__(self, other):
        o = self._lift(other, self.shape, self.nvars)
        d = max(self.nvars, o.nvars)
        if o.shape != self.shape:
            raise ValueError(f"shape mismatch {self.shape} vs {o.shape}")
        return Affine(self.const + o.const, self._resized(d) + o._resized(d))

    __radd__ = __add__

    def __neg__(self):
        return Affine(-self.const, -self.lin)

    def __sub__(self, other):
        return self + (-self._lift(other, self.shape, self.nvars))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, s: float):
        return Affine(self.const * s, self.lin * s)

    __rmul__ = __mul__

    def __truediv__(self, s: float):
        return self * (1.0 / s)

    def lmul(self, C) -> "Affine":
        """``C @ self`` for a constant matrix ``C``."""
        C = np.atleast_2d(np.asarray(C, dtype=float))
        c = self.shape[1]
        return Affine(C @ self.const, sp.kron(sp.csr_matrix(C), sp.eye(c)) @ self.lin)

    def rmul(self, D) -> "Affine":
        """``self @ D`` for a constant matrix ``D``."""
        D = np.atleast_2d(np.asarray(D, dtype=float))
        r = self.shape[0]
        return Affine(self.const @ D, sp.kron(sp.eye(r), sp.csr_matrix(D.T)) @ self.lin)

    @property
    def T(self) -> "Affine":
        r, c = self.shape
        perm = np.arange(r * c).reshape(r, c).T.reshape(-1)
        return Affine(self.const.T, self.lin[perm])

    def value(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        return self.const + (self._resized(y.size) @ y).reshape(self.shape)

    @staticmethod
    def block(rows) -> "Affine":
        """Assemble a block matrix from a nested list of Affine/array/None."""
        d = max(a.nvars for row in rows for a in row if isinstance(a, Affine))
        heights = []
        for row in rows:
            hs = {np.atleast_2d(a.const if isinstance(a, Affine) else a).shape[0] for a in row if a is not None}
            heights.append(hs.pop())
        widths = []
        for j in range(len(rows[0])):
            ws = {np.atleast_2d(row[j].const if isinstance(row[j], Affine) else row[j]).shape[1] for row in rows if row[j] is not None}
            widths.append(ws.pop())
        R, C = sum(heights), sum(widths)
        const = np.zeros((R, C))
        lin = sp.csr_matrix((R * C, d))
        pieces = []
        r0 = 0
        for i, row in enumerate(rows):
            c0 = 0
            for j, a in enumerate(row):
                h, w = heights[i], widths[j]
                if a is not None:
                    a = Affine._lift(a, (h, w), d)
                    const[r0 : r0 + h, c0 : c0 + w] = a.const
                    idx = ((r0 + np.arange(h))[:, None] * C + (c0 + np.arange(w))[None, :]).reshape(-1)
                    sub = a._resized(d).tocoo()
                    pieces.append((sub.data, idx[sub.row], sub.col))
                c0 += w
            r0 += h
        if pieces:
            data = np.concatenate([p[0] for p in pieces])
            rr = np.concatenate([p[1] for p in pieces])
            cc = np.concatenate([p[2] for p in pieces])
            lin = sp.csr_matrix((data, (rr, cc)), shape=(R * C, d))
        return Affine(const, lin)


# ---------------------------------------------------------------------------
# problem representation


@dataclass
class PsdBlock:
    F0: np.ndarray  # (k, k)
    F: sp.csr_matrix  # (k*k, d); column i is vec(F_i), row-major

    @property
    def size(self) -> int:
        return self.F0.shape[0]

    def value(self, y) -> np.ndarray:
        k = self.size
        return self.F0 + (self.F @ np.asarray(y, dtype=float)).reshape(k, k)


@dataclass
class SdpProblem:
    c: np.ndarray
    A_eq: sp.csr_matrix
    b_eq: np.ndarray
    G: sp.csr_matrix
    h: np.ndarray
    blocks: list
    variables: dict = field(default_factory=dict)  # name -> (index array, shape, kind)
    sense: float = 1.0  # -1.0 when the user objective was a maximisation
    name: str = ""

    @property
    def d(self) -> int:
        return self.c.size

    def extract(self, y, name: str) -> np.ndarray:
        idx, shape, kind = self.variables[name]
        y = np.asarray(y, dtype=float)
        if kind == "sym":
            k = shape[0]
            out = np.zeros((k, k))
            iu = np.triu_indices(k)
            out[iu] = y[idx]
            out.T[iu] = y[idx]
            return out
        return y[idx].reshape(shape)

    def to_json(self) -> dict:
        def triplets(M):
            M = sp.coo_matrix(M)
            return {"shape": list(M.shape), "row": M.row.tolist(), "col": M.col.tolist(), "val": M.data.tolist()}

        return {
            "format_version": FORMAT_VERSION,
            "name": self.name,
            "sense": self.sense,
            "c": self.c.tolist(),
            "A_eq": triplets(self.A_eq),
            "b_eq": self.b_eq.tolist(),
            "G": triplets(self.G),
            "h": self.h.tolist(),
            "blocks": [{"F0": b.F0.tolist(), "F": triplets(b.F)} for b in self.blocks],
            "variables": {
                k: {"index": np.asarray(v[0]).tolist(), "shape": list(v[1]), "kind": v[2]}
                for k, v in self.variables.items()
            },
        }

    @classmethod
    def from_json(cls, obj) -> "SdpProblem":
        def mat(t):
            return sp.csr_matrix((t["val"], (t["row"], t["col"])), shape=tuple(t["shape"]))

        return cls(
            c=np.array(obj["c"], dtype=float),
            A_eq=mat(obj["A_eq"]),
            b_eq=np.array(obj["b_eq"], dtype=float),
            G=mat(obj["G"]),
            h=np.array(obj["h"], dtype=float),
            blocks=[PsdBlock(np.array(b["F0"], dtype=float), mat(b["F"])) for b in obj["blocks"]],
            variables={
                k: (np.array(v["index"], dtype=int), tuple(v["shape"]), v["kind"])
                for k, v in obj["variables"].items()
            },
            sense=obj["sense"],
            name=obj.get("name", ""),
        )

    def dumps(self) -> str:
        return json.dumps(self.to_json())


class SdpBuilder:
    """Accumulates variables and constraints, then freezes an SdpProblem."""

    def __init__(self, name: str = ""):
        self.name = name
        self.d = 0
        self.variables: dict = {}
        self._eq: list[Affine] = []
        self._le: list[Affine] = []
        self._psd: list[Affine] = []
        self._obj: Optional[Affine] = None
        self._sense = 1.0

    def _new(self, count: int) -> np.ndarray:
        idx = np.arange(self.d, self.d + count)
        self.d += count
        return idx

    def var(self, name: str, shape) -> Affine:
        shape = tuple(shape) if np.ndim(shape) else (shape, 1)
        count = int(np.prod(shape))
        idx = self._new(count)
        self.variables[name] = (idx, shape, "dense")
        lin = sp.csr_matrix((np.ones(count), (np.arange(count), idx)), shape=(count, self.d))
        return Affine(np.zeros(shape), lin)

    def sym(self, name: str, k: int) -> Affine:
        count = k * (k + 1) // 2
        idx = self._new(count)
        self.variables[name] = (idx, (k, k), "sym")
        iu, ju = np.triu_indices(k)
        rows = np.concatenate([iu * k + ju, ju * k + iu])
        cols = np.concatenate([idx, idx])
        off = iu != ju
        keep = np.concatenate([np.ones(count, bool), off])
        lin = sp.csr_matrix((np.ones(keep.sum()), (rows[keep], cols[keep])), shape=(k * k, self.d))
        return Affine(np.zeros((k, k)), lin)

    def eq(self, expr: Affine, rhs=0.0):
        self._eq.append(expr - rhs)

    def le(self, expr: Affine, rhs=0.0):
        self._le.append(expr - rhs)

    def psd(self, expr: Affine):
        if expr.shape[0] != expr.shape[1]:
            raise ValueError("PSD block must be square")
        self._psd.append(expr)

    def minimize(self, expr: Affine):
        self._obj, self._sense = expr, 1.0

    def maximize(self, expr: Affine):
        self._obj, self._sense = -expr, -1.0

    def build(self) -> SdpProblem:
        d = self.d

        def stack(exprs):
            if not exprs:
                return sp.csr_matrix((0, d)), np.zeros(0)
            lin = sp.vstack([e._resized(d) for e in exprs]).tocsr()
            const = np.concatenate([e.const.reshape(-1) for e in exprs])
            return lin, const

        A, a0 = stack(self._eq)
        G, g0 = stack(self._le)
        blocks = []
        for e in self._psd:
            const = e.const
            if not np.allclose(const, const.T, atol=1e-12):
                raise ValueError("PSD block constant part is not symmetric")
            lin = e._resized(d)
            k = const.shape[0]
            perm = np.arange(k * k).reshape(k, k).T.reshape(-1)
            if abs(lin - lin[perm]).max() > 1e-12 if lin.nnz else False:
                raise ValueError("PSD block linear part is not symmetric")
            blocks.append(PsdBlock(0.5 * (const + const.T), lin))
        c = np.zeros(d)
        if self._obj is not None:
            if self._obj.const.size != 1:
                raise ValueError("objective must be scalar")
            c = np.asarray(self._obj._resized(d).todense()).reshape(-1)
        return SdpProblem(
            c=c, A_eq=A, b_eq=-a0, G=G, h=-g0, blocks=blocks,
            variables=dict(self.variables), sense=self._sense, name=self.name,
        )


# ---------------------------------------------------------------------------
# solving


@dataclass
class SdpSolution:
    y: np.ndarray
    objective: float
    status: str
    violation: float  # min eigenvalue over PSD blocks (and linear slacks)
    eq_residual: float = 0.0
    info: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.status == OPTIMAL


def _eliminate_equalities(p: SdpProblem, tol: float):
    """Return (y0, Z) with ``{y : A y = b} = {y0 + Z z}`` or None if inconsistent."""
    d = p.d
    if p.A_eq.shape[0] == 0:
        return np.zeros(d), np.eye(d)
    A = p.A_eq.toarray()
    b = p.b_eq
    U, s, Vt = np.linalg.svd(A, full_matrices=True)
    scale = s[0] if s.size and s[0] > 0 else 1.0
    r = int(np.sum(s > max(A.shape) * scale * np.finfo(float).eps * 16))
    y0 = Vt[:r].T @ ((U[:, :r].T @ b) / s[:r])
    res = np.linalg.norm(A @ y0 - b)
    # backward-error scale: ill-conditioned data leaves residuals ~ eps |A| |y0|
    if res > tol * max(1.0, np.linalg.norm(b), scale * np.linalg.norm(y0)):
        return None
    return y0, Vt[r:].T


def _min_eig(M: np.ndarray) -> float:
    if M.size == 0:
        return np.inf
    return float(scipy.linalg.eigvalsh(0.5 * (M + M.T), subset_by_index=[0, 0])[0])


def _violation(p: SdpProblem, y: np.ndarray) -> float:
    v = min((_min_eig(b.value(y)) for b in p.blocks), default=np.inf)
    if p.G.shape[0]:
        v = min(v, float(np.min(p.h - p.G @ y)))
    return float(v) if np.isfinite(v) else 0.0


def solve(p: SdpProblem, tol: float = 1e-8, max_iters: int = 200) -> SdpSolution:
    """Solve ``p``; deterministic for identical inputs."""
    from cvxopt import matrix, solvers

    elim = _eliminate_equalities(p, 1e-9)
    if elim is None:
        return SdpSolution(np.full(p.d, np.nan), np.nan, INFEASIBLE, -np.inf,
                           info={"reason": "inconsistent equality constraints"})
    y0, Z = elim
    k_free = Z.shape[1]

    def finish(y, status, info):
        eq_res = float(np.linalg.norm(p.A_eq @ y - p.b_eq, np.inf)) if p.A_eq.shape[0] else 0.0
        viol = _violation(p, y)
        if status == OPTIMAL and viol < -1e-7:
            info["reason"] = f"returned point violates constraints by {viol:.3g}"
            status = NUMERICAL_FAILURE
        obj = float(p.sense * (p.c @ y))
        return SdpSolution(y, obj, status, viol, eq_res, info)

    if k_free == 0:
        viol = _violation(p, y0)
        status = OPTIMAL if viol >= -tol else INFEASIBLE
        return finish(y0, status, {"reason": "fully determined by equalities"})

    # directions no constraint sees must not affect the objective; drop them
    # so the conic map has full column rank (a cvxopt requirement). The kept
    # directions are whitened: equality elimination through ill-conditioned
    # data otherwise leaves a conic map with a huge spread of column scales.
    H = [np.asarray(p.G @ Z)] if p.G.shape[0] else []
    H += [np.asarray(b.F @ Z) for b in p.blocks]
    if H:
        _, s, Vt = np.linalg.svd(np.vstack(H), full_matrices=False)
        r = int(np.sum(s > (s[0] if s.size else 1.0) * 1e-10))
        if r < k_free:
            Q = Vt[:r].T
            cz = Z.T @ p.c
            if np.linalg.norm(cz - Q @ (Q.T @ cz)) > 1e-9 * max(1.0, np.linalg.norm(cz)):
                return SdpSolution(np.full(p.d, np.nan), np.nan, NUMERICAL_FAILURE, -np.inf,
                                   info={"reason": "objective unbounded along an unconstrained direction"})
        if r:
            Z = Z @ (Vt[:r].T / s[:r])
            k_free = r

    c = Z.T @ p.c
    Gl = hl = None
    if p.G.shape[0]:
        Gl = matrix(np.asarray(p.G @ Z))
        hl = matrix(p.h - p.G @ y0)
    Gs, hs = [], []
    for b in p.blocks:
        k = b.size
        F0 = b.value(y0)
        FZ = np.asarray(b.F @ Z)
        # cvxopt stores matrices column-major; blocks are symmetric so the
        # row-major vectorisation is identical up to the transpose of F_i
        FZ = FZ.reshape(k, k, k_free).transpose(1, 0, 2).reshape(k * k, k_free)
        Gs.append(matrix(-FZ))
        hs.append(matrix(0.5 * (F0 + F0.T)))
    if Gl is None:
        # cvxopt needs at least an empty linear block
        Gl = matrix(np.zeros((0, k_free)))
        hl = matrix(np.zeros(0))

    opts = {"show_progress": False, "abstol": tol, "reltol": tol, "feastol": tol, "maxiters": max_iters}
    try:
        sol = solvers.sdp(matrix(c), Gl=Gl, hl=hl, Gs=Gs or None, hs=hs or None, options=opts)
    except (ValueError, ArithmeticError) as exc:
        return SdpSolution(np.full(p.d, np.nan), np.nan, NUMERICAL_FAILURE, -np.inf,
                           info={"reason": f"solver error: {exc}"})
    st = sol["status"]
    info = {
        "solver_status": st,
        "iterations": sol.get("iterations"),
        "gap": sol.get("gap"),
        "relative_gap": sol.get("relative gap"),
        "primal_infeasibility": sol.get("primal infeasibility"),
        "dual_infeasibility": sol.get("dual infeasibility"),
    }
    if st == "primal infeasible":
        return SdpSolution(np.full(p.d, np.nan), np.nan, INFEASIBLE, -np.inf, info=info)
    if st == "dual infeasible":
        info["reason"] = "objective unbounded"
        return SdpSolution(np.full(p.d, np.nan), np.nan, NUMERICAL_FAILURE, -np.inf, info=info)
    if sol["x"] is None:
        info["reason"] = "solver returned no point"
        return SdpSolution(np.full(p.d, np.nan), np.nan, NUMERICAL_FAILURE, -np.inf, info=info)
    y = y0 + Z @ np.array(sol["x"]).reshape(-1)
    status = OPTIMAL
    if st != "optimal":
        # accept near-optimal points that stall just short of tolerance
        pinf = sol.get("primal infeasibility") or np.inf
        rgap = sol.get("relative gap")
        gap = sol.get("gap")
        close = pinf < 1e-6 and ((rgap is not None and abs(rgap) < 1e-5) or (gap is not None and abs(gap) < 1e-6))
        status = OPTIMAL if close else NUMERICAL_FAILURE
        info["inaccurate"] = True
    return finish(y, status, info)


# ---------------------------------------------------------------------------
# problem builders


def _nonlinear_target(N: int, dim: int) -> np.ndarray:
    r = N - dim
    return np.vstack([np.zeros((dim, r)), np.eye(r)])


def build_spectral_norm_problem(S_plus, M, n: int, m: int, N: int) -> SdpProblem:
    """min ||S+ Z2||_2  s.t.  M Z2 = [0; I]  via the epigraph LMI."""
    S_plus = np.asarray(S_plus, dtype=float)
    M = np.asarray(M, dtype=float)
    dim = n + m
    r = N - dim
    T = M.shape[1]
    if r <= 0:
        raise ValueError("dictionary has no nonlinear terms")
    b = SdpBuilder("spectral_norm")
    Z2 = b.var("Z2", (T, r))
    t = b.var("t", (1, 1))
    b.eq(Z2.lmul(M), _nonlinear_target(N, dim))
    SZ = Z2.lmul(S_plus)
    top = _scalar_times_eye(t, dim)
    bot = _scalar_times_eye(t, r)
    b.psd(Affine.block([[top, SZ], [SZ.T, bot]]))
    b.minimize(t)
    return b.build()


def _scalar_times_eye(s: Affine, k: int) -> Affine:
    """``s * I_k`` for a 1x1 affine ``s``."""
    lin = s.lin.tocoo()
    diag = np.arange(k) * (k + 1)
    rows = np.repeat(diag, lin.nnz)
    cols = np.tile(lin.col, k)
    data = np.tile(lin.data, k)
    return Affine(s.const[0, 0] * np.eye(k), sp.csr_matrix((data, (rows, cols)), shape=(k * k, s.nvars)))


KAPPA_MIN = 1e-6


def build_barrier_lmi_problem(S_plus, M, varpi: float, margin: float = 1e-7) -> SdpProblem:
    """Find Pi > 0, Y with M Y = [Pi; 0] and the decrease LMI, maximising
    the smallest eigenvalue of Pi under the normalisation Pi <= I."""
    if not varpi > 0:
        raise ValueError("varpi must be positive")
    S_plus = np.asarray(S_plus, dtype=float)
    M = np.asarray(M, dtype=float)
    dim = S_plus.shape[0]
    N, T = M.shape
    b = SdpBuilder("barrier_lmi")
    Pi = b.sym("Pi", dim)
    Y = b.var("Y", (T, dim))
    kappa = b.var("kappa", (1, 1))
    rhs = Affine.block([[Pi], [np.zeros((N - dim, dim))]]) if N > dim else Pi
    b.eq(Y.lmul(M) - rhs)
    SY = Y.lmul(S_plus)
    lmi = Affine.block([[Pi / (1.0 + varpi), SY], [SY.T, Pi]])
    b.psd(lmi - margin * np.eye(2 * dim))
    b.psd(Pi - _scalar_times_eye(kappa, dim))
    b.psd(np.eye(dim) - Pi)
    b.le(-kappa, -KAPPA_MIN)
    b.maximize(kappa)
    return b.build()


def quad_coefficients(W: np.ndarray) -> np.ndarray:
    """Rows give ``w^T P w`` as linear functions of the upper triangle of P.

    ``W`` holds one vector ``w`` per column; ordering matches ``SdpBuilder.sym``.
    """
    k = W.shape[0]
    iu, ju = np.triu_indices(k)
    coef = W[iu] * W[ju]
    coef[iu != ju] *= 2.0
    return coef.T


P_FLOOR = 1e-8


def build_scp_problem(
    psi_samples: np.ndarray,
    G: np.ndarray,
    varpi: float,
    mode: str = "with_mu",
    p_floor: float = P_FLOOR,
) -> SdpProblem:
    """Scenario program over sampled nonlinear residuals.

    ``psi_samples`` holds the nonlinear dictionary tail at each sample point
    (one column per sample) and ``G = S+ Z2``.
    """
    if mode not in ("with_mu", "ca_only"):
        raise ValueError(f"unknown mode {mode!r}")
    if not varpi > 0:
        raise ValueError("varpi must be positive")
    psi_samples = np.asarray(psi_samples, dtype=float)
    if psi_samples.ndim != 2 or psi_samples.shape[1] == 0:
        raise ValueError("scenario program needs at least one sample")
    G = np.asarray(G, dtype=float)
    dim = G.shape[0]
    W = G @ psi_samples
    b = SdpBuilder(f"scp_{mode}")
    P = b.sym("P", dim)
    c_a = b.var("c_a", (1, 1))
    coef = (1.0 + 1.0 / varpi) * quad_coefficients(W)
    K = coef.shape[0]
    nP = dim * (dim + 1) // 2
    g = Affine(np.zeros((K, 1)), sp.hstack([sp.csr_matrix(coef), sp.csr_matrix((K, b.d - nP))]))
    rhs = c_a.lmul(np.ones((K, 1)))
    if mode == "with_mu":
        mu = b.var("mu", (1, 1))
        b.le(g - rhs - mu.lmul(np.ones((K, 1))))
        b.le(mu)
        b.minimize(mu + c_a)
    else:
        b.le(g - rhs)
        b.minimize(c_a)
    b.le(-c_a)
    b.psd(P - p_floor * np.eye(dim))
    return b.build()


def build_coupled_scenario_problem(S_plus, M, W: np.ndarray, varpi: float, margin: float = 1e-7) -> SdpProblem:
    """Scenario program posed in ``Pi = P^-1`` together with the data LMI.

    Each column ``w`` of ``W`` contributes ``(1 + 1/varpi) w^T Pi^-1 w <= c_a``
    as a Schur block; ``Pi <= I`` fixes the scale. Minimises ``c_a``.
    """
    if not varpi > 0:
        raise ValueError("varpi must be positive")
    S_plus = np.asarray(S_plus, dtype=float)
    M = np.asarray(M, dtype=float)
    dim = S_plus.shape[0]
    N, T = M.shape
    b = SdpBuilder("coupled_scenario")
    Pi = b.sym("Pi", dim)
    Y = b.var("Y", (T, dim))
    c_a = b.var("c_a", (1, 1))
    rhs = Affine.block([[Pi], [np.zeros((N - dim, dim))]]) if N > dim else Pi
    b.eq(Y.lmul(M) - rhs)
    SY = Y.lmul(S_plus)
    b.psd(Affine.block([[Pi / (1.0 + varpi), SY], [SY.T, Pi]]) - margin * np.eye(2 * dim))
    b.psd(np.eye(dim) - Pi)
    b.psd(Pi - margin * np.eye(dim))
    s = np.sqrt(1.0 + 1.0 / varpi)
    for w in np.asarray(W, dtype=float).T:
        col = s * w.reshape(-1, 1)
        b.psd(Affine.block([[c_a, col.T], [col, Pi]]))
    b.le(-c_a)
    b.minimize(c_a)
    return b.build()


def build_y_given_pi_problem(S_plus, M, Pi: np.ndarray, varpi: float) -> SdpProblem:
    """With ``Pi`` fixed, maximise the smallest eigenvalue ``t <= 1`` of the
    decrease LMI over ``Y``; ``t >= 0`` means a data-consistent ``Y`` exists."""
    S_plus = np.asarray(S_plus, dtype=float)
    M = np.asarray(M, dtype=float)
    Pi = np.asarray(Pi, dtype=float)
    dim = S_plus.shape[0]
    N, T = M.shape
    b = SdpBuilder("y_given_pi")
    Y = b.var("Y", (T, dim))
    t = b.var("t", (1, 1))
    rhs = np.vstack([Pi, np.zeros((N - dim, dim))])
    b.eq(Y.lmul(M), rhs)
    SY = Y.lmul(S_plus)
    lmi = Affine.block([[Pi / (1.0 + varpi), SY], [SY.T, Pi]])
    b.psd(lmi - _scalar_times_eye(t, 2 * dim))
    b.le(t, 1.0)
    b.maximize(t)
    return b.build()
