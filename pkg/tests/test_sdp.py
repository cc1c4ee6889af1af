import numpy as np
import pytest

from acbc import sdp
from acbc.sdp import SdpBuilder, SdpProblem, solve


def _sym(rng, k):
    A = rng.normal(size=(k, k))
    return 0.5 * (A + A.T)


def test_max_t_gives_min_eigenvalue(rng):
    A = _sym(rng, 5)
    b = SdpBuilder("mineig")
    t = b.var("t", 1)
    b.psd(A - sdp._scalar_times_eye(t, 5))
    b.maximize(t)
    sol = solve(b.build())
    assert sol.ok
    assert sol.objective == pytest.approx(np.linalg.eigvalsh(A)[0], abs=1e-6)


def _trace(X):
    k = X.shape[0]
    out = None
    for i in range(k):
        e = np.zeros((1, k))
        e[0, i] = 1.0
        term = X.lmul(e).rmul(e.T)
        out = term if out is None else out + term
    return out


def test_equality_pins_entry(rng):
    # min trace(X) s.t. X >= C, X[0,0] = v
    C = _sym(rng, 3)
    v = 3.0 + max(C[0, 0], 0.0)
    e0 = np.array([[1.0, 0.0, 0.0]])
    b = SdpBuilder()
    X = b.sym("X", 3)
    b.psd(X - C)
    b.eq(X.lmul(e0).rmul(e0.T), v)
    b.minimize(_trace(X))
    p = b.build()
    sol = solve(p)
    assert sol.ok
    Xm = p.extract(sol.y, "X")
    assert np.linalg.eigvalsh(Xm - C)[0] >= -1e-7
    assert Xm[0, 0] == pytest.approx(v, abs=1e-7)


def test_infeasible_is_reported():
    b = SdpBuilder()
    t = b.var("t", 1)
    b.psd(sdp._scalar_times_eye(t, 2) - np.eye(2))  # t >= 1
    b.le(t, 0.0)  # t <= 0
    b.minimize(t)
    assert solve(b.build()).status == sdp.INFEASIBLE


def test_inconsistent_equalities():
    b = SdpBuilder()
    t = b.var("t", 1)
    b.eq(t, 1.0)
    b.eq(t, 2.0)
    b.minimize(t)
    assert solve(b.build()).status == sdp.INFEASIBLE


def test_problem_json_round_trip(rng):
    A = _sym(rng, 4)
    b = SdpBuilder("rt")
    t = b.var("t", 1)
    b.psd(A - sdp._scalar_times_eye(t, 4))
    b.maximize(t)
    p = b.build()
    q = SdpProblem.from_json(p.to_json())
    s1, s2 = solve(p), solve(q)
    assert np.array_equal(s1.y, s2.y)


def test_solve_is_deterministic(rng):
    A = _sym(rng, 6)
    b = SdpBuilder()
    t = b.var("t", 1)
    b.psd(A - sdp._scalar_times_eye(t, 6))
    b.maximize(t)
    p = b.build()
    assert np.array_equal(solve(p).y, solve(p).y)


def test_spectral_norm_problem_matches_direct_norm(case1_synth):
    dm, S_plus = case1_synth.data.dm, case1_synth.data.traj.S_plus
    aug = case1_synth.aug
    p = sdp.build_spectral_norm_problem(S_plus, dm.M, aug.n, aug.m, aug.N)
    sol = solve(p)
    assert sol.ok
    Z2 = p.extract(sol.y, "Z2")
    target = np.vstack([np.zeros((aug.dim, aug.N - aug.dim)), np.eye(aug.N - aug.dim)])
    np.testing.assert_allclose(dm.M @ Z2, target, atol=1e-7)
    # the epigraph variable equals the achieved spectral norm, and no pinv solution beats it
    assert np.linalg.norm(S_plus @ Z2, 2) <= np.linalg.norm(S_plus @ np.linalg.pinv(dm.M) @ target, 2) + 1e-6


def test_barrier_lmi_solution_is_feasible(case1_synth):
    r = case1_synth.report["barrier"]
    assert r["eq_residual"] <= 1e-6
    assert r["lmi_min_eig"] >= -1e-7
    assert r["pi_min_eig"] > 0
