"""End-to-end commands. Each returns plain data; file output lives in ``cli``."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import scenario as scn
from .config import FORMAT_VERSION, RunConfig
from .data import DataMatrices, TrajectoryData, assemble_M, check_richness, collect_trajectory
from .model import AugmentedModel, Box, augment
from .synth import (
    Certificate,
    DynamicController,
    SynthesisError,
    barrier_residuals,
    build_controller,
    compute_ca,
    compute_levels,
    compute_levels_conservative,
    horizon,
    solve_barrier,
    solve_z2,
)
from .verify import VerificationReport, Rollouts, rollout, rollout_horizon, verify_all


def _horizon_json(T: float):
    return "inf" if math.isinf(T) else int(T)


def build_augmented(cfg: RunConfig) -> AugmentedModel:
    a = cfg.section("augmentation")
    return augment(cfg.plant, a["eps1"], a["eps2"])


@dataclass
class DataStage:
    traj: TrajectoryData
    dm: DataMatrices
    attempts: list


def collect_rich(aug: AugmentedModel, cfg: RunConfig) -> DataStage:
    """Collect one trajectory; on rank deficiency retry with twice the length.

    Too few samples (``T < N + 1``) is a configuration error and is not retried.
    """
    exp = cfg.section("experiment")
    T, seed = int(exp["T"]), int(exp["seed"])
    N = aug.N
    if T < N + 1:
        raise SynthesisError(f"experiment length T={T} is below N+1={N + 1}; data cannot be rich", "richness")
    exc = exp.get("excitation")
    exc_box = Box.from_json(exc) if exc else None
    attempts = []
    for _ in range(int(exp["richness_retries"]) + 1):
        traj = collect_trajectory(aug, T, excitation=exc_box, seed=seed)
        dm = assemble_M(traj, aug.aug_dictionary)
        ok = check_richness(dm)
        attempts.append({"T": T, "rank": dm.rank, "rich": ok})
        if ok:
            return DataStage(traj, dm, attempts)
        T *= 2
    raise SynthesisError(
        f"data not rich after {len(attempts)} attempts (rank {dm.rank} < N={N})", "richness"
    )


@dataclass
class SynthesisResult:
    aug: AugmentedModel
    data: DataStage
    Z2: np.ndarray
    Y: np.ndarray
    P: np.ndarray
    cert: Certificate
    ctrl: DynamicController
    report: dict
    extra: dict = field(default_factory=dict)


def _levels(P: np.ndarray, aug: AugmentedModel, mode: str) -> tuple[float, float]:
    if mode == "conservative":
        return compute_levels_conservative(P, aug.initial_boxes, aug.unsafe_boxes)
    return compute_levels(P, aug.initial_boxes, aug.unsafe_boxes)


def _base_report(command: str, cfg: RunConfig, data: DataStage, aug: AugmentedModel, Z2, G) -> dict:
    exp = cfg.section("experiment")
    return {
        "format_version": FORMAT_VERSION,
        "command": command,
        "config_name": cfg.raw.get("name"),
        "config_digest": cfg.digest(),
        "experiment": {
            "seed": int(exp["seed"]),
            "T": data.traj.T,
            "N": aug.N,
            "rank": data.dm.rank,
            "attempts": data.attempts,
        },
        "z2": {
            "norm": cfg.section("synthesis")["z2_norm"],
            "spectral_norm": float(np.linalg.norm(G, 2)) if G.size else 0.0,
            "eq_residual": float(np.abs(data.dm.M @ Z2 - _target(aug)).max()) if Z2.size else 0.0,
        },
    }


def _target(aug: AugmentedModel) -> np.ndarray:
    r = aug.N - aug.dim
    return np.vstack([np.zeros((aug.dim, r)), np.eye(r)])


def _front(cfg: RunConfig):
    aug = build_augmented(cfg)
    data = collect_rich(aug, cfg)
    S_plus = data.traj.S_plus
    Z2 = solve_z2(data.dm, S_plus, aug.n, aug.m, norm=cfg.section("synthesis")["z2_norm"])
    return aug, data, Z2, S_plus @ Z2


def run_synthesize(cfg: RunConfig) -> SynthesisResult:
    t0 = time.perf_counter()
    syn = cfg.section("synthesis")
    aug, data, Z2, G = _front(cfg)
    S_plus = data.traj.S_plus

    candidates = [float(syn["varpi"])]
    for v in syn["varpi_sweep"] or []:
        if float(v) not in candidates:
            candidates.append(float(v))
    sweep, best, last_err = [], None, None
    for varpi in candidates:
        try:
            bs = solve_barrier(data.dm, S_plus, varpi)
            c_a = compute_ca(bs.P, G, aug.aug_dictionary, aug.state_box, varpi,
                             grid_res=int(syn["grid_res"]), sound=bool(syn["sound"]),
                             seed=int(cfg.section("experiment")["seed"]))
            eta, gamma = _levels(bs.P, aug, syn["levels"])
            T = horizon(eta, gamma, c_a)
        except SynthesisError as exc:
            sweep.append({"varpi": varpi, "status": exc.kind, "message": str(exc)})
            last_err = exc
            continue
        sweep.append({"varpi": varpi, "status": "ok", "horizon_T": _horizon_json(T)})
        if best is None or T > best[0]:
            best = (T, varpi, bs, c_a, eta, gamma)
    if best is None:
        raise last_err
    T, varpi, bs, c_a, eta, gamma = best
    cert = Certificate(bs.P, eta, gamma, c_a, varpi, T)
    ctrl = build_controller(data.traj.I, bs.Y, bs.P, Z2, cfg.plant.dictionary)

    report = _base_report("synthesize", cfg, data, aug, Z2, G)
    report["barrier"] = {
        "varpi": varpi,
        "kappa": bs.kappa,
        "eq_residual": bs.info["eq_residual"],
        "lmi_min_eig": bs.info["lmi_min_eig"],
        "pi_min_eig": bs.info["pi_min_eig"],
    }
    if len(candidates) > 1:
        report["varpi_sweep"] = sweep
    report["levels_mode"] = syn["levels"]
    report["c_a_mode"] = "sound" if syn["sound"] else "pattern_search"
    report["certificate"] = cert.to_json()
    report["controller"] = ctrl.to_json()
    report["timing"] = {"total_s": time.perf_counter() - t0}
    return SynthesisResult(aug, data, Z2, bs.Y, bs.P, cert, ctrl, report)


def run_scenario(cfg: RunConfig) -> SynthesisResult:
    """Decay constant from samples, then the controller for that ``P``.

    The scenario program alone fixes ``P`` without looking at the data LMI;
    when no ``Y`` completes it, ``coupling = "auto"`` re-solves the sample
    constraints together with the LMI over ``(Pi, Y, c_a)``.
    """
    t0 = time.perf_counter()
    syn, sc = cfg.section("synthesis"), cfg.section("scenario")
    if sc["path"] == "none":
        raise SynthesisError("scenario.path is 'none'; nothing to do", "config")
    varpi = float(syn["varpi"])
    aug, data, Z2, G = _front(cfg)
    S_plus, M = data.traj.S_plus, data.dm.M
    box, adict, dim = aug.state_box, aug.aug_dictionary, aug.dim
    seed = int(sc["seed"])
    # separate substreams: scenario draws, coupled draws, audit draws
    s_draw, s_coupled, s_audit = (int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(3))

    section: dict = {"path": sc["path"], "varpi": varpi, "coupling": sc["coupling"]}
    if sc["path"] == "probabilistic":
        params = scn.ScenarioParams(sc["epsilon"], sc["beta"], s_draw, sc["n_samples"])
        lit = scn.solve_probabilistic(params, box, G, adict, varpi)
        section["scenario_program"] = {**lit.to_json(), "P": lit.P.tolist()}
        P, c_a = lit.P, lit.c_a
    else:
        grid = scn.GridSpec.uniform(int(sc["grid_counts"]), dim)
        det = scn.solve_deterministic(box, grid, G, adict, varpi, rounds=int(sc["grid_rounds"]))
        section["scenario_program"] = {**det.to_json(), "P": det.P.tolist()}
        if not det.passed:
            raise SynthesisError("grid-to-box check failed after refinement", "check")
        P, c_a = det.P, det.c_a

    Y = scn.solve_y_given_P(M, S_plus, P, varpi)
    section["y_for_scenario_P"] = Y is not None
    if Y is None:
        if sc["coupling"] == "off":
            raise SynthesisError(
                "the scenario P admits no data-consistent Y; retry with another varpi or seed, "
                "or enable scenario.coupling", "scenario_no_y")
        if sc["path"] == "probabilistic":
            n_dec = scn.coupled_decisions(dim, data.traj.T, data.dm.rank)
            n = scn.decision_sample_count(sc["epsilon"], sc["beta"], n_dec)
            samples = scn.iid_samples(box, n, s_coupled)
            cr = scn.solve_coupled(S_plus, M, G, adict, samples, varpi)
            P, c_a, Y = cr.P, cr.c_a, cr.Y
            section["coupled"] = {
                "route": "probabilistic",
                "epsilon": sc["epsilon"],
                "beta": sc["beta"],
                "n_decisions": n_dec,
                "n_samples": n,
                "seed": s_coupled,
                "rounds": cr.rounds,
                "active_samples": cr.active,
                "c_a": c_a,
            }
        else:
            pts, _ = scn.grid_samples(box, scn.GridSpec.uniform(int(sc["grid_counts"]), dim))
            cr = scn.solve_coupled(S_plus, M, G, adict, pts, varpi)
            det = scn.solve_deterministic(box, scn.GridSpec.uniform(int(sc["grid_counts"]), dim), G, adict,
                                          varpi, rounds=int(sc["grid_rounds"]), P_fixed=cr.P)
            if not det.passed:
                raise SynthesisError("grid-to-box check failed for the coupled design", "check")
            P, c_a, Y = cr.P, det.c_a, cr.Y
            section["coupled"] = {**det.to_json(), "rounds": cr.rounds, "active_samples": cr.active}

    Pi = np.linalg.inv(P)
    checks = barrier_residuals(M, S_plus, 0.5 * (Pi + Pi.T), Y, varpi)
    if checks["eq_residual"] > 1e-6 or checks["lmi_min_eig"] < -1e-7:
        raise SynthesisError(f"controller completion inaccurate: {checks}", "sdp")
    eta, gamma = _levels(P, aug, syn["levels"])
    T = horizon(eta, gamma, c_a)
    cert = Certificate(P, eta, gamma, c_a, varpi, T)
    ctrl = build_controller(data.traj.I, Y, P, Z2, cfg.plant.dictionary)
    section["audit"] = {
        "samples": int(sc["audit_samples"]),
        "seed": s_audit,
        "violation_fraction": scn.violation_fraction(P, c_a, G, adict, box, varpi, int(sc["audit_samples"]), s_audit),
    }

    report = _base_report("scenario", cfg, data, aug, Z2, G)
    report["barrier"] = {"varpi": varpi, **checks}
    report["scenario"] = section
    report["levels_mode"] = syn["levels"]
    report["certificate"] = cert.to_json()
    report["controller"] = ctrl.to_json()
    report["timing"] = {"total_s": time.perf_counter() - t0}
    return SynthesisResult(aug, data, Z2, Y, P, cert, ctrl, report)


def load_artifacts(report: dict) -> tuple[Certificate, DynamicController]:
    if report.get("format_version") != FORMAT_VERSION:
        raise ValueError(f"unsupported report format_version {report.get('format_version')}")
    return Certificate.from_json(report["certificate"]), DynamicController.from_json(report["controller"])


def run_verify(cfg: RunConfig, report: dict) -> tuple[VerificationReport, Rollouts, dict]:
    t0 = time.perf_counter()
    cert, ctrl = load_artifacts(report)
    if ctrl.dictionary.to_strings() != cfg.plant.dictionary.to_strings():
        raise ValueError("controller dictionary differs from the config's plant dictionary")
    if cfg.plant.A is None:
        raise ValueError("verification needs the plant's simulation matrix A")
    aug = build_augmented(cfg)
    v = cfg.section("verification")
    H = v["horizon"] if v["horizon"] is not None else rollout_horizon(cert)
    rep, ro = verify_all(
        cfg.plant, aug, cert, ctrl, int(H),
        grid_res=v["grid_res"], max_grid_points=int(v["max_grid_points"]),
        n_samples=int(v["n_samples"]), level_samples=int(v["level_samples"]),
        n_runs=int(v["n_runs"]), seed=int(v["seed"]),
    )
    out = {
        "format_version": FORMAT_VERSION,
        "command": "verify",
        "config_digest": cfg.digest(),
        "certificate": cert.to_json(),
        **rep.to_json(),
        "timing": {"total_s": time.perf_counter() - t0},
    }
    return rep, ro, out


def run_simulate(cfg: RunConfig, report: dict, T: int, n_runs: int) -> Rollouts:
    _, ctrl = load_artifacts(report)
    if cfg.plant.A is None:
        raise ValueError("simulation needs the plant's simulation matrix A")
    return rollout(cfg.plant, ctrl, T, n_runs, int(cfg.section("verification")["seed"]),
                   aug=build_augmented(cfg))
