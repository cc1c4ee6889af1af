"""Command line entry point: ``acbc synthesize|scenario|verify|simulate``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .config import EXAMPLES_DIR, ConfigError, RunConfig, load_config
from .expr import DictionaryError, DomainError, ExprSyntaxError, IndexOutOfRange
from .model import ModelError
from .synth import SynthesisError

log = logging.getLogger("acbc")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_USAGE = 2
EXIT_RICHNESS = 3
EXIT_SDP = 4
EXIT_LEVELS = 5
EXIT_VERIFY_FAILED = 6
EXIT_SCENARIO_NO_Y = 7
EXIT_CHECK_FAILED = 8

EXIT_CODES = {
    "richness": EXIT_RICHNESS,
    "sdp": EXIT_SDP,
    "levels": EXIT_LEVELS,
    "scenario_no_y": EXIT_SCENARIO_NO_Y,
    "check": EXIT_CHECK_FAILED,
    "config": EXIT_USAGE,
}


def _jsonable(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serialisable: {type(o)}")


def write_json(path: Path, obj: dict) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n")


def _load(args) -> RunConfig:
    path = Path(args.config)
    if not path.exists() and (EXAMPLES_DIR / f"{args.config}.json").exists():
        path = EXAMPLES_DIR / f"{args.config}.json"  # bundled name, e.g. "case1"
    cfg = load_config(path)
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    if getattr(args, "varpi", None) is not None:
        cfg = cfg.with_overrides("synthesis", varpi=args.varpi)
    if getattr(args, "varpi_sweep", None):
        sweep = [float(v) for v in args.varpi_sweep.split(",") if v.strip()]
        cfg = cfg.with_overrides("synthesis", varpi_sweep=sweep)
    if getattr(args, "path", None):
        cfg = cfg.with_overrides("scenario", path=args.path)
    return cfg


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _summarise(report: dict) -> str:
    c = report["certificate"]
    return (f"eta_a={c['eta_a']:.6g} gamma_a={c['gamma_a']:.6g} c_a={c['c_a']:.6g} "
            f"horizon_T={c['horizon_T']} varpi={c['varpi']:g}")


def cmd_synthesize(args) -> int:
    from .pipeline import run_synthesize

    cfg = _load(args)
    res = run_synthesize(cfg)
    out = _out_dir(args)
    write_json(out / "certificate.json", res.report)
    res.data.traj.to_csv(out / "trajectory.csv")
    print(f"certificate written to {out / 'certificate.json'}: {_summarise(res.report)}")
    return EXIT_OK


def cmd_scenario(args) -> int:
    from .pipeline import run_scenario

    cfg = _load(args)
    res = run_scenario(cfg)
    out = _out_dir(args)
    write_json(out / "certificate.json", res.report)
    res.data.traj.to_csv(out / "trajectory.csv")
    print(f"scenario certificate written to {out / 'certificate.json'}: {_summarise(res.report)}")
    return EXIT_OK


def cmd_verify(args) -> int:
    from .pipeline import run_verify

    cfg = _load(args)
    report = json.loads(Path(args.certificate).read_text())
    rep, ro, out_json = run_verify(cfg, report)
    out = _out_dir(args)
    v = cfg.section("verification")
    rep.decrement.write_csv(out / "heatmap.csv", limit=v["heatmap_rows"])
    ro.write_csv(out / "rollouts.csv", max_runs=v["rollout_csv_runs"])
    out_json["files"] = {"heatmap": "heatmap.csv", "rollouts": "rollouts.csv"}
    write_json(out / "verification.json", out_json)
    d, r = rep.decrement, rep.rollouts
    print(f"decrement max={d.max_value:.4g} ({d.mode}, {d.n_points} points); levels ok={rep.levels.passed}; "
          f"rollouts {r.runs}x{r.horizon}: {r.state_violations} unsafe, {r.input_violations} input violations")
    print("PASS" if rep.passed else "FAIL")
    return EXIT_OK if rep.passed else EXIT_VERIFY_FAILED


def cmd_simulate(args) -> int:
    from .pipeline import run_simulate

    cfg = _load(args)
    report = json.loads(Path(args.controller).read_text())
    ro = run_simulate(cfg, report, args.T, args.runs)
    out = _out_dir(args)
    ro.write_csv(out / "rollouts.csv")
    print(f"{ro.stats.runs} runs of {ro.stats.horizon} steps written to {out / 'rollouts.csv'}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="acbc", description="Data-driven augmented barrier certificates.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", required=True, help="run configuration (JSON path, or a bundled name: case1, case2)")
        sp.add_argument("--out", default="out", help="output directory")
        sp.add_argument("--seed", type=int, default=None, help="override every seed in the config")

    s = sub.add_parser("synthesize", help="certificate and controller from one trajectory")
    common(s)
    s.add_argument("--varpi", type=float, default=None)
    s.add_argument("--varpi-sweep", default=None, help="comma-separated extra varpi values to try")
    s.set_defaults(func=cmd_synthesize)

    s = sub.add_parser("scenario", help="sampling-based decay constant, then the controller")
    common(s)
    s.add_argument("--varpi", type=float, default=None)
    s.add_argument("--path", choices=["deterministic", "probabilistic"], default=None)
    s.set_defaults(func=cmd_scenario)

    s = sub.add_parser("verify", help="audit a certificate against the simulation model")
    common(s)
    s.add_argument("--certificate", required=True)
    s.set_defaults(func=cmd_verify)

    s = sub.add_parser("simulate", help="export closed-loop rollouts")
    common(s)
    s.add_argument("--controller", required=True, help="certificate/controller JSON")
    s.add_argument("--T", type=int, default=20)
    s.add_argument("--runs", type=int, default=10)
    s.set_defaults(func=cmd_simulate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except SynthesisError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CODES.get(exc.kind, EXIT_ERROR)
    except (ConfigError, DictionaryError, ExprSyntaxError, IndexOutOfRange, ModelError, FileNotFoundError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DomainError as exc:
        print(f"dictionary domain error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
