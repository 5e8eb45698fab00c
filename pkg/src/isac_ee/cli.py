"""Command-line frontend: solve, sweep, baseline and validate.

Exit codes: 0 success, 1 configuration error, 2 infeasible scenario (or a
validation failure), 3 solver failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .conic import SolverOptions
from .errors import InfeasibleScenario, PipelineError
from .model import (ConfigError, ScenarioConfig, SteeringNorm, beampattern_grid, db_to_linear, dbm_to_watts,
                    scenario_channels, validate_solution, watts_to_dbm)
from .rankone import BeamformerSolution
from .sca import ScaOptions

log = logging.getLogger("isac_ee")

EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_SOLVER = 0, 1, 2, 3
SWEEP_PARAMS = ("gamma_dbm", "pmax_dbm", "tau_db")
SWEEP_COLUMNS = ("param_value", "ee", "ee_prime", "rate", "power", "min_target_gain", "detection_prob",
                 "status", "iters")
ANGLE_STEP = 0.5


def fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return f"{float(x):.12g}"


def rounded(obj):
    """Recursively round floats to 12 significant digits; NaN becomes null."""
    if isinstance(obj, dict):
        return {str(k): rounded(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [rounded(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return None if not math.isfinite(obj) else float(f"{float(obj):.12g}")
    return obj


def dump_json(path: Path, doc):
    path.write_text(json.dumps(rounded(doc), indent=2, sort_keys=True, ensure_ascii=False) + "\n",
                    encoding="utf-8")


def write_csv(path: Path, header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    path.write_text(buf.getvalue(), encoding="utf-8")


def load_scenario(path, steering_mode=None) -> ScenarioConfig:
    if path is None:
        scenario = ScenarioConfig.table1()
    else:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: malformed JSON: {exc.msg}") from exc
        if not isinstance(doc, dict):
            raise ConfigError(f"{path}: top level must be a JSON object")
        scenario = ScenarioConfig.from_dict(doc)
    if steering_mode is not None:
        scenario = dataclasses.replace(scenario, steering_norm_mode=SteeringNorm(steering_mode))
    return scenario


def sca_options(args) -> ScaOptions:
    return ScaOptions(solver=SolverOptions(verbosity=1 if args.verbose > 1 else 0))


def _out_dir(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def write_solution(out: Path, res, scenario: ScenarioConfig, name="solution"):
    """solution.json, convergence.csv, beampattern.csv, metrics.json and figures."""
    from . import plotting

    doc = {"status": "OPTIMAL" if res.sca.log.termination == "CONVERGED" else res.sca.log.termination,
           "sca": {"iterations": res.sca.log.iterations, "termination": res.sca.log.termination,
                   "activeness": res.sca.activeness},
           "preservation": res.preservation.as_dict(), **res.metrics}
    (out / f"{name}.json").write_text(json.dumps(rounded(res.beams.to_dict(res.metrics)), indent=2,
                                                 sort_keys=True) + "\n", encoding="utf-8")
    (out / "convergence.csv").write_text(res.sca.log.to_csv(), encoding="utf-8")
    angles = np.arange(-90.0, 90.0 + ANGLE_STEP / 2, ANGLE_STEP)
    gains = beampattern_grid(angles, res.beams.covariances().total_cov(), scenario)
    write_csv(out / "beampattern.csv", ("angle_deg", "gain_watts", "gain_dbm"),
              [(a, g, watts_to_dbm(max(g, 1e-300))) for a, g in zip(angles, gains)])
    dump_json(out / "metrics.json", doc)
    plotting.beampattern_figure(out / "beampattern.png", angles, gains, scenario.target_angles,
                                scenario.beampattern_thresholds)
    plotting.convergence_figure(out / "convergence.png", [r.iteration for r in res.sca.log.records],
                                res.sca.log.t_trace())
    return doc


def cmd_solve(args) -> int:
    from .pipeline import solve_scenario

    scenario = load_scenario(args.config, args.steering_mode)
    res = solve_scenario(scenario, sca_options(args))
    out = _out_dir(args.out)
    doc = write_solution(out, res, scenario)
    if not res.preservation.passed:
        log.error("rank-one preservation failed: %s", "; ".join(res.preservation.failures()))
        return EXIT_SOLVER
    print(f"{doc['status']}: ee={res.metrics['ee']:.6g} ee'={res.metrics['ee_prime']:.6g} "
          f"rate={res.metrics['rate_bps_hz']:.6g} iters={res.sca.log.iterations} -> {out}")
    return EXIT_OK


def with_param(scenario: ScenarioConfig, param: str, value: float) -> ScenarioConfig:
    if param == "gamma_dbm":
        if not scenario.num_targets:
            raise ConfigError("gamma_dbm sweep needs targets")
        return dataclasses.replace(scenario, beampattern_thresholds=float(dbm_to_watts(value)))
    if param == "pmax_dbm":
        return dataclasses.replace(scenario, p_max=float(dbm_to_watts(value)))
    if param == "tau_db":
        return dataclasses.replace(scenario, sinr_thresholds=float(db_to_linear(value)))
    raise ConfigError(f"unknown sweep parameter {param!r}; choose from {', '.join(SWEEP_PARAMS)}")


def sweep_point(scenario: ScenarioConfig, param: str, value: float, opts: ScaOptions) -> dict:
    """One sweep row; failures become a status string instead of an exception."""
    from .pipeline import solve_scenario

    row = {c: float("nan") for c in SWEEP_COLUMNS}
    row.update(param_value=value, iters=0)
    try:
        res = solve_scenario(with_param(scenario, param, value), opts)
    except PipelineError as exc:
        row["status"] = exc.code
        return row
    m = res.metrics
    row.update(ee=m["ee"], ee_prime=m["ee_prime"], rate=m["rate_bps_hz"], power=m["power_w"]["total"],
               min_target_gain=m["min_target_gain_w"], detection_prob=m["detection_prob"],
               status="OPTIMAL" if res.sca.log.termination == "CONVERGED" else res.sca.log.termination,
               iters=res.sca.log.iterations)
    return row


def parse_values(raw) -> list[float]:
    vals = []
    for item in raw or []:
        for tok in str(item).split(","):
            tok = tok.strip()
            if not tok:
                continue
            try:
                v = float(tok)
            except ValueError as exc:
                raise ConfigError(f"sweep value {tok!r} is not a number") from exc
            if not math.isfinite(v):
                raise ConfigError(f"sweep value {tok!r} is not finite")
            vals.append(v)
    if not vals:
        raise ConfigError("--values is empty")
    return vals


def cmd_sweep(args) -> int:
    from . import plotting

    scenario = load_scenario(args.config, args.steering_mode)
    values = parse_values(args.values)
    if args.param not in SWEEP_PARAMS:
        raise ConfigError(f"unknown sweep parameter {args.param!r}; choose from {', '.join(SWEEP_PARAMS)}")
    with_param(scenario, args.param, values[0])  # surface config errors before any work
    opts = sca_options(args)
    if args.jobs > 1 and len(values) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(sweep_point, [scenario] * len(values), [args.param] * len(values),
                                 values, [opts] * len(values)))
    else:
        rows = [sweep_point(scenario, args.param, v, opts) for v in values]
    out = _out_dir(args.out)
    write_csv(out / "sweep.csv", SWEEP_COLUMNS, [[r[c] for c in SWEEP_COLUMNS] for r in rows])
    plotting.sweep_figure(out / "sweep.png", args.param, values, [r["ee"] for r in rows],
                          [r["detection_prob"] for r in rows])
    failed = sum(r["status"] != "OPTIMAL" for r in rows)
    print(f"sweep {args.param}: {len(rows) - failed}/{len(rows)} points OPTIMAL -> {out}")
    return EXIT_OK


def cmd_baseline(args) -> int:
    from . import baselines
    from .pipeline import metrics

    scenario = load_scenario(args.config, args.steering_mode)
    out = _out_dir(args.out)
    if args.mode == "comm-only":
        res = baselines.comm_only(scenario, opts=sca_options(args))
        doc = {"mode": args.mode, **res.extra, **res.metrics}
        (out / "solution.json").write_text(json.dumps(rounded(res.beams.to_dict(res.metrics)), indent=2,
                                                      sort_keys=True) + "\n", encoding="utf-8")
    elif args.mode == "sensing":
        res = baselines.sensing_dominated(scenario)
        doc = {"mode": args.mode, **res.extra, **res.metrics}
        (out / "solution.json").write_text(json.dumps(rounded(res.beams.to_dict(res.metrics)), indent=2,
                                                      sort_keys=True) + "\n", encoding="utf-8")
    elif args.mode == "dinkelbach":
        res = baselines.dinkelbach_cross_check(scenario)
        doc = {"mode": args.mode, "iterations": res["iterations"], "eta_trace": res["trace"],
               **metrics(res["covs"], scenario)}
    else:
        raise ConfigError(f"unknown baseline mode {args.mode!r}")
    dump_json(out / "metrics.json", doc)
    print(f"{args.mode}: ee={doc['ee']:.6g} ee'={doc['ee_prime']:.6g} -> {out}")
    return EXIT_OK


def cmd_validate(args) -> int:
    scenario = load_scenario(args.config, args.steering_mode)
    try:
        doc = json.loads(Path(args.solution).read_text(encoding="utf-8"))
        beams = BeamformerSolution.from_dict(doc)
    except (OSError, json.JSONDecodeError, KeyError, ValueError, TypeError) as exc:
        raise ConfigError(f"cannot load solution {args.solution}: {exc}") from exc
    if beams.beamformers.shape != (scenario.num_users, scenario.num_antennas):
        raise ConfigError("solution dimensions do not match the scenario")
    report = validate_solution(beams.covariances(), scenario, scenario_channels(scenario))
    print(json.dumps(rounded(report.as_dict()), indent=2, sort_keys=True))
    return EXIT_OK if report.passed else EXIT_INFEASIBLE


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-c", "--config", help="scenario JSON (default: the Table 1 reference scenario)")
    common.add_argument("--steering-mode", choices=[m.value for m in SteeringNorm],
                        help="override the steering-vector normalization")
    common.add_argument("--seed", type=int, default=None, help="reserved; the pipeline is deterministic")
    common.add_argument("-v", "--verbose", action="count", default=0)

    parser = argparse.ArgumentParser(prog="isac-ee", description="Energy-efficient ISAC beamforming.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", parents=[common], help="run the full pipeline on one scenario")
    p.add_argument("-o", "--out", default="out")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("sweep", parents=[common], help="sweep one parameter")
    p.add_argument("-o", "--out", default="out")
    p.add_argument("--param", required=True, choices=SWEEP_PARAMS)
    p.add_argument("--values", nargs="*", default=[], help="values, space or comma separated")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("baseline", parents=[common], help="benchmark designs")
    p.add_argument("-o", "--out", default="out")
    p.add_argument("--mode", required=True, choices=("comm-only", "sensing", "dinkelbach"))
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("validate", parents=[common], help="re-check a stored solution.json")
    p.add_argument("solution")
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.DEBUG if args.verbose > 1 else logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "jobs", 1) < 1:
        print("error: --jobs must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InfeasibleScenario as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        cert = {k: v for k, v in exc.certificate.items() if k != "y"}
        print(f"certificate: {json.dumps(rounded(cert), sort_keys=True)}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except PipelineError as exc:
        print(f"solver failure ({exc.code}): {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
