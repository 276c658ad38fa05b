"""Command-line entry point: ``solve``, ``simulate``, ``sweep`` and ``validate``.

Options come from an optional JSON config (``--config``) overlaid by flags.
The seed resolves as ``--seed`` > ``$AOII_SEED`` > config > default.  Every
output lands inside ``--out``; stdout carries one JSON document describing the
result or the error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import warnings
from pathlib import Path

from .cycle_model import ChannelModel, SmdpParameters, SourceModel, smdp_parameters
from .errors import AoiiError, BoundaryWarning, ConfigError, NumericalError, SearchSpaceTooLarge, ValidationError
from .experiments import (
    ALL_POLICIES,
    Scenario,
    battery_table,
    builtin,
    cycle_battery,
    run_sweep,
    sweep_csv,
    thresholds_csv,
)
from .simulator import SimPolicy, simulate, write_trace
from .smdp_solver import policy_iteration

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_VALIDATION = 3
EXIT_SOLVER = 4
EXIT_IO = 5
EXIT_BATTERY_FAILED = 6

log = logging.getLogger("aoii_smdp")


def _exit_code(exc: BaseException) -> int:
    if isinstance(exc, ConfigError):
        return EXIT_CONFIG
    if isinstance(exc, ValidationError):
        return EXIT_VALIDATION
    if isinstance(exc, (NumericalError, SearchSpaceTooLarge)):
        return EXIT_SOLVER
    if isinstance(exc, OSError):
        return EXIT_IO
    return EXIT_SOLVER


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    return cfg


def _inline_scenario(doc: dict) -> Scenario:
    try:
        source = SourceModel(doc["Q"], tuple(tuple(p) for p in doc["penalties"]))
        channel = ChannelModel.from_arrays(doc["gamma"], doc["G"])
    except KeyError as exc:
        raise ConfigError(f"inline scenario is missing {exc}") from exc
    except TypeError as exc:
        raise ConfigError(f"inline scenario is malformed: {exc}") from exc
    return Scenario(name=doc.get("name", "inline"), source=source, channel=channel,
                    lambda_grid=tuple(doc.get("lambda_grid", (0.0, 1.0))))


def _num_list(value, name: str) -> tuple:
    if isinstance(value, str):
        value = value.split(",")
    try:
        out = tuple(float(v) for v in value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name} must be a list of numbers, got {value!r}") from exc
    if not out or any(v != v for v in out):
        raise ConfigError(f"{name} must be a non-empty list of numbers")
    return out


def _int(value, name: str) -> int:
    try:
        out = int(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name} must be an integer, got {value!r}") from exc
    if out != float(value):
        raise ConfigError(f"{name} must be an integer, got {value!r}")
    return out


def resolve(args: argparse.Namespace) -> tuple[Scenario, dict]:
    """Merge config file and flags into a validated scenario plus options."""
    cfg = _load_config(args.config)
    opts = {k: v for k, v in cfg.items() if k != "scenario"}
    for key in ("lam", "tau_max", "policy", "policies", "horizon", "replications", "seed", "out", "trace", "cycles",
                "params_csv"):
        val = getattr(args, key, None)
        if val is not None:
            opts["lambda" if key == "lam" else key] = val
    if "seed" not in vars(args) or args.seed is None:
        env = os.environ.get("AOII_SEED")
        if env is not None:
            opts["seed"] = env

    scen_doc = args.scenario if args.scenario is not None else cfg.get("scenario", "scenario2")
    scenario = _inline_scenario(scen_doc) if isinstance(scen_doc, dict) else builtin(str(scen_doc))

    overrides = {}
    if "lambda_grid" in opts:
        overrides["lambda_grid"] = _num_list(opts["lambda_grid"], "lambda_grid")
    if "xi_grid" in opts:
        xi = _num_list(opts["xi_grid"], "xi_grid")
        if any(not 0.0 <= x <= 1.0 for x in xi):
            raise ConfigError("xi_grid values must lie in [0, 1]")
        overrides["xi_grid"] = xi
    if "tau_max" in opts:
        overrides["tau_max"] = _int(opts["tau_max"], "tau_max")
        if overrides["tau_max"] < 1:
            raise ConfigError("tau_max must be >= 1")
    for key in ("horizon", "replications", "seed"):
        if key in opts:
            overrides[key] = _int(opts[key], key)
    scenario = scenario.with_overrides(**overrides)
    if "lambda" in opts:
        try:
            opts["lambda"] = float(opts["lambda"])
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"lambda must be a number, got {opts['lambda']!r}") from exc
        if opts["lambda"] < 0:
            raise ConfigError("lambda must be nonnegative")
    if "policies" in opts:
        pols = opts["policies"].split(",") if isinstance(opts["policies"], str) else list(opts["policies"])
        bad = [p for p in pols if p not in ALL_POLICIES]
        if bad or not pols:
            raise ConfigError(f"unknown policies {bad}; choose from {ALL_POLICIES}")
        opts["policies"] = tuple(pols)
    return scenario, opts


def _out_dir(opts: dict) -> Path:
    out = Path(opts.get("out", "out")).resolve()
    out.mkdir(parents=True, exist_ok=True)
    return out


def _inside(out: Path, name: str) -> Path:
    path = (out / name).resolve()
    if out != path and out not in path.parents:
        raise ConfigError(f"{name} would be written outside the output directory {out}")
    return path


def _write(out: Path, name: str, text: str) -> str:
    path = _inside(out, name)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    return str(path)


def cmd_solve(args) -> dict:
    scenario, opts = resolve(args)
    lam = opts.get("lambda", 1.0)
    params = smdp_parameters(scenario.source, scenario.channel, scenario.tau_max)
    res = policy_iteration(params, lam)
    out = _out_dir(opts)
    doc = {**res.to_dict(), "scenario": scenario.name, "tau_max": scenario.tau_max}
    files = [
        _write(out, f"solve_{scenario.name}.json", json.dumps(doc, indent=2) + "\n"),
        _write(out, f"solve_{scenario.name}_thresholds.csv",
               "j,tau\n" + "".join(f"{j + 1},{t}\n" for j, t in enumerate(res.policy.thresholds))),
    ]
    return {"command": "solve", "policy": list(res.policy.thresholds), "gain": res.gain, "files": files}


def cmd_simulate(args) -> dict:
    scenario, opts = resolve(args)
    lam = opts.get("lambda", 1.0)
    policy = SimPolicy.parse(opts.get("policy", "uniform:1"))
    sim = scenario.sim
    out = _out_dir(opts)
    trace_name = opts.get("trace")
    trace_path = _inside(out, trace_name) if trace_name else None
    result = simulate(scenario.source, scenario.channel, policy, lam, sim.horizon, sim.replications, sim.seed,
                      trace_slots=100_000 if trace_path else 0)
    report, trace = result if trace_path else (result, None)
    files = [_write(out, f"simulate_{scenario.name}.json", report.to_json() + "\n")]
    if trace_path is not None:
        trace_path.parent.mkdir(parents=True, exist_ok=True)
        with open(trace_path, "w", encoding="utf-8", newline="") as fh:
            write_trace(trace, fh)
        files.append(str(trace_path))
    return {"command": "simulate", "avg_cost": report.avg_cost, "ci_half_width": report.ci_half_width, "files": files}


def cmd_sweep(args) -> dict:
    scenario, opts = resolve(args)
    policies = opts.get("policies", ALL_POLICIES)
    rows = run_sweep(scenario, policies)
    out = _out_dir(opts)
    files = [_write(out, f"{scenario.name}_sweep.csv", sweep_csv(scenario, rows, policies))]
    if "smdp" in policies or "st" in policies:
        files.append(_write(out, f"{scenario.name}_thresholds.csv", thresholds_csv(scenario, rows)))
    failed = [r.lam for r in rows if r.error]
    return {"command": "sweep", "rows": len(rows), "failed_lambdas": failed, "files": files}


def cmd_validate(args) -> dict:
    scenario, opts = resolve(args)
    cycles = _int(opts.get("cycles", 1_000_000), "cycles")
    taus = (1, 2, 3, 5)
    params = None
    if opts.get("params_csv"):
        with open(opts["params_csv"], encoding="utf-8") as fh:
            params = SmdpParameters.from_csv(fh.read())
    cells = cycle_battery(scenario, taus, cycles, scenario.sim.seed, params=params)
    print(battery_table(cells), file=sys.stderr)
    failed = [f"j={c.ev + 1},tau={c.tau},{c.quantity}" for c in cells if not c.passed]
    out = _out_dir(opts)
    doc = {"schema_version": 1, "scenario": scenario.name, "cycles": cycles,
           "cells": [c.__dict__ for c in cells], "failed": failed}
    files = [_write(out, f"validate_{scenario.name}.json", json.dumps(doc, indent=2) + "\n")]
    return {"command": "validate", "cells": len(cells), "failed": failed, "files": files}


COMMANDS = {"solve": cmd_solve, "simulate": cmd_simulate, "sweep": cmd_sweep, "validate": cmd_validate}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="aoii-smdp", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--scenario", help="built-in scenario name (scenario1, scenario2)")
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--out", help="output directory (default ./out)")
        p.add_argument("--seed", type=int)
        p.add_argument("--tau-max", dest="tau_max", type=int)
        if name in ("solve", "simulate"):
            p.add_argument("--lambda", dest="lam", type=float)
        if name in ("simulate", "sweep"):
            p.add_argument("--horizon", type=int)
            p.add_argument("--replications", type=int)
        if name == "simulate":
            p.add_argument("--policy", help="multi:<t1,t2,...> | uniform:<t> | rs:<xi>")
            p.add_argument("--trace", help="slot trace CSV, relative to --out")
        if name == "sweep":
            p.add_argument("--policies", help="comma-separated subset of smdp,st,rs")
        if name == "validate":
            p.add_argument("--cycles", type=int)
            p.add_argument("--params-csv", dest="params_csv", help=argparse.SUPPRESS)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", BoundaryWarning)
            result = COMMANDS[args.command](args)
        for w in caught:
            print(f"warning: {w.message}", file=sys.stderr)
        result["warnings"] = [str(w.message) for w in caught]
    except (AoiiError, OSError) as exc:
        code = _exit_code(exc)
        print(json.dumps({"error": type(exc).__name__, "code": getattr(exc, "code", "io"), "message": str(exc),
                          "exit_code": code}))
        return code
    print(json.dumps(result))
    if args.command == "validate" and result["failed"]:
        return EXIT_BATTERY_FAILED
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
