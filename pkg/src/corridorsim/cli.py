"""Command-line entry points: validate, run, bench, tune."""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from corridorsim.network import ScenarioError
from corridorsim.scenario import CONTROLLER_NAMES, load_scenario
from corridorsim.tuner import ParamDim, optimize, write_history_csv

_DEFAULT_TUNE_SPACE = {
    "maxpressure": [ParamDim("interval", 4, 30, integer=True)],
    "scosca": [
        ParamDim("lambda1", 1.0, 30.0),
        ParamDim("tau1", 0.0, 10.0),
        ParamDim("tau2", 0.0, 3.0),
    ],
    "fairscosca1": [
        ParamDim("lambda1", 1.0, 30.0),
        ParamDim("alpha", 0.0, 1.0),
        ParamDim("theta", 30.0, 3000.0, scale="log"),
    ],
    "fairscosca2": [
        ParamDim("lambda1", 1.0, 30.0),
        ParamDim("ttg", 5.0, 60.0),
        ParamDim("teg", 2, 15, integer=True),
    ],
}


def _out_dir(arg: str | None, default: str) -> Path:
    base = os.environ.get("CORRIDORSIM_OUT")
    if arg:
        return Path(arg)
    if base:
        return Path(base) / default
    return Path(default)


def _parse_seeds(text: str) -> tuple[int, ...]:
    return tuple(int(s) for s in text.split(",") if s.strip())


def _parse_param(text: str) -> ParamDim:
    """name=lo:hi[:log][:int], e.g. lambda1=1:30 or theta=30:3000:log."""
    name, _, spec = text.partition("=")
    parts = spec.split(":")
    if len(parts) < 2:
        raise argparse.ArgumentTypeError(f"bad --param '{text}', expected name=lo:hi[...]")
    lo, hi = float(parts[0]), float(parts[1])
    flags = parts[2:]
    return ParamDim(
        name=name,
        lo=lo,
        hi=hi,
        scale="log" if "log" in flags else "linear",
        integer="int" in flags,
    )


def cmd_validate(args) -> int:
    try:
        scenario = load_scenario(args.scenario)
    except ScenarioError as e:
        print(f"INVALID: {e}", file=sys.stderr)
        return 1
    net = scenario.network
    print(f"OK: {len(net.intersections)} intersections, {len(net.links)} links, "
          f"{len(net.districts)} districts, controller={scenario.controller_type}")
    return 0


def cmd_run(args) -> int:
    from corridorsim.metrics import summarize_run
    from corridorsim.runner import (
        run_single, write_cycles_csv, write_decisions_csv,
        write_steps_csv, write_vehicles_csv,
    )

    scenario = load_scenario(args.scenario)
    controller = args.controller or scenario.controller_type
    result = run_single(scenario, controller, args.seed, args.horizon)
    out = _out_dir(args.out, "out")
    out.mkdir(parents=True, exist_ok=True)
    write_vehicles_csv(result, out / "vehicles.csv")
    if args.step_log:
        write_steps_csv(result, out / "steps.csv")
    if args.signal_log:
        write_cycles_csv(result, out / "cycles.csv")
    if args.decision_log:
        write_decisions_csv(result, out / "decisions.csv")
    m = summarize_run(result, scenario.mfd_window, scenario.warmup)
    print(f"{controller} seed={args.seed}: throughput={m.throughput} "
          f"avg_delay={m.avg_delay:.1f}s max_delay={m.max_delay:.0f}s "
          f"gini={m.gini:.3f} censored={m.censored}")
    print(f"wrote {out / 'vehicles.csv'}")
    return 0


def cmd_bench(args) -> int:
    from corridorsim.runner import run_benchmark

    scenario = load_scenario(args.scenario)
    out = _out_dir(args.out, "bench_out")
    controllers = tuple(args.controllers.split(",")) if args.controllers else None
    seeds = _parse_seeds(args.seeds) if args.seeds else None
    manifest = run_benchmark(
        scenario, out,
        controllers=controllers,
        seeds=seeds,
        horizon=args.horizon,
        baseline=args.baseline,
        jobs=args.jobs,
        warmup=args.warmup,
    )
    print(f"bench complete: {len(manifest['runs'])} runs -> {out}")
    return 0 if manifest["status"] == "ok" else 1


def cmd_tune(args) -> int:
    scenario = load_scenario(args.scenario)
    controller = args.controller
    if controller not in CONTROLLER_NAMES or controller == "fixed":
        print(f"cannot tune controller '{controller}'", file=sys.stderr)
        return 1
    space = args.param or _DEFAULT_TUNE_SPACE[controller]
    seeds = _parse_seeds(args.seeds) if args.seeds else scenario.seeds
    best, history = optimize(
        space,
        scenario=scenario,
        controller=controller,
        seeds=seeds,
        budget=args.budget,
        strategy=args.strategy,
        tuner_seed=args.tuner_seed,
        horizon=args.horizon,
    )
    if args.out:
        write_history_csv(history, Path(args.out))
        print(f"wrote {args.out}")
    pretty = ", ".join(f"{k}={v:.4g}" if isinstance(v, float) else f"{k}={v}"
                       for k, v in best.params.items())
    print(f"best trial {best.trial}: objective={best.objective:.3f} ({pretty})")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="corridorsim",
        description="Arterial-corridor microsimulation and signal-control benchmark",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a scenario document")
    p.add_argument("scenario")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("run", help="run one (controller, seed) simulation")
    p.add_argument("scenario")
    p.add_argument("--controller", choices=CONTROLLER_NAMES)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--horizon", type=int)
    p.add_argument("--out")
    p.add_argument("--step-log", action="store_true")
    p.add_argument("--signal-log", action="store_true")
    p.add_argument("--decision-log", action="store_true")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("bench", help="run a controller x seed matrix and emit tables")
    p.add_argument("scenario")
    p.add_argument("--controllers", help="comma-separated subset")
    p.add_argument("--seeds", help="comma-separated seed list")
    p.add_argument("--horizon", type=int)
    p.add_argument("--baseline", default=None)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--warmup", type=int, default=None)
    p.add_argument("--out")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("tune", help="calibrate controller parameters")
    p.add_argument("scenario")
    p.add_argument("--controller", required=True)
    p.add_argument("--budget", type=int, default=20)
    p.add_argument("--seeds")
    p.add_argument("--strategy", choices=("random", "surrogate"), default="random")
    p.add_argument("--tuner-seed", type=int, default=0)
    p.add_argument("--horizon", type=int)
    p.add_argument("--param", action="append", type=_parse_param,
                   help="name=lo:hi[:log][:int]; repeatable")
    p.add_argument("--out")
    p.set_defaults(func=cmd_tune)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ScenarioError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
