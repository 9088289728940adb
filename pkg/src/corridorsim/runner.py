"""Single-run assembly and the (controller x seed) benchmark driver."""

from __future__ import annotations

import csv
import hashlib
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

from corridorsim import __version__
from corridorsim.controllers import (
    Controller,
    ControllerContext,
    FixedCycleController,
    LinkCycleData,
    MaxPressureController,
    StepContext,
)
from corridorsim.microsim import ExitRecord, Microsim, StepRecord, generate_demand
from corridorsim.network import ScenarioError
from corridorsim.scenario import Scenario
from corridorsim.scosca import (
    Fair1Controller,
    Fair1Params,
    Fair2Controller,
    Fair2Params,
    ScoscaController,
    ScoscaParams,
)
from corridorsim.signal_core import (
    CycleRecord,
    CyclicSignalMachine,
    DirectSignalMachine,
    Face,
    SignalPlan,
    faces_for,
)


@dataclass
class RunResult:
    controller: str
    seed: int
    horizon: int
    vehicles: list[ExitRecord]
    steps: list[StepRecord]
    cycles: list[CycleRecord]
    decisions: list[dict]
    preemptions: list = field(default_factory=list)

    @property
    def throughput(self) -> int:
        return sum(1 for v in self.vehicles if not v.censored)

    @property
    def censored(self) -> int:
        return sum(1 for v in self.vehicles if v.censored)


def _initial_plan(scenario: Scenario, table: str = "initial") -> SignalPlan:
    cfg = scenario.controller_cfg.get(table) or scenario.controller_cfg["initial"]
    base = scenario.controller_cfg["initial"]
    cycle = int(cfg.get("cycle", base["cycle"]))
    greens_cfg = cfg.get("greens", base["greens"])
    offsets_cfg = cfg.get("offsets", base.get("offsets", {}))
    plan = SignalPlan(
        cycle=cycle,
        greens={nid: [int(g) for g in greens_cfg[nid]] for nid in greens_cfg},
        offsets={nid: int(offsets_cfg.get(nid, 0)) for nid in scenario.network.intersections},
    )
    plan.validate(scenario.network.intersections)
    return plan


def _scosca_params(cfg: dict, overrides: dict | None = None) -> ScoscaParams:
    merged = dict(cfg)
    if overrides:
        fields = ScoscaParams.__dataclass_fields__
        merged.update({k: v for k, v in overrides.items() if k in fields})
    ints = {"g_min", "g_max", "c_min", "c_max", "cycle_opt_period", "offset_opt_period"}
    kwargs = {}
    for key, value in merged.items():
        kwargs[key] = int(round(value)) if key in ints else float(value)
    return ScoscaParams(**kwargs)


def build_controller(
    scenario: Scenario,
    name: str,
    overrides: dict | None = None,
) -> tuple[Controller, SignalPlan | None]:
    """Instantiate a controller by config name, with optional parameter overrides."""
    network = scenario.network
    overrides = overrides or {}
    if name == "fixed":
        plan = _initial_plan(scenario, "fixed")
        return FixedCycleController(plan), plan
    if name == "maxpressure":
        cfg = scenario.controller_cfg.get("maxpressure", {})
        interval = int(round(overrides.get("interval", cfg.get("interval", 10))))
        use_pce = bool(cfg.get("use_pce", False))
        return MaxPressureController(network, scenario.demand.turns, interval, use_pce), None

    plan = _initial_plan(scenario)
    params = _scosca_params(scenario.controller_cfg.get("scosca", {}), overrides)
    if name == "scosca":
        return ScoscaController(network, plan, params), plan
    if name == "fairscosca1":
        cfg = scenario.controller_cfg.get("fairscosca1", {})
        fair = Fair1Params(
            alpha=float(overrides.get("alpha", cfg.get("alpha", 0.5))),
            theta=float(overrides.get("theta", cfg.get("theta", 300.0))),
        )
        return Fair1Controller(network, plan, params, fair), plan
    if name == "fairscosca2":
        cfg = scenario.controller_cfg.get("fairscosca2", {})
        fair = Fair2Params(
            ttg=float(overrides.get("ttg", cfg.get("ttg", 20.0))),
            teg=int(round(overrides.get("teg", cfg.get("teg", 8)))),
        )
        return Fair2Controller(network, plan, params, fair), plan
    raise ScenarioError("controller", f"unknown controller '{name}'")


def _network_counts(sim: Microsim) -> tuple[dict, dict, dict, dict]:
    counts, queues, queues_pce, n_z = {}, {}, {}, {}
    for z, ls in sim.links.items():
        counts[z] = ls.vehicle_count()
        queues[z] = ls.queue_len()
        queues_pce[z] = ls.queue_pce()
        n_z[z] = ls.n_z
    return counts, queues, queues_pce, n_z


def run_single(
    scenario: Scenario,
    controller_name: str,
    seed: int,
    horizon: int | None = None,
    overrides: dict | None = None,
) -> RunResult:
    """Execute one deterministic (controller, seed) simulation run."""
    network = scenario.network
    horizon = int(horizon or scenario.horizon)
    controller, plan = build_controller(scenario, controller_name, overrides)
    entries = generate_demand(network, scenario.demand, seed, horizon)
    sim = Microsim(network, entries, horizon)
    order = network.arterial_order()

    if controller.cyclic:
        if isinstance(controller, ScoscaController):
            g_min, g_max = controller.params.g_min, controller.params.g_max
        else:
            g_min, g_max = None, 10 ** 6
        machines = {
            nid: CyclicSignalMachine(network.intersections[nid], plan, g_min, g_max)
            for nid in order
        }
    else:
        machines = {nid: DirectSignalMachine(network.intersections[nid]) for nid in order}

    controlled = {nid: network.controlled_links(nid) for nid in order}
    step_hook = type(controller).on_step is not Controller.on_step

    for t in range(horizon):
        faces: dict[str, Face] = {}
        if controller.cyclic:
            for nid in order:
                machine = machines[nid]
                record = machine.finish_cycle_if_due(t)
                if record is not None:
                    raw = sim.read_and_reset_detectors(controlled[nid])
                    detectors = {}
                    for z in controlled[nid]:
                        j = network.phase_of[z][1]
                        t_no, s_z = raw[z]
                        detectors[z] = LinkCycleData(
                            t_no=t_no,
                            s_z=s_z,
                            t_ost=network.links[z].t_ost,
                            green_eff=record.displayed_greens[j],
                        )
                    counts, queues, queues_pce, n_z = _network_counts(sim)
                    ctx = ControllerContext(
                        intersection_id=nid,
                        cycle_index=record.cycle_index,
                        clock=t,
                        detectors=detectors,
                        counts=counts,
                        queues=queues,
                        queues_pce=queues_pce,
                        n_z=n_z,
                        plan=machine.plan,
                        network=network,
                    )
                    new_plan = controller.on_cycle_end(ctx)
                    if new_plan is not None:
                        for other in order:
                            machines[other].apply_plan(new_plan, network.intersections)
                machine.start_next_cycle_if_due(t)
            for nid in order:
                phase_idx, in_yellow = machines[nid].tick(t)
                faces.update(faces_for(network.intersections[nid], phase_idx, in_yellow))
        else:
            for nid in order:
                phase_idx, in_yellow = machines[nid].tick(t)
                faces.update(faces_for(network.intersections[nid], phase_idx, in_yellow))

        sim.step(faces)

        if step_hook:
            counts, queues, queues_pce, _ = _network_counts(sim)
            arrivals = {z: sim.links[z].arrivals_this_step for z in sim.links}
            ctx = StepContext(
                clock=t,
                queues=queues,
                queues_pce=queues_pce,
                arrivals=arrivals,
                network=network,
            )
            controller.on_step(ctx, machines)

    sim.finalize()
    vehicles = sorted(sim.exits, key=lambda r: (r.entry_time, r.id))
    cycles: list[CycleRecord] = []
    if controller.cyclic:
        for nid in order:
            cycles.extend(machines[nid].records)
        cycles.sort(key=lambda r: (r.start, r.intersection))
    return RunResult(
        controller=controller_name,
        seed=seed,
        horizon=horizon,
        vehicles=vehicles,
        steps=sim.steps,
        cycles=cycles,
        decisions=controller.decision_log(),
        preemptions=getattr(controller, "preemptions", []),
    )


# -- CSV output -----------------------------------------------------------------


def write_vehicles_csv(result: RunResult, path: Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["id", "origin_class", "entry_time", "exit_time", "distance_m",
                    "delay_s", "cumulative_wait_s", "censored"])
        for v in result.vehicles:
            w.writerow([v.id, v.origin_class, v.entry_time, v.exit_time,
                        f"{v.distance_m:.1f}", f"{v.delay_s:.1f}",
                        v.cumulative_wait_s, int(v.censored)])


def write_steps_csv(result: RunResult, path: Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["clock", "vehicles_present", "exited_cum"])
        for s in result.steps:
            w.writerow([s.clock, s.vehicles_present, s.exited_cum])


def write_cycles_csv(result: RunResult, path: Path) -> None:
    """Signal timeline log: one row per (intersection, cycle, phase)."""
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["intersection", "cycle", "phase", "scheduled_green",
                    "effective_green", "preempted"])
        for c in result.cycles:
            for j, scheduled in enumerate(c.scheduled_greens):
                preempted = int(c.preempt is not None and j in (c.preempt[0], c.preempt[1]))
                w.writerow([c.intersection, c.cycle_index, j, scheduled,
                            c.displayed_greens[j], preempted])


def write_decisions_csv(result: RunResult, path: Path) -> None:
    keys = ["clock", "cycle", "intersection", "optimizer", "ds_max", "ds_diff",
            "before", "after", "from_phase", "to_phase", "teg", "ttg",
            "remaining_wait", "congestion"]
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(keys)
        for d in result.decisions:
            w.writerow([d.get(k, "") for k in keys])


def config_hash(scenario: Scenario, extra: dict | None = None) -> str:
    h = hashlib.sha256(scenario.source_text.encode("utf-8"))
    if extra:
        h.update(json.dumps(extra, sort_keys=True).encode("utf-8"))
    return h.hexdigest()[:16]


def run_benchmark(
    scenario: Scenario,
    out_dir: Path,
    controllers: tuple[str, ...] | None = None,
    seeds: tuple[int, ...] | None = None,
    horizon: int | None = None,
    baseline: str | None = None,
    jobs: int = 1,
    warmup: int | None = None,
) -> dict:
    """Run the full (controller x seed) matrix and write the report bundle.

    Returns the manifest dict. Any failed run aborts the bundle after writing
    a manifest that marks the partial outputs.
    """
    from corridorsim import metrics as M

    controllers = tuple(controllers or scenario.controllers)
    seeds = tuple(seeds or scenario.seeds)
    horizon = int(horizon or scenario.horizon)
    baseline = baseline or scenario.baseline
    warmup = scenario.warmup if warmup is None else warmup
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    tasks = [(c, s) for c in controllers for s in seeds]
    manifest: dict = {
        "config_hash": config_hash(scenario, {"controllers": list(controllers),
                                              "seeds": list(seeds),
                                              "horizon": horizon}),
        "code_version": __version__,
        "controllers": list(controllers),
        "seeds": list(seeds),
        "horizon": horizon,
        "baseline": baseline,
        "runs": [],
        "status": "ok",
    }

    def finish_run(c: str, s: int, res: RunResult, wall: float) -> None:
        run_dir = out_dir / "runs" / c / f"seed{s}"
        run_dir.mkdir(parents=True, exist_ok=True)
        write_vehicles_csv(res, run_dir / "vehicles.csv")
        results[(c, s)] = res
        manifest["runs"].append({"controller": c, "seed": s,
                                 "wall_time_s": round(wall, 3)})

    results: dict[tuple[str, int], RunResult] = {}
    try:
        if jobs > 1:
            import multiprocessing as mp

            with mp.Pool(jobs) as pool:
                payloads = pool.starmap(
                    _bench_worker,
                    [(scenario, c, s, horizon) for c, s in tasks],
                )
            for (c, s), (res, wall) in zip(tasks, payloads):
                finish_run(c, s, res, wall)
        else:
            for c, s in tasks:
                res, wall = _bench_worker(scenario, c, s, horizon)
                finish_run(c, s, res, wall)
    except Exception as e:
        # Partial outputs stay on disk; the manifest marks the aborted bundle.
        manifest["status"] = f"failed: {e}"
        (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2))
        raise

    M.write_benchmark_tables(results, controllers, seeds, baseline, out_dir,
                             mfd_window=scenario.mfd_window, warmup=warmup)
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2))
    return manifest


def _bench_worker(scenario: Scenario, controller: str, seed: int,
                  horizon: int) -> tuple[RunResult, float]:
    start = time.perf_counter()
    result = run_single(scenario, controller, seed, horizon)
    return result, time.perf_counter() - start
