"""Scenario document loading: strict TOML schema for network, demand, controller, runs.

Unknown keys are errors (fail-fast), reported with a path into the document.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from corridorsim.network import Network, ScenarioError, load_network

CONTROLLER_NAMES = ("fixed", "maxpressure", "scosca", "fairscosca1", "fairscosca2")

# Allowed keys per document node. A trailing "*" table accepts arbitrary
# subkeys (used for id-keyed tables such as greens and turning fractions).
_SCHEMA = {
    "network": {
        "yellow_time", "min_green", "links", "intersections", "districts",
    },
    "network.links[]": {"id", "from", "to", "length", "lanes", "speed", "sat_flow",
                        "class", "detector"},
    "network.intersections[]": {"id", "position", "phases", "min_green", "yellow_time"},
    "network.districts[]": {"name", "members"},
    "demand": {"flows", "turns", "pce"},
    "demand.flows[]": {"origin", "rate", "class_mix"},
    "controller": {"type", "initial", "fixed", "maxpressure", "scosca",
                   "fairscosca1", "fairscosca2"},
    "controller.initial": {"cycle", "greens", "offsets"},
    "controller.fixed": {"cycle", "greens", "offsets"},
    "controller.maxpressure": {"interval", "use_pce"},
    "controller.scosca": {"lambda1", "lambda2", "lambda3", "tau1", "tau2",
                          "g_min", "g_max", "c_min", "c_max",
                          "ds_target_hi", "ds_target_lo",
                          "cycle_opt_period", "offset_opt_period"},
    "controller.fairscosca1": {"alpha", "theta"},
    "controller.fairscosca2": {"ttg", "teg"},
    "metrics": {"warmup", "mfd_window"},
    "runs": {"horizon", "seeds", "controllers", "baseline"},
}

_TOP_SECTIONS = ("network", "demand", "controller", "metrics", "runs")


@dataclass
class Flow:
    origin: str
    rate: tuple[tuple[int, float], ...]  # (start_s, veh/h) piecewise-constant
    class_mix: tuple[tuple[str, float], ...]

    def rate_at(self, t: int) -> float:
        r = 0.0
        for start, value in self.rate:
            if t >= start:
                r = value
            else:
                break
        return r


@dataclass
class DemandProfile:
    flows: tuple[Flow, ...]
    turns: dict[str, dict[str, dict[str, float]]]  # node -> from_link -> {to_link: frac}
    pce: dict[str, float] = field(default_factory=dict)


@dataclass
class Scenario:
    network: Network
    demand: DemandProfile
    controller_type: str
    controller_cfg: dict[str, dict]
    warmup: int
    mfd_window: int
    horizon: int
    seeds: tuple[int, ...]
    controllers: tuple[str, ...]
    baseline: str
    source_text: str = ""


def _check_keys(obj: dict, node: str, path: str) -> None:
    allowed = _SCHEMA[node]
    for key in obj:
        if key not in allowed:
            raise ScenarioError(f"{path}.{key}", "unknown key")


def _parse_demand(section: dict, network: Network) -> DemandProfile:
    _check_keys(section, "demand", "demand")
    flows = []
    for i, row in enumerate(section.get("flows", [])):
        path = f"demand.flows[{i}]"
        _check_keys(row, "demand.flows[]", path)
        origin = str(row["origin"])
        if origin not in network.links:
            raise ScenarioError(path, f"unresolved origin link '{origin}'")
        rate_rows = row["rate"]
        rate = []
        for pair in rate_rows:
            if len(pair) != 2:
                raise ScenarioError(f"{path}.rate", "entries must be [start_s, veh_per_hour]")
            start, value = int(pair[0]), float(pair[1])
            if value < 0:
                raise ScenarioError(f"{path}.rate", f"negative rate {value}")
            rate.append((start, value))
        rate.sort(key=lambda p: p[0])
        mix = row.get("class_mix", {"car": 1.0})
        mix_t = tuple(sorted((str(k), float(v)) for k, v in mix.items()))
        total = sum(v for _, v in mix_t)
        if abs(total - 1.0) > 1e-9:
            raise ScenarioError(f"{path}.class_mix", f"fractions sum to {total}, expected 1")
        flows.append(Flow(origin=origin, rate=tuple(rate), class_mix=mix_t))

    turns: dict[str, dict[str, dict[str, float]]] = {}
    for node, per_link in section.get("turns", {}).items():
        if node not in network.intersections:
            raise ScenarioError(f"demand.turns.{node}", "unknown intersection")
        turns[node] = {}
        for from_link, frac_table in per_link.items():
            path = f"demand.turns.{node}.{from_link}"
            if from_link not in network.links:
                raise ScenarioError(path, "unresolved from-link")
            if network.links[from_link].to_node != node:
                raise ScenarioError(path, f"link does not end at {node}")
            fractions = {}
            for to_link, frac in frac_table.items():
                if to_link not in network.links:
                    raise ScenarioError(f"{path}.{to_link}", "unresolved to-link")
                if network.links[to_link].from_node != node:
                    raise ScenarioError(f"{path}.{to_link}", f"link does not start at {node}")
                fractions[str(to_link)] = float(frac)
            total = sum(fractions.values())
            if abs(total - 1.0) > 1e-9:
                raise ScenarioError(path, f"turning fractions sum to {total}, expected 1")
            turns[node][from_link] = fractions

    pce = {"car": 1.0, "truck": 2.0, "motorcycle": 0.5}
    pce.update({str(k): float(v) for k, v in section.get("pce", {}).items()})
    return DemandProfile(flows=tuple(flows), turns=turns, pce=pce)


def _parse_controller(section: dict, network: Network) -> tuple[str, dict]:
    _check_keys(section, "controller", "controller")
    ctype = str(section.get("type", "fixed"))
    if ctype not in CONTROLLER_NAMES:
        raise ScenarioError("controller.type", f"unknown controller '{ctype}'")
    cfg: dict[str, dict] = {}
    for name in ("initial", "fixed", "maxpressure", "scosca", "fairscosca1", "fairscosca2"):
        sub = section.get(name)
        if sub is None:
            continue
        _check_keys(sub, f"controller.{name}", f"controller.{name}")
        cfg[name] = dict(sub)
    if "initial" not in cfg:
        raise ScenarioError("controller.initial", "missing initial signal plan")
    for key in ("cycle", "greens"):
        if key not in cfg["initial"]:
            raise ScenarioError(f"controller.initial.{key}", "required")
    for plan_key in ("initial", "fixed"):
        plan = cfg.get(plan_key)
        if not plan or "greens" not in plan:
            continue
        for nid in plan["greens"]:
            if nid not in network.intersections:
                raise ScenarioError(f"controller.{plan_key}.greens.{nid}", "unknown intersection")
        for nid in plan.get("offsets", {}):
            if nid not in network.intersections:
                raise ScenarioError(f"controller.{plan_key}.offsets.{nid}", "unknown intersection")
    return ctype, cfg


def load_scenario(path: str | Path) -> Scenario:
    """Parse, schema-check, and cross-validate a scenario document."""
    text = Path(path).read_text(encoding="utf-8")
    return parse_scenario(text)


def parse_scenario(text: str) -> Scenario:
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        raise ScenarioError("document", f"parse error: {e}") from e

    for key in doc:
        if key not in _TOP_SECTIONS:
            raise ScenarioError(key, "unknown section")
    if "network" not in doc:
        raise ScenarioError("network", "missing section")

    net_section = doc["network"]
    _check_keys(net_section, "network", "network")
    for i, row in enumerate(net_section.get("links", [])):
        _check_keys(row, "network.links[]", f"network.links[{i}]")
    for i, row in enumerate(net_section.get("intersections", [])):
        _check_keys(row, "network.intersections[]", f"network.intersections[{i}]")
    for i, row in enumerate(net_section.get("districts", []) or []):
        _check_keys(row, "network.districts[]", f"network.districts[{i}]")

    network = load_network(net_section)
    demand = _parse_demand(doc.get("demand", {}), network)
    ctype, cfg = _parse_controller(doc.get("controller", {"type": "fixed", "initial": {}}), network)

    metrics = doc.get("metrics", {})
    _check_keys(metrics, "metrics", "metrics")
    runs = doc.get("runs", {})
    _check_keys(runs, "runs", "runs")
    seeds = tuple(int(s) for s in runs.get("seeds", (1,)))
    if len(set(seeds)) != len(seeds):
        raise ScenarioError("runs.seeds", "seeds must be distinct")
    horizon = int(runs.get("horizon", 3600))
    if horizon <= 0:
        raise ScenarioError("runs.horizon", f"horizon must be > 0, got {horizon}")
    controllers = tuple(str(c) for c in runs.get("controllers", (ctype,)))
    for c in controllers:
        if c not in CONTROLLER_NAMES:
            raise ScenarioError("runs.controllers", f"unknown controller '{c}'")

    return Scenario(
        network=network,
        demand=demand,
        controller_type=ctype,
        controller_cfg=cfg,
        warmup=int(metrics.get("warmup", 0)),
        mfd_window=int(metrics.get("mfd_window", 300)),
        horizon=horizon,
        seeds=seeds,
        controllers=controllers,
        baseline=str(runs.get("baseline", "scosca")),
        source_text=text,
    )
