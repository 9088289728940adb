"""Controller interface and the Fixed-Cycle and Max-Pressure baselines."""

from __future__ import annotations

from dataclasses import dataclass, field

from corridorsim.network import Network
from corridorsim.signal_core import SignalPlan


@dataclass(frozen=True)
class LinkCycleData:
    """Detector readout for one link over one completed cycle."""

    t_no: int
    s_z: int
    t_ost: float
    green_eff: int


@dataclass(frozen=True)
class ControllerContext:
    """Read-only snapshot handed to a controller at a cycle boundary.

    Detector values correspond to the completed cycle ``cycle_index`` of
    ``intersection_id``; counts and queues are the network state at the
    boundary instant.
    """

    intersection_id: str
    cycle_index: int
    clock: int
    detectors: dict[str, LinkCycleData]
    counts: dict[str, int]
    queues: dict[str, int]
    queues_pce: dict[str, float]
    n_z: dict[str, int]
    plan: SignalPlan
    network: Network


@dataclass(frozen=True)
class StepContext:
    """Per-second observation for controllers that act between cycle boundaries."""

    clock: int
    queues: dict[str, int]
    queues_pce: dict[str, float]
    arrivals: dict[str, int]
    network: Network


class Controller:
    """Base controller: cycle-boundary plan updates plus an optional step hook."""

    name = "base"
    cyclic = True  # False for controllers that command phases directly

    def on_cycle_end(self, ctx: ControllerContext) -> SignalPlan | None:
        """Return an updated plan (effective from the next cycle) or None."""
        return None

    def on_step(self, ctx: StepContext, machines: dict) -> None:
        return None

    def decision_log(self) -> list[dict]:
        return []


class FixedCycleController(Controller):
    """Pretimed plan, never changed; offsets from the config honored verbatim."""

    name = "fixed"

    def __init__(self, plan: SignalPlan):
        self.plan = plan.copy()

    def on_cycle_end(self, ctx: ControllerContext) -> SignalPlan | None:
        return None


def phase_pressure(
    network: Network,
    intersection_id: str,
    phase_idx: int,
    queues: dict[str, float],
    turns: dict[str, dict[str, dict[str, float]]],
) -> float:
    """Back-pressure of one phase: sum over its movements of upstream queue
    minus turning-fraction-weighted downstream queue (zero for exit links)."""
    node = network.intersections[intersection_id]
    total = 0.0
    for z in node.phases[phase_idx].movements:
        downstream = 0.0
        for to_link, frac in turns.get(intersection_id, {}).get(z, {}).items():
            if to_link in network.phase_of:
                downstream += frac * queues.get(to_link, 0.0)
        total += queues.get(z, 0.0) - downstream
    return total


class MaxPressureController(Controller):
    """Acyclic back-pressure control: every decision interval, activate the
    phase with maximal pressure (ties to the lowest phase index)."""

    name = "maxpressure"
    cyclic = False

    def __init__(self, network: Network, turns, decision_interval: int = 10,
                 use_pce: bool = False):
        self.network = network
        self.turns = turns
        self.interval = decision_interval
        self.use_pce = use_pce

    def on_step(self, ctx: StepContext, machines: dict) -> None:
        if ctx.clock % self.interval != 0:
            return
        queues = ctx.queues_pce if self.use_pce else ctx.queues
        for nid in self.network.arterial_order():
            machine = machines[nid]
            if machine.in_yellow:
                continue
            node = self.network.intersections[nid]
            pressures = [
                phase_pressure(self.network, nid, j, queues, self.turns)
                for j in range(node.phase_count)
            ]
            best = max(range(node.phase_count), key=lambda j: (pressures[j], -j))
            if best != machine.active_phase:
                machine.request_phase(best)


def controller_params_schema() -> dict[str, dict[str, float]]:
    """Tunable-parameter tables per controller name (used by the tuner CLI)."""
    from corridorsim.scosca import Fair1Params, Fair2Params, ScoscaParams

    base = {f: getattr(ScoscaParams(), f) for f in ScoscaParams.__dataclass_fields__}
    return {
        "maxpressure": {"interval": 10},
        "scosca": dict(base),
        "fairscosca1": {**base, "alpha": Fair1Params().alpha, "theta": Fair1Params().theta},
        "fairscosca2": {**base, "ttg": Fair2Params().ttg, "teg": Fair2Params().teg},
    }
