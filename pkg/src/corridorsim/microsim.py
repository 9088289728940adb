"""Deterministic fixed-step (1 s) point-queue microsimulation.

Vehicles traverse links at free-flow speed, stack in a vertical queue at the
stop line of controlled links, and discharge at up to saturation flow during
green. Stop-line detectors are emulated per link and accumulated per signal
cycle. Identical (scenario, seed) inputs produce bit-identical vehicle logs.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np

from corridorsim.network import Network
from corridorsim.scenario import DemandProfile
from corridorsim.signal_core import Face


@dataclass
class Vehicle:
    id: str
    route: tuple[str, ...]
    entry_time: int
    origin_class: str
    vehicle_class: str = "car"
    pce: float = 1.0
    exit_time: int | None = None
    cumulative_wait: int = 0
    link_wait: int = 0
    route_pos: int = 0

    def distance(self, network: Network) -> float:
        return sum(network.links[z].length for z in self.route)

    def free_flow_steps(self, network: Network) -> int:
        return sum(network.links[z].travel_steps for z in self.route)


@dataclass
class EntryEvent:
    step: int
    vehicle: Vehicle


@dataclass
class ExitRecord:
    id: str
    origin_class: str
    entry_time: int
    exit_time: int
    distance_m: float
    delay_s: float
    cumulative_wait_s: int
    censored: bool = False


@dataclass
class StepRecord:
    clock: int
    vehicles_present: int
    entered_cum: int
    exited_cum: int
    exited_now: int
    moving: int
    speed_sum: float  # sum of instantaneous speeds over vehicles present


class LinkState:
    """Runtime state of one link: in-transit vehicles, stop-line queue, detectors."""

    __slots__ = (
        "link", "controlled", "in_transit", "queue", "credit",
        "t_no", "s_z", "n_z", "arrivals_this_step", "departures_this_step",
    )

    def __init__(self, link, controlled: bool):
        self.link = link
        self.controlled = controlled
        self.in_transit: list[tuple[int, int, Vehicle]] = []  # (arrival_step, seq, vehicle)
        self.queue: list[Vehicle] = []
        self.credit = 0.0
        self.t_no = 0
        self.s_z = 0
        self.n_z = 0
        self.arrivals_this_step = 0
        self.departures_this_step = 0

    def vehicle_count(self) -> int:
        return len(self.in_transit) + len(self.queue)

    def queue_len(self) -> int:
        return len(self.queue)

    def queue_pce(self) -> float:
        return sum(v.pce for v in self.queue)


class Microsim:
    """Single-run simulation state; strictly sequential within a run."""

    def __init__(self, network: Network, entries: list[EntryEvent], horizon: int):
        self.network = network
        self.horizon = horizon
        self.clock = 0
        self.entered = 0
        self.exited = 0
        self._seq = 0
        self._entries = sorted(entries, key=lambda e: (e.step, e.vehicle.id))
        self._entry_pos = 0
        self.links: dict[str, LinkState] = {
            z: LinkState(network.links[z], z in network.phase_of)
            for z in network.sorted_links()
        }
        self._sorted_ids = network.sorted_links()
        self.active: dict[str, Vehicle] = {}
        self.exits: list[ExitRecord] = []
        self.steps: list[StepRecord] = []

    # -- helpers -------------------------------------------------------------

    def present(self) -> int:
        return len(self.active)

    def _schedule_arrival(self, vehicle: Vehicle, link_id: str, when: int) -> None:
        self._seq += 1
        heapq.heappush(self.links[link_id].in_transit, (when, self._seq, vehicle))

    def _enter_link(self, vehicle: Vehicle, link_id: str, now: int) -> None:
        self._schedule_arrival(vehicle, link_id, now + self.network.links[link_id].travel_steps)

    def _advance_route(self, vehicle: Vehicle, now: int) -> None:
        """Move a vehicle past the end of its current link (or out of the network)."""
        vehicle.route_pos += 1
        if vehicle.route_pos >= len(vehicle.route):
            self._record_exit(vehicle, now)
            return
        self._enter_link(vehicle, vehicle.route[vehicle.route_pos], now)

    def _record_exit(self, vehicle: Vehicle, now: int, censored: bool = False) -> None:
        vehicle.exit_time = now
        delay = max(0.0, float((now - vehicle.entry_time) - vehicle.free_flow_steps(self.network)))
        if censored:
            delay = float(vehicle.cumulative_wait)
        self.exits.append(ExitRecord(
            id=vehicle.id,
            origin_class=vehicle.origin_class,
            entry_time=vehicle.entry_time,
            exit_time=now,
            distance_m=vehicle.distance(self.network),
            delay_s=delay,
            cumulative_wait_s=vehicle.cumulative_wait,
            censored=censored,
        ))
        if not censored:
            self.exited += 1
            del self.active[vehicle.id]

    # -- the 1 s step -----------------------------------------------------

    def step(self, faces: dict[str, Face]) -> None:
        """Advance the world by exactly one second under the given signal faces."""
        t = self.clock
        # 1. Demand entries scheduled for this second.
        while self._entry_pos < len(self._entries) and self._entries[self._entry_pos].step == t:
            vehicle = self._entries[self._entry_pos].vehicle
            self._entry_pos += 1
            self.entered += 1
            self.active[vehicle.id] = vehicle
            self._enter_link(vehicle, vehicle.route[0], t)

        exited_before = self.exited
        moving = 0
        speed_sum = 0.0

        for z in self._sorted_ids:
            ls = self.links[z]
            ls.arrivals_this_step = 0
            ls.departures_this_step = 0

            # 2. In-transit vehicles reaching the end of the link.
            while ls.in_transit and ls.in_transit[0][0] <= t:
                _, _, vehicle = heapq.heappop(ls.in_transit)
                if ls.controlled:
                    vehicle.link_wait = 0
                    ls.queue.append(vehicle)
                    ls.arrivals_this_step += 1
                else:
                    self._advance_route(vehicle, t)

            # 3. Saturation-flow discharge on green.
            face = faces.get(z, Face.RED) if ls.controlled else Face.RED
            if ls.controlled:
                if face is Face.GREEN:
                    rate = ls.link.discharge_rate
                    head_pce = ls.queue[0].pce if ls.queue else 1.0
                    cap = max(float(math.ceil(rate)), head_pce)
                    ls.credit = min(ls.credit + rate, cap)
                    while ls.queue and ls.credit >= ls.queue[0].pce - 1e-9:
                        vehicle = ls.queue.pop(0)
                        ls.credit -= vehicle.pce
                        ls.n_z -= vehicle.link_wait
                        ls.departures_this_step += 1
                        ls.s_z += 1
                        self._advance_route(vehicle, t)
                    # Stop-line detector: unoccupied green second only when
                    # nothing crossed and no queue head is waiting at the line.
                    if ls.departures_this_step == 0 and not ls.queue:
                        ls.t_no += 1
                else:
                    ls.credit = 0.0

            # 4. Waiting-time accounting for vehicles still queued.
            q = len(ls.queue)
            if q:
                for vehicle in ls.queue:
                    vehicle.cumulative_wait += 1
                    vehicle.link_wait += 1
                ls.n_z += q

            moving += len(ls.in_transit)
            speed_sum += len(ls.in_transit) * ls.link.free_flow_speed

        self.clock = t + 1
        exited_now = self.exited - exited_before
        self.steps.append(StepRecord(
            clock=t,
            vehicles_present=self.present(),
            entered_cum=self.entered,
            exited_cum=self.exited,
            exited_now=exited_now,
            moving=moving,
            speed_sum=speed_sum,
        ))
        assert self.entered == self.exited + len(self.active)

    def finalize(self) -> None:
        """Record vehicles still in the network at horizon end as censored."""
        for vid in sorted(self.active):
            self._record_exit(self.active[vid], self.horizon, censored=True)

    # -- detector reads -------------------------------------------------------

    def read_and_reset_detectors(self, link_ids: list[str]) -> dict[str, tuple[int, int]]:
        """Per-cycle (T_NO, s_z) for the given links; resets the accumulators."""
        out = {}
        for z in link_ids:
            ls = self.links[z]
            out[z] = (ls.t_no, ls.s_z)
            ls.t_no = 0
            ls.s_z = 0
        return out


def vehicle_delay(record: ExitRecord) -> float:
    """Delay of an exited vehicle: actual travel time minus free-flow time."""
    if record.exit_time is None:
        raise ValueError(f"vehicle {record.id} still in network")
    return record.delay_s


def generate_demand(
    network: Network,
    profile: DemandProfile,
    seed: int,
    horizon: int,
) -> list[EntryEvent]:
    """Seeded Poisson arrivals per origin link with sampled turning decisions.

    The same (profile, seed, horizon) always yields a bit-identical stream.
    """
    origins = sorted(f.origin for f in profile.flows)
    flow_by_origin = {f.origin: f for f in profile.flows}
    root = np.random.SeedSequence(seed)
    children = root.spawn(len(origins))
    events: list[tuple[int, int, int, Vehicle]] = []

    for oi, origin in enumerate(origins):
        flow = flow_by_origin[origin]
        rng = np.random.default_rng(children[oi])
        link = network.links[origin]
        per_origin_seq = 0
        for t in range(horizon):
            lam = flow.rate_at(t) / 3600.0
            n = int(rng.poisson(lam)) if lam > 0 else 0
            for _ in range(n):
                vclass = _sample_class(rng, flow.class_mix)
                route = _sample_route(rng, network, profile, origin)
                vehicle = Vehicle(
                    id="",  # assigned after the global merge
                    route=route,
                    entry_time=t,
                    origin_class=link.origin_class,
                    vehicle_class=vclass,
                    pce=profile.pce.get(vclass, 1.0),
                )
                events.append((t, oi, per_origin_seq, vehicle))
                per_origin_seq += 1

    events.sort(key=lambda e: (e[0], e[1], e[2]))
    out = []
    for i, (t, _, _, vehicle) in enumerate(events):
        vehicle.id = f"v{i + 1:06d}"
        out.append(EntryEvent(step=t, vehicle=vehicle))
    return out


def _sample_class(rng: np.random.Generator, mix: tuple[tuple[str, float], ...]) -> str:
    if len(mix) == 1:
        return mix[0][0]
    u = rng.random()
    acc = 0.0
    for name, frac in mix:
        acc += frac
        if u < acc:
            return name
    return mix[-1][0]


def _sample_route(
    rng: np.random.Generator,
    network: Network,
    profile: DemandProfile,
    origin: str,
) -> tuple[str, ...]:
    route = [origin]
    current = origin
    while True:
        node = network.links[current].to_node
        if node not in network.intersections:
            break
        options = profile.turns.get(node, {}).get(current)
        if not options:
            break
        names = sorted(options)
        if len(names) == 1:
            nxt = names[0]
        else:
            u = rng.random()
            acc = 0.0
            nxt = names[-1]
            for name in names:
                acc += options[name]
                if u < acc:
                    nxt = name
                    break
        route.append(nxt)
        current = nxt
    return tuple(route)
