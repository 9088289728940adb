"""Coordinated split / cycle / offset control and its two fairness extensions.

The controller runs three optimizers: a per-cycle green-split update driven by
degree-of-saturation differences, a Schmitt-trigger cycle-length regulator on
the network-wide saturation maximum (every fifth cycle), and a green-wave
offset builder that favours the most congested district (every fifth cycle).

``fairscosca1`` folds the cumulative waiting time of opposing approaches into
the green-split update through an exponential penalty; ``fairscosca2`` adds a
monitor that terminates an underused green early for a freshly arrived vehicle
facing a long red, repaying the cut in the following cycle.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

from corridorsim.controllers import Controller, ControllerContext, StepContext
from corridorsim.network import Network
from corridorsim.signal_core import PlanError, SignalPlan, fill_budget

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ScoscaParams:
    lambda1: float = 10.0   # s of green per unit of saturation difference
    lambda2: float = 200.0  # s of cycle per unit of saturation excess
    lambda3: float = 1.0    # offset scale on inter-junction travel times
    tau1: float = 3.0       # vehicles on the critical lane to enable split updates
    tau2: float = 0.5       # veh/lane congestion gap to enable offset updates
    g_min: int = 5
    g_max: int = 60
    c_min: int = 40
    c_max: int = 120
    ds_target_hi: float = 0.925
    ds_target_lo: float = 0.875
    cycle_opt_period: int = 5
    offset_opt_period: int = 5

    def __post_init__(self):
        if not (self.ds_target_lo < self.ds_target_hi):
            raise ValueError("ds_target_lo must be below ds_target_hi")
        if not (0 < self.g_min < self.g_max):
            raise ValueError("need 0 < g_min < g_max")
        if not (0 < self.c_min < self.c_max):
            raise ValueError("need 0 < c_min < c_max")


@dataclass(frozen=True)
class Fair1Params:
    alpha: float = 0.5   # demand/penalty balance in [0, 1]
    theta: float = 300.0  # s, waiting-time normalization scale

    def __post_init__(self):
        if not (0.0 <= self.alpha <= 1.0):
            raise ValueError("alpha must be in [0, 1]")
        if self.theta <= 0:
            raise ValueError("theta must be positive")


@dataclass(frozen=True)
class Fair2Params:
    ttg: float = 20.0  # s remaining wait that triggers a preemption
    teg: int = 8       # s of green transferred and later compensated

    def __post_init__(self):
        if self.teg <= 0:
            raise ValueError("teg must be positive")
        if self.ttg <= self.teg:
            logger.warning("ttg (%.1f) should exceed teg (%d)", self.ttg, self.teg)


@dataclass
class DsRecord:
    """Saturation snapshot for one intersection over one completed cycle."""

    link_ds: dict[str, float]
    phase_ds: list[float]
    dominant: int
    ds_diff: float
    max_ds_link: str

    @classmethod
    def from_links(cls, phase_of_links: list[list[str]], link_ds: dict[str, float]) -> "DsRecord":
        phase_ds = []
        for members in phase_of_links:
            values = [link_ds[z] for z in members if z in link_ds]
            phase_ds.append(max(values) if values else 0.0)
        dominant = max(range(len(phase_ds)), key=lambda j: (phase_ds[j], -j))
        ds_diff = max(phase_ds) - min(phase_ds)
        members = [z for z in phase_of_links[dominant] if z in link_ds]
        max_ds_link = max(members, key=lambda z: (link_ds[z], z)) if members else ""
        return cls(link_ds=dict(link_ds), phase_ds=phase_ds, dominant=dominant,
                   ds_diff=ds_diff, max_ds_link=max_ds_link)


# -- pure formulas ------------------------------------------------------------


def waste_time(t_no: float, s_z: int, t_ost: float) -> float:
    """Green seconds not used by discharging vehicles."""
    return t_no - s_z * t_ost


def compute_ds(g: float, t_no: float, s_z: int, t_ost: float) -> float:
    """Degree of saturation of a link over one cycle; above 1 means oversaturated."""
    if g <= 0:
        raise ValueError(f"green time must be positive, got {g}")
    return (g - waste_time(t_no, s_z, t_ost)) / g


def green_phase_optimize(
    greens: list[int],
    phase_ds: list[float],
    critical_count: int,
    params: ScoscaParams,
) -> list[int]:
    """Split update: grow the dominant phase by its saturation edge.

    Below the tau1 activity threshold the previous timings are retained. The
    non-dominant phases share the remaining budget proportionally to their
    current greens; an infeasible redistribution leaves the plan unchanged.
    """
    return fair1_green_update(greens, phase_ds, critical_count, 0.0, params, alpha=1.0)


def fair1_green_update(
    greens: list[int],
    phase_ds: list[float],
    critical_count: int,
    penalty: float,
    params: ScoscaParams,
    alpha: float,
) -> list[int]:
    """Green-split update with the waiting-time penalty folded in.

    With ``alpha=1`` and zero penalty this is exactly the plain split update.
    A negative reward never shrinks the dominant phase below its current green.
    """
    if critical_count <= params.tau1:
        return list(greens)
    dominant = max(range(len(phase_ds)), key=lambda j: (phase_ds[j], -j))
    ds_diff = max(phase_ds) - min(phase_ds)
    if alpha >= 1.0:
        reward = ds_diff * params.lambda1
    else:
        reward = (alpha * ds_diff - (1.0 - alpha) * penalty) * params.lambda1
    g_new = min(params.g_max, max(greens[dominant], greens[dominant] + int(round(reward))))
    if g_new == greens[dominant]:
        return list(greens)
    budget = sum(greens) - g_new
    others = [j for j in range(len(greens)) if j != dominant]
    try:
        refill = fill_budget([greens[j] for j in others], budget,
                             params.g_min, params.g_max, strict=True)
    except PlanError as e:
        logger.warning("green redistribution infeasible, keeping previous splits: %s", e)
        return list(greens)
    out = list(greens)
    out[dominant] = g_new
    for j, g in zip(others, refill):
        out[j] = g
    return out


def fair1_penalty(n_s_raw: float, theta: float) -> float:
    """Exponential penalty on the normalized worst opposing cumulative wait."""
    if n_s_raw < 0:
        raise ValueError(f"cumulative wait must be >= 0, got {n_s_raw}")
    return math.expm1(min(n_s_raw / theta, 700.0))


def cycle_length_optimize(ds_max: float, cycle: int, params: ScoscaParams) -> int:
    """Schmitt-trigger cycle regulator around the saturation target band.

    Above the upper threshold the cycle grows, below the lower one it shrinks;
    inside the dead band it is left unchanged.
    """
    if ds_max > params.ds_target_hi:
        grow = int(round((ds_max - params.ds_target_hi) * params.lambda2))
        return min(params.c_max, cycle + grow)
    if ds_max < params.ds_target_lo:
        shrink = int(round((params.ds_target_lo - ds_max) * params.lambda2))
        return max(params.c_min, cycle - shrink)
    return cycle


def offset_optimize(
    congestion: list[float],
    order: list[str],
    tt: dict[tuple[str, str], float],
    cycle: int,
    params: ScoscaParams,
    current: dict[str, int],
) -> dict[str, int]:
    """Green-wave offsets anchored on the most congested district.

    ``congestion`` is veh/lane per district (district order: front .. back).
    Offsets move outward from the anchor junction by lambda3 times the
    junction-to-junction travel time, reduced modulo the cycle length.
    """
    if len(congestion) < 2:
        return dict(current)
    ranked = sorted(range(len(congestion)), key=lambda d: (-congestion[d], d))
    top, second = ranked[0], ranked[1]
    if congestion[top] - congestion[second] <= params.tau2:
        return dict(current)

    n = len(order)
    raw = [0.0] * n

    def hop(a: int, b: int) -> float:
        key = (order[min(a, b)], order[max(a, b)])
        return params.lambda3 * tt[key]

    if top == 0:  # front district critical: reference the first junction
        for i in range(1, n):
            raw[i] = raw[i - 1] + hop(i - 1, i)
    elif top == len(congestion) - 1:  # back critical: reference the last junction
        for i in range(n - 2, -1, -1):
            raw[i] = raw[i + 1] + hop(i, i + 1)
    else:  # middle critical: zero at the centre junction, growing outward
        mid = n // 2
        for i in range(mid - 1, -1, -1):
            raw[i] = raw[i + 1] + hop(i, i + 1)
        for i in range(mid + 1, n):
            raw[i] = raw[i - 1] + hop(i - 1, i)

    return {order[i]: int(round(raw[i])) % cycle for i in range(n)}


def district_congestion(network: Network, counts: dict[str, int]) -> list[float]:
    """Vehicles per lane in each district (links grouped by their end junction)."""
    out = []
    for d in network.districts:
        links = network.district_links[d.name]
        vehicles = sum(counts.get(z, 0) for z in links)
        lanes = d.lane_count or 1
        out.append(vehicles / lanes)
    return out


# -- controllers ---------------------------------------------------------------


@dataclass
class PreemptLedgerEntry:
    cycle_index: int
    clock: int
    intersection: str
    from_phase: int
    to_phase: int
    teg: int
    remaining_wait: int


class ScoscaController(Controller):
    name = "scosca"

    def __init__(self, network: Network, initial_plan: SignalPlan,
                 params: ScoscaParams | None = None):
        self.network = network
        self.params = params or ScoscaParams()
        self.plan = initial_plan.copy()
        self.anchor = network.arterial_order()[0]
        self._ds_cache: dict[str, float] = {}
        self._log: list[dict] = []
        self._tt = network.travel_time_matrix()
        self._phase_links = {
            nid: [list(p.movements) for p in network.intersections[nid].phases]
            for nid in network.intersections
        }

    # -- hooks ---------------------------------------------------------------

    def on_cycle_end(self, ctx: ControllerContext) -> SignalPlan | None:
        nid = ctx.intersection_id
        link_ds = {}
        for z, data in ctx.detectors.items():
            if data.green_eff > 0:
                link_ds[z] = compute_ds(data.green_eff, data.t_no, data.s_z, data.t_ost)
        ds = DsRecord.from_links(self._phase_links[nid], link_ds)
        self._ds_cache.update(ds.link_ds)

        greens_before = list(self.plan.greens[nid])
        new_greens = self._green_update(ctx, ds, greens_before)
        if new_greens != greens_before:
            self.plan.greens[nid] = new_greens
            self._log.append({
                "clock": ctx.clock, "cycle": ctx.cycle_index, "intersection": nid,
                "optimizer": "green", "ds_diff": round(ds.ds_diff, 6),
                "before": greens_before, "after": new_greens,
            })

        if nid == self.anchor and ctx.cycle_index >= self.params.cycle_opt_period:
            if ctx.cycle_index % self.params.cycle_opt_period == 0:
                self._run_cycle_optimizer(ctx)
            if ctx.cycle_index % self.params.offset_opt_period == 0:
                self._run_offset_optimizer(ctx)
        return self.plan

    def _green_update(self, ctx: ControllerContext, ds: DsRecord,
                      greens: list[int]) -> list[int]:
        count = ctx.counts.get(ds.max_ds_link, 0)
        return green_phase_optimize(greens, ds.phase_ds, count, self.params)

    def _run_cycle_optimizer(self, ctx: ControllerContext) -> None:
        if not self._ds_cache:
            return
        ds_max = max(self._ds_cache.values())
        c_before = self.plan.cycle
        c_after = cycle_length_optimize(ds_max, c_before, self.params)
        if c_after == c_before:
            return
        # Rescale every intersection's splits into the new cycle budget.
        new_greens = {}
        for nid, node in self.network.intersections.items():
            budget = c_after - node.phase_count * node.yellow_time
            try:
                new_greens[nid] = fill_budget(self.plan.greens[nid], budget,
                                              self.params.g_min, self.params.g_max,
                                              strict=True)
            except PlanError as e:
                logger.warning("cycle change %d -> %d infeasible at %s: %s",
                               c_before, c_after, nid, e)
                return
        self.plan.cycle = c_after
        self.plan.greens = new_greens
        self.plan.offsets = {n: o % c_after for n, o in self.plan.offsets.items()}
        self._log.append({
            "clock": ctx.clock, "cycle": ctx.cycle_index, "intersection": "*",
            "optimizer": "cycle", "ds_max": round(ds_max, 6),
            "before": c_before, "after": c_after,
        })

    def _run_offset_optimizer(self, ctx: ControllerContext) -> None:
        congestion = district_congestion(self.network, ctx.counts)
        order = self.network.arterial_order()
        before = {n: self.plan.offsets.get(n, 0) for n in order}
        after = offset_optimize(congestion, order, self._tt, self.plan.cycle,
                                self.params, before)
        if after != before:
            self.plan.offsets = after
            self._log.append({
                "clock": ctx.clock, "cycle": ctx.cycle_index, "intersection": "*",
                "optimizer": "offset", "congestion": [round(c, 4) for c in congestion],
                "before": before, "after": after,
            })

    def decision_log(self) -> list[dict]:
        return self._log


class Fair1Controller(ScoscaController):
    """Split optimizer additionally penalized by opposing cumulative waits."""

    name = "fairscosca1"

    def __init__(self, network: Network, initial_plan: SignalPlan,
                 params: ScoscaParams | None = None,
                 fair: Fair1Params | None = None):
        super().__init__(network, initial_plan, params)
        self.fair = fair or Fair1Params()

    def _green_update(self, ctx: ControllerContext, ds: DsRecord,
                      greens: list[int]) -> list[int]:
        count = ctx.counts.get(ds.max_ds_link, 0)
        if self.fair.alpha >= 1.0:
            return green_phase_optimize(greens, ds.phase_ds, count, self.params)
        nid = ctx.intersection_id
        opposing = [
            z for j, members in enumerate(self._phase_links[nid]) if j != ds.dominant
            for z in members
        ]
        n_s_raw = max((ctx.n_z.get(z, 0) for z in opposing), default=0)
        penalty = fair1_penalty(float(n_s_raw), self.fair.theta)
        return fair1_green_update(greens, ds.phase_ds, count, penalty,
                                  self.params, self.fair.alpha)


class Fair2Controller(ScoscaController):
    """Plain split/cycle/offset control plus early termination of a running
    green for vehicles that just arrived on a long red (with next-cycle payback)."""

    name = "fairscosca2"

    def __init__(self, network: Network, initial_plan: SignalPlan,
                 params: ScoscaParams | None = None,
                 fair: Fair2Params | None = None):
        super().__init__(network, initial_plan, params)
        self.fair = fair or Fair2Params()
        self._last_preempt_cycle: dict[str, int] = {}
        self.preemptions: list[PreemptLedgerEntry] = []

    def on_step(self, ctx: StepContext, machines: dict) -> None:
        if math.isinf(self.fair.ttg):
            return
        for nid in self.network.arterial_order():
            machine = machines[nid]
            if machine.cycle_complete():
                continue
            phase_idx, in_yellow = machine.peek()
            if in_yellow:
                continue
            k = machine.cycle_index
            last = self._last_preempt_cycle.get(nid)
            # One preemption per cycle, and none in the cycle right after one.
            if last is not None and k - last <= 1:
                continue
            fired = False
            for j, members in enumerate(self._phase_links[nid]):
                if fired or j == phase_idx:
                    continue
                if not any(ctx.arrivals.get(z, 0) > 0 for z in members):
                    continue
                wait = machine.time_until_phase_green(j)
                if wait is None or wait <= self.fair.ttg:
                    continue
                if machine.can_preempt(j, self.fair.teg) is not None:
                    continue
                machine.preempt(j, self.fair.teg)
                machine.add_pending_compensation(phase_idx, self.fair.teg)
                self._last_preempt_cycle[nid] = k
                entry = PreemptLedgerEntry(
                    cycle_index=k, clock=ctx.clock, intersection=nid,
                    from_phase=phase_idx, to_phase=j, teg=self.fair.teg,
                    remaining_wait=wait,
                )
                self.preemptions.append(entry)
                self._log.append({
                    "clock": ctx.clock, "cycle": k, "intersection": nid,
                    "optimizer": "preempt", "from_phase": phase_idx,
                    "to_phase": j, "teg": self.fair.teg, "ttg": self.fair.ttg,
                    "remaining_wait": wait,
                })
                fired = True
