"""Per-intersection signal state machines.

Two drivers are provided:

* ``CyclicSignalMachine`` executes a :class:`SignalPlan` (cycle length, offset,
  green splits) as back-to-back cycles with yellow transitions, supports plan
  swaps at cycle boundaries, offset re-alignment via one stretched or shrunk
  transition cycle, and mid-cycle green preemption with next-cycle
  compensation.
* ``DirectSignalMachine`` serves acyclic controllers that command phases
  directly (used by the max-pressure baseline).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from corridorsim.network import Intersection


class Face(enum.Enum):
    GREEN = "G"
    YELLOW = "Y"
    RED = "R"


class PlanError(ValueError):
    """Rejected signal plan (cycle closure or bound violation)."""


class PreemptError(ValueError):
    """Rejected phase preemption request."""


def cycle_position(t: int, offset: int, cycle: int) -> int:
    """Position within the cycle at absolute time t for a given origin offset."""
    return (t - offset) % cycle


def fill_budget(
    weights: list[int],
    budget: int,
    g_min: int,
    g_max: int,
    strict: bool = True,
) -> list[int]:
    """Split an integer green budget across phases proportionally to weights.

    The result sums to ``budget`` exactly. With ``strict`` the per-phase bounds
    are enforced and an infeasible budget raises :class:`PlanError`; without it
    (transition cycles) only a 1 s floor is kept.
    """
    n = len(weights)
    if n == 0:
        raise PlanError("no phases to fill")
    lo, hi = (g_min, g_max) if strict else (1, max(budget, 1))
    if strict and not (n * g_min <= budget <= n * g_max):
        raise PlanError(f"budget {budget} infeasible for {n} phases in [{g_min}, {g_max}]")
    if not strict and budget < n:
        raise PlanError(f"budget {budget} cannot give every phase 1 s")
    total = sum(weights)
    if total <= 0:
        ideal = [budget / n] * n
    else:
        ideal = [w * budget / total for w in weights]
    alloc = [min(hi, max(lo, math.floor(x))) for x in ideal]
    diff = budget - sum(alloc)
    while diff != 0:
        step = 1 if diff > 0 else -1
        candidates = [
            i for i in range(n)
            if (step > 0 and alloc[i] < hi) or (step < 0 and alloc[i] > lo)
        ]
        if not candidates:
            raise PlanError("budget redistribution stuck (infeasible bounds)")
        # Favour the phase whose allocation is furthest below (or above) ideal.
        key = (lambda i: (alloc[i] - ideal[i], i)) if step > 0 else (lambda i: (ideal[i] - alloc[i], i))
        i = min(candidates, key=key)
        alloc[i] += step
        diff -= step
    return alloc


@dataclass
class SignalPlan:
    """Network-wide timing plan: common cycle, per-intersection offsets and splits."""

    cycle: int
    greens: dict[str, list[int]]
    offsets: dict[str, int]

    def copy(self) -> "SignalPlan":
        return SignalPlan(
            cycle=self.cycle,
            greens={n: list(g) for n, g in self.greens.items()},
            offsets=dict(self.offsets),
        )

    def validate(self, intersections: dict[str, Intersection], g_max: int | None = None) -> None:
        if self.cycle <= 0:
            raise PlanError(f"cycle must be > 0, got {self.cycle}")
        for nid, node in intersections.items():
            greens = self.greens.get(nid)
            if greens is None:
                raise PlanError(f"plan missing greens for {nid}")
            if len(greens) != node.phase_count:
                raise PlanError(
                    f"{nid}: {len(greens)} greens for {node.phase_count} phases"
                )
            closure = sum(greens) + node.phase_count * node.yellow_time
            if closure != self.cycle:
                raise PlanError(
                    f"{nid}: greens {greens} + yellows do not close the cycle "
                    f"({closure} != {self.cycle})"
                )
            for j, g in enumerate(greens):
                if g < 1:
                    raise PlanError(f"{nid}: phase {j} green {g} < 1 s")
                if g_max is not None and g > g_max:
                    raise PlanError(f"{nid}: phase {j} green {g} > g_max {g_max}")
            off = self.offsets.get(nid, 0)
            if not (0 <= off < self.cycle):
                raise PlanError(f"{nid}: offset {off} outside [0, {self.cycle})")

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, SignalPlan)
            and self.cycle == other.cycle
            and self.greens == other.greens
            and self.offsets == other.offsets
        )


@dataclass
class CycleRecord:
    """Bookkeeping for one completed signal cycle at one intersection."""

    intersection: str
    cycle_index: int
    start: int
    length: int
    kind: str  # "full" | "transition" | "initial"
    nominal_cycle: int
    scheduled_greens: list[int]
    displayed_greens: list[int]
    yellow_displayed: int
    preempt: tuple[int, int, int] | None = None  # (from_phase, to_phase, seconds)
    compensation: tuple[int, int] | None = None  # (gain_phase, seconds)


@dataclass
class _Segment:
    phase: int
    yellow: bool
    remaining: int


class CyclicSignalMachine:
    """Executes signal plans for one intersection, one second at a time.

    The runner drives it with, per simulated second: ``finish_cycle_if_due``,
    optional ``apply_plan``, ``start_next_cycle_if_due``, then ``tick``.
    """

    def __init__(self, intersection: Intersection, plan: SignalPlan,
                 g_min: int | None = None, g_max: int = 10 ** 6):
        self.node = intersection
        self.g_min = intersection.min_green if g_min is None else g_min
        self.g_max = g_max
        plan.validate({intersection.id: intersection})
        self.plan = plan.copy()
        self.pending_plan: SignalPlan | None = None
        self.cycle_index = 0
        self.records: list[CycleRecord] = []
        self._pending_comp: tuple[int, int, int] | None = None
        self._boundary_due = True
        self._init_partial_entry()

    # -- construction ----------------------------------------------------

    def _cycle_segments(self, greens: list[int]) -> list[_Segment]:
        segs: list[_Segment] = []
        for j, g in enumerate(greens):
            segs.append(_Segment(phase=j, yellow=False, remaining=g))
            segs.append(_Segment(phase=j, yellow=True, remaining=self.node.yellow_time))
        return segs

    def _init_partial_entry(self) -> None:
        """Enter the first cycle mid-way so that cycle origins sit on the offset grid."""
        offset = self.plan.offsets.get(self.node.id, 0)
        pos = cycle_position(0, offset, self.plan.cycle)
        greens = list(self.plan.greens[self.node.id])
        segs = self._cycle_segments(greens)
        skip = pos
        while skip > 0 and segs:
            if segs[0].remaining <= skip:
                skip -= segs[0].remaining
                segs.pop(0)
            else:
                segs[0].remaining -= skip
                skip = 0
        self.cycle_index = 1
        self._start_clock = 0
        self._kind = "full" if pos == 0 else "initial"
        self._cycle_len = self.plan.cycle - pos
        self._schedule = greens
        self._segments = segs
        self._displayed = [0] * len(greens)
        self._yellow_displayed = 0
        self._preempt: tuple[int, int, int] | None = None
        self._comp_applied: tuple[int, int] | None = None
        self._boundary_due = False
        # Cycle starts sit on the grid {t : (t - origin) % cycle == 0}.
        self._grid_cycle = self.plan.cycle
        self._grid_offset = offset
        self._grid_origin = offset % self.plan.cycle

    # -- cycle lifecycle ---------------------------------------------------

    def cycle_complete(self) -> bool:
        return all(s.remaining == 0 for s in self._segments)

    def finish_cycle_if_due(self, clock: int) -> CycleRecord | None:
        """Close the books on a completed cycle; returns its record once."""
        if self._boundary_due or not self.cycle_complete():
            return None
        record = CycleRecord(
            intersection=self.node.id,
            cycle_index=self.cycle_index,
            start=self._start_clock,
            length=clock - self._start_clock,
            kind=self._kind,
            nominal_cycle=self.plan.cycle,
            scheduled_greens=list(self._schedule),
            displayed_greens=list(self._displayed),
            yellow_displayed=self._yellow_displayed,
            preempt=self._preempt,
            compensation=self._comp_applied,
        )
        self.records.append(record)
        self._boundary_due = True
        return record

    def apply_plan(self, plan: SignalPlan, intersections: dict[str, Intersection]) -> None:
        """Queue a plan swap; takes effect at the next cycle boundary.

        The running cycle is never truncated by this path.
        """
        plan.validate(intersections)
        if plan == self.plan and self.pending_plan is None:
            return
        self.pending_plan = plan.copy()

    def add_pending_compensation(self, gain_phase: int, amount: int) -> None:
        """Grant the phase extra green at the start of the next cycle.

        The compensated cycle runs ``amount`` seconds long; the grid is
        restored by a shrunk re-alignment cycle right after.
        """
        self._pending_comp = (gain_phase, amount)

    def start_next_cycle_if_due(self, clock: int) -> None:
        if not self._boundary_due:
            return
        if self.pending_plan is not None:
            self.plan = self.pending_plan
            self.pending_plan = None
        cycle = self.plan.cycle
        offset = self.plan.offsets.get(self.node.id, 0)
        greens = list(self.plan.greens[self.node.id])
        yellow_total = self.node.phase_count * self.node.yellow_time

        if offset != self._grid_offset:
            # New offset: re-align to its grid (one transition cycle).
            self._grid_origin = offset % cycle
        elif cycle != self._grid_cycle:
            # Pure cycle-length change: rebase the grid here so the next
            # cycle simply runs the new length without a transition.
            self._grid_origin = clock % cycle
        self._grid_offset = offset
        self._grid_cycle = cycle

        mis = (self._grid_origin - clock) % cycle
        if mis == 0:
            kind, length = "full", cycle
            schedule = greens
        else:
            # Re-align to the grid with one stretched/shrunk cycle, bounded
            # to [C/2, 3C/2]; greens refilled proportionally.
            length = mis if mis >= (cycle + 1) // 2 else mis + cycle
            kind = "transition"
            schedule = fill_budget(greens, length - yellow_total, self.g_min, self.g_max,
                                   strict=False)

        comp = self._pending_comp
        if comp is not None:
            gain, amount = comp
            schedule = list(schedule)
            schedule[gain] += amount
            length += amount
            self._pending_comp = None

        self.cycle_index += 1
        self._start_clock = clock
        self._kind = kind
        self._cycle_len = length
        self._schedule = schedule
        self._segments = self._cycle_segments(schedule)
        self._displayed = [0] * len(schedule)
        self._yellow_displayed = 0
        self._preempt = None
        self._comp_applied = comp
        self._boundary_due = False

    # -- per-second display -------------------------------------------------

    def _current_segment(self) -> _Segment:
        for seg in self._segments:
            if seg.remaining > 0:
                return seg
        raise RuntimeError("tick past cycle end; boundary not processed")

    def tick(self, clock: int) -> tuple[int, bool]:
        """Display for this second: (active phase index, in_yellow)."""
        seg = self._current_segment()
        seg.remaining -= 1
        if seg.yellow:
            self._yellow_displayed += 1
        else:
            self._displayed[seg.phase] += 1
        return seg.phase, seg.yellow

    def peek(self) -> tuple[int, bool]:
        seg = self._current_segment()
        return seg.phase, seg.yellow

    # -- preemption (fair early phase termination) ---------------------------

    def active_green_remaining(self) -> int:
        seg = self._current_segment()
        return 0 if seg.yellow else seg.remaining

    def time_until_phase_green(self, phase: int) -> int | None:
        """Seconds until ``phase`` turns green within the current cycle.

        None if its green already started (or passed) this cycle.
        """
        wait = 0
        for seg in self._segments:
            if seg.remaining == 0:
                continue
            if not seg.yellow and seg.phase == phase:
                if wait == 0:
                    return None  # currently active
                return wait
            wait += seg.remaining
        return None

    def can_preempt(self, to_phase: int, cut: int) -> str | None:
        """Why a preemption would be rejected, or None if permitted."""
        if cut <= 0:
            return "cut must be positive"
        if self._preempt is not None:
            return "already preempted this cycle"
        seg = self._current_segment()
        if seg.yellow:
            return "no active green phase"
        j_a = seg.phase
        if to_phase == j_a:
            return "target phase is already active"
        if not (0 <= to_phase < len(self._schedule)):
            return "unknown phase"
        if self.time_until_phase_green(to_phase) is None:
            return "target phase has no pending green this cycle"
        if seg.remaining <= cut:
            return f"cut {cut} >= remaining green {seg.remaining}"
        if self._schedule[j_a] - cut < self.g_min:
            return f"cut pushes phase {j_a} below g_min"
        if self._schedule[to_phase] + cut > self.g_max:
            return f"cut pushes phase {to_phase} above g_max"
        return None

    def preempt(self, to_phase: int, cut: int) -> None:
        """End the active phase ``cut`` seconds early in favour of ``to_phase``.

        The target phase's green in the same cycle grows by ``cut``, preserving
        the cycle length exactly.
        """
        reason = self.can_preempt(to_phase, cut)
        if reason is not None:
            raise PreemptError(reason)
        seg = self._current_segment()
        j_a = seg.phase
        seg.remaining -= cut
        self._schedule[j_a] -= cut
        for other in self._segments:
            if not other.yellow and other.phase == to_phase and other.remaining > 0:
                other.remaining += cut
                break
        self._schedule[to_phase] += cut
        self._preempt = (j_a, to_phase, cut)


class DirectSignalMachine:
    """Acyclic phase control: hold a green until told to switch (yellow between)."""

    def __init__(self, intersection: Intersection, initial_phase: int = 0):
        self.node = intersection
        self.active_phase = initial_phase
        self.in_yellow = False
        self._yellow_remaining = 0
        self._pending = initial_phase
        self.green_elapsed = 0

    def request_phase(self, phase: int, honor_min_green: bool = True) -> bool:
        if self.in_yellow or phase == self.active_phase:
            return False
        if not (0 <= phase < self.node.phase_count):
            return False
        if honor_min_green and self.green_elapsed < self.node.min_green:
            return False
        self.in_yellow = True
        self._yellow_remaining = self.node.yellow_time
        self._pending = phase
        return True

    def tick(self, clock: int) -> tuple[int, bool]:
        display = (self.active_phase, self.in_yellow)
        if self.in_yellow:
            self._yellow_remaining -= 1
            if self._yellow_remaining == 0:
                self.active_phase = self._pending
                self.in_yellow = False
                self.green_elapsed = 0
        else:
            self.green_elapsed += 1
        return display


def faces_for(intersection: Intersection, phase_idx: int, in_yellow: bool) -> dict[str, Face]:
    """Per-link faces given the active phase display of one intersection."""
    faces: dict[str, Face] = {}
    for phase in intersection.phases:
        face = Face.RED
        if phase.index == phase_idx:
            face = Face.YELLOW if in_yellow else Face.GREEN
        for z in phase.movements:
            faces[z] = face
    return faces
