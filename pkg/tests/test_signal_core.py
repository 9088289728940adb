"""Signal plan execution: faces, plan swaps, transitions, preemption."""

import pytest

from corridorsim.network import Intersection, Phase
from corridorsim.signal_core import (
    CyclicSignalMachine,
    DirectSignalMachine,
    Face,
    PlanError,
    PreemptError,
    SignalPlan,
    cycle_position,
    faces_for,
    fill_budget,
)


def two_phase_node(yellow=3, min_green=5):
    return Intersection(
        "J", (Phase(0, ("P0",)), Phase(1, ("P1",))),
        min_green=min_green, yellow_time=yellow, position_index=1,
    )


def plan_for(node, cycle, greens, offset=0):
    return SignalPlan(cycle=cycle, greens={node.id: list(greens)},
                      offsets={node.id: offset})


def run_machine(machine, seconds, start=0):
    """Drive a machine standalone; returns the per-second (phase, yellow) list."""
    out = []
    for t in range(start, start + seconds):
        machine.finish_cycle_if_due(t)
        machine.start_next_cycle_if_due(t)
        out.append(machine.tick(t))
    return out


def test_faces_at_cycle_start_first_phase_green():
    node = two_phase_node()
    machine = CyclicSignalMachine(node, plan_for(node, 66, [30, 30]))
    display = run_machine(machine, 1)
    assert display[0] == (0, False)
    faces = faces_for(node, *display[0])
    assert faces["P0"] is Face.GREEN
    assert faces["P1"] is Face.RED


def test_faces_in_yellow_transition():
    node = two_phase_node()
    machine = CyclicSignalMachine(node, plan_for(node, 66, [30, 30]))
    display = run_machine(machine, 34)
    assert display[31] == (0, True)  # t=31 falls in phase-0 yellow [30, 33)
    faces = faces_for(node, *display[31])
    assert faces["P0"] is Face.YELLOW
    assert faces["P1"] is Face.RED
    assert display[33] == (1, False)  # phase-1 green starts at t=33


def test_offset_shifts_cycle_origin():
    node = two_phase_node()
    machine = CyclicSignalMachine(node, plan_for(node, 66, [30, 30], offset=10))
    display = run_machine(machine, 12)
    # At absolute t=10 the first phase starts fresh.
    assert display[10] == (0, False)
    assert machine.records == [] or machine.records[0].kind == "initial"
    # Before the origin, the machine sits mid-cycle (phase 1 region).
    assert display[0][0] == 1


def test_cyclic_equivalence_of_offsets():
    for t in range(0, 200, 7):
        assert cycle_position(t, 10, 66) == cycle_position(t, 10 + 66, 66)


def test_mutual_exclusion_every_second():
    node = two_phase_node()
    machine = CyclicSignalMachine(node, plan_for(node, 66, [30, 30]))
    for t in range(200):
        machine.finish_cycle_if_due(t)
        machine.start_next_cycle_if_due(t)
        faces = faces_for(node, *machine.tick(t))
        non_red = [z for z, f in faces.items() if f is not Face.RED]
        assert len(non_red) <= 1


def test_apply_plan_rejects_closure_violation():
    node = two_phase_node()
    machine = CyclicSignalMachine(node, plan_for(node, 66, [30, 30]))
    bad = plan_for(node, 66, [30, 29])
    with pytest.raises(PlanError):
        machine.apply_plan(bad, {node.id: node})


def test_apply_identical_plan_is_noop():
    node = two_phase_node()
    plan = plan_for(node, 66, [30, 30])
    machine = CyclicSignalMachine(node, plan)
    machine.apply_plan(plan_for(node, 66, [30, 30]), {node.id: node})
    assert machine.pending_plan is None


def test_cycle_length_change_applies_at_boundary():
    node = two_phase_node()
    machine = CyclicSignalMachine(node, plan_for(node, 90, [42, 42]))
    new = plan_for(node, 95, [45, 44])
    display = []
    for t in range(300):
        record = machine.finish_cycle_if_due(t)
        if record and record.cycle_index == 1:
            machine.apply_plan(new, {node.id: node})
        machine.start_next_cycle_if_due(t)
        display.append(machine.tick(t))
    cycles = machine.records
    assert cycles[0].length == 90
    assert cycles[1].length == 95  # the changed cycle has exactly 95 s
    assert cycles[1].kind == "full"


def test_running_cycle_never_truncated_by_plan_swap():
    node = two_phase_node()
    machine = CyclicSignalMachine(node, plan_for(node, 90, [42, 42]))
    new = plan_for(node, 60, [27, 27])
    for t in range(200):
        machine.finish_cycle_if_due(t)
        if t == 10:
            machine.apply_plan(new, {node.id: node})
        machine.start_next_cycle_if_due(t)
        machine.tick(t)
    assert machine.records[0].length == 90


def test_offset_change_realigns_with_bounded_transition():
    node = two_phase_node()
    machine = CyclicSignalMachine(node, plan_for(node, 66, [30, 30], offset=0))
    new = plan_for(node, 66, [30, 30], offset=20)
    for t in range(400):
        machine.finish_cycle_if_due(t)
        if t == 5:
            machine.apply_plan(new, {node.id: node})
        machine.start_next_cycle_if_due(t)
        machine.tick(t)
    kinds = [r.kind for r in machine.records]
    assert "transition" in kinds
    for r in machine.records:
        assert 33 <= r.length <= 99  # within [C/2, 3C/2]
        if r.kind == "full":
            assert (r.start - 20) % 66 == 0 or r.start < 5 + 66
    # every record closes exactly against its own length
    for r in machine.records:
        assert sum(r.displayed_greens) + r.yellow_displayed == r.length


def test_preempt_shifts_green_within_cycle():
    node = two_phase_node()
    machine = CyclicSignalMachine(node, plan_for(node, 86, [40, 40]), g_min=5, g_max=60)
    display = run_machine(machine, 15)  # 15 s into phase-0 green, 25 remaining
    assert machine.active_green_remaining() == 25
    machine.preempt(1, 10)
    assert machine.active_green_remaining() == 15
    while not machine.cycle_complete():
        machine.tick(0)
    record = machine.finish_cycle_if_due(86)
    assert record.scheduled_greens == [30, 50]  # 40-10 and 40+10
    assert record.displayed_greens == [30, 50]
    assert record.length == 86  # cycle length unchanged
    assert record.preempt == (0, 1, 10)


def test_preempt_rejects_cut_at_least_remaining():
    node = two_phase_node()
    machine = CyclicSignalMachine(node, plan_for(node, 86, [40, 40]), g_min=5, g_max=60)
    run_machine(machine, 15)
    with pytest.raises(PreemptError):
        machine.preempt(1, 25)  # cut == remaining green


def test_second_preempt_same_cycle_rejected():
    node = two_phase_node()
    machine = CyclicSignalMachine(node, plan_for(node, 86, [40, 40]), g_min=5, g_max=60)
    run_machine(machine, 10)
    machine.preempt(1, 5)
    with pytest.raises(PreemptError):
        machine.preempt(1, 5)


def test_preempt_rejects_bound_violations():
    node = two_phase_node()
    machine = CyclicSignalMachine(node, plan_for(node, 86, [40, 40]), g_min=38, g_max=42)
    run_machine(machine, 5)
    assert machine.can_preempt(1, 5) is not None  # would break both bounds


def test_preempt_requires_pending_green():
    node = two_phase_node()
    machine = CyclicSignalMachine(node, plan_for(node, 86, [40, 40]), g_min=5, g_max=60)
    run_machine(machine, 50)  # phase 1 active now; phase 0 green already passed
    assert machine.peek()[0] == 1
    assert machine.can_preempt(0, 5) is not None


def test_compensation_stretches_next_cycle():
    node = two_phase_node()
    machine = CyclicSignalMachine(node, plan_for(node, 86, [40, 40]), g_min=5, g_max=60)
    t = 0
    for t in range(10):
        machine.finish_cycle_if_due(t)
        machine.start_next_cycle_if_due(t)
        machine.tick(t)
    machine.preempt(1, 8)
    machine.add_pending_compensation(0, 8)
    records = []
    for t in range(10, 400):
        record = machine.finish_cycle_if_due(t)
        if record:
            records.append(record)
        machine.start_next_cycle_if_due(t)
        machine.tick(t)
    assert records[0].preempt == (0, 1, 8)
    assert records[1].compensation == (0, 8)
    assert records[1].scheduled_greens[0] == 48  # 40 + 8 back
    assert records[1].length == 94  # compensated cycle runs 8 s long
    assert records[2].kind == "transition"  # grid restored right after
    assert records[2].length == 78
    for r in records:
        assert sum(r.displayed_greens) + r.yellow_displayed == r.length


def test_fill_budget_exact_and_bounded():
    out = fill_budget([30, 30], 60, 5, 60)
    assert out == [30, 30]
    out = fill_budget([32, 28], 84, 5, 60)
    assert sum(out) == 84
    assert all(5 <= g <= 60 for g in out)
    out = fill_budget([50, 10], 90, 5, 60)
    assert sum(out) == 90
    assert all(5 <= g <= 60 for g in out)


def test_fill_budget_infeasible_raises():
    with pytest.raises(PlanError):
        fill_budget([30, 30], 8, 5, 60)
    with pytest.raises(PlanError):
        fill_budget([30, 30], 200, 5, 60)


def test_fill_budget_deterministic_tie_break():
    assert fill_budget([30, 30], 61, 5, 60) == fill_budget([30, 30], 61, 5, 60)
    assert sum(fill_budget([30, 30], 61, 5, 60)) == 61


def test_direct_machine_respects_min_green_and_yellow():
    node = two_phase_node(min_green=10)
    machine = DirectSignalMachine(node)
    greens = {0: 0, 1: 0}
    for t in range(100):
        if t == 4:
            assert machine.request_phase(1) is False  # min_green not served yet
        if t == 20:
            assert machine.request_phase(1) is True
        phase, yellow = machine.tick(t)
        if not yellow:
            greens[phase] += 1
    assert greens[1] > 0
    # switching inserted a full yellow period
    assert machine.node.yellow_time == 3


def test_direct_machine_green_runs_meet_min_green():
    node = two_phase_node(min_green=8)
    machine = DirectSignalMachine(node)
    display = []
    for t in range(200):
        machine.request_phase(t % 2)  # hammer switch requests
        display.append(machine.tick(t))
    runs = []
    current, count = None, 0
    for phase, yellow in display:
        key = ("Y", phase) if yellow else ("G", phase)
        if key == current:
            count += 1
        else:
            if current and current[0] == "G":
                runs.append(count)
            current, count = key, 1
    assert all(r >= 8 for r in runs)
