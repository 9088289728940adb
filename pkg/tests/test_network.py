"""Network loading, validation, and travel-time behavior."""

import pytest

from corridorsim.network import ScenarioError
from corridorsim.scenario import parse_scenario

from conftest import SINGLE_TOML


def test_minimal_single_intersection(single_scenario):
    net = single_scenario.network
    assert len(net.intersections) == 1
    assert len(net.links) == 4


def test_bundled_corridor_has_five_intersections(corridor_scenario):
    net = corridor_scenario.network
    assert len(net.intersections) == 5
    assert net.arterial_order() == ["I1", "I2", "I3", "I4", "I5"]


def test_link_in_two_phases_rejected():
    bad = SINGLE_TOML.replace('phases = [["NS"], ["EW"]]', 'phases = [["NS"], ["NS"]]')
    with pytest.raises(ScenarioError) as err:
        parse_scenario(bad)
    assert "NS" in str(err.value)


def test_unresolved_link_reference_rejected():
    bad = SINGLE_TOML.replace('phases = [["NS"], ["EW"]]', 'phases = [["NS"], ["XX"]]')
    with pytest.raises(ScenarioError) as err:
        parse_scenario(bad)
    assert "XX" in str(err.value)


def test_nonpositive_quantity_rejected():
    bad = SINGLE_TOML.replace("length = 139.0", "length = -3.0")
    with pytest.raises(ScenarioError) as err:
        parse_scenario(bad)
    assert "length" in str(err.value)


def test_unknown_key_rejected_with_path():
    bad = SINGLE_TOML.replace("lanes = 1", "lanes = 1\nwidth = 3.5", 1)
    with pytest.raises(ScenarioError) as err:
        parse_scenario(bad)
    assert "width" in str(err.value)


def test_travel_time_single_link(single_scenario):
    net = single_scenario.network
    link = net.links["NS"]
    assert link.travel_time == pytest.approx(10.0)  # 139 m at 13.9 m/s


def test_travel_time_between_adjacent(twin_scenario):
    net = twin_scenario.network
    assert net.travel_time("I1", "I2") == pytest.approx(10.0)  # 150 m at 15 m/s


def test_travel_time_zero_length_request(twin_scenario):
    with pytest.raises(ScenarioError):
        twin_scenario.network.travel_time("I1", "I1")


def test_travel_time_two_segment_path():
    # 100 m + 50 m at 10 m/s through a non-signalized waypoint: 15.0 s hand sum.
    doc = """
[network]
[[network.intersections]]
id = "A"
position = 1
phases = [["IN_A"]]

[[network.intersections]]
id = "B"
position = 2
phases = [["SEG2"]]

[[network.links]]
id = "IN_A"
from = "X"
to = "A"
length = 80.0
speed = 10.0
sat_flow = 1.0

[[network.links]]
id = "SEG1"
from = "A"
to = "MID"
length = 100.0
speed = 10.0
sat_flow = 1.0

[[network.links]]
id = "SEG2"
from = "MID"
to = "B"
length = 50.0
speed = 10.0
sat_flow = 1.0

[controller]
type = "fixed"

[controller.initial]
cycle = 36
greens = { A = [30], B = [30] }
"""
    net = parse_scenario(doc).network
    assert net.travel_time("A", "B") == pytest.approx(15.0)


def test_district_partition_exact(corridor_scenario):
    net = corridor_scenario.network
    covered = [m for d in net.districts for m in d.members]
    assert sorted(covered) == sorted(net.intersections)
    assert len(covered) == len(set(covered))


def test_district_missing_intersection_rejected():
    bad = SINGLE_TOML + '\n[[network.districts]]\nname = "front"\nmembers = ["NOPE"]\n'
    with pytest.raises(ScenarioError):
        parse_scenario(bad)


def test_phase_movements_are_inbound(corridor_scenario):
    net = corridor_scenario.network
    for nid, node in net.intersections.items():
        for phase in node.phases:
            for z in phase.movements:
                assert net.links[z].to_node == nid


def test_position_index_strict_order(corridor_scenario):
    net = corridor_scenario.network
    positions = [net.intersections[n].position_index for n in net.arterial_order()]
    assert positions == sorted(positions)
    assert len(set(positions)) == len(positions)


def test_turning_fractions_must_sum_to_one():
    bad = SINGLE_TOML.replace("NS = { S_OUT = 1.0 }", "NS = { S_OUT = 0.7 }")
    with pytest.raises(ScenarioError):
        parse_scenario(bad)


def test_duplicate_seeds_rejected():
    bad = SINGLE_TOML.replace("seeds = [1, 2]", "seeds = [1, 1]")
    with pytest.raises(ScenarioError):
        parse_scenario(bad)
