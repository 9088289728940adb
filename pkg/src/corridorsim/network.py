"""Static corridor description: intersections, links, phases, detectors, districts.

A ``Network`` is immutable after construction and safe to share read-only
across parallel simulation runs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

ARTERIAL = "arterial"
FEEDER = "feeder"
INTERNAL = "internal"

_ORIGIN_CLASSES = (ARTERIAL, FEEDER, INTERNAL)


class ScenarioError(ValueError):
    """Raised for any invalid scenario content, with a path into the document."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


@dataclass(frozen=True)
class Link:
    """Directed road segment ending either at an intersection or a boundary node."""

    id: str
    from_node: str
    to_node: str
    length: float  # m
    lane_count: int
    free_flow_speed: float  # m/s
    saturation_flow: float  # veh/s of green per lane
    origin_class: str = INTERNAL
    has_stopline_detector: bool = True

    @property
    def travel_time(self) -> float:
        return self.length / self.free_flow_speed

    @property
    def travel_steps(self) -> int:
        """Free-flow traversal in whole 1 s simulation steps (at least 1)."""
        return max(1, int(round(self.travel_time)))

    @property
    def discharge_rate(self) -> float:
        """Max stop-line discharge, veh/s over all lanes."""
        return self.saturation_flow * self.lane_count

    @property
    def t_ost(self) -> float:
        """Optimal space time: ideal headway per vehicle at the stop line."""
        return 1.0 / self.discharge_rate


@dataclass(frozen=True)
class Phase:
    """Set of non-conflicting inbound links that receive green together."""

    index: int
    movements: tuple[str, ...]


@dataclass(frozen=True)
class Intersection:
    id: str
    phases: tuple[Phase, ...]
    min_green: int
    yellow_time: int
    position_index: int

    @property
    def phase_count(self) -> int:
        return len(self.phases)


@dataclass(frozen=True)
class District:
    """Contiguous run of intersections used by the offset optimizer."""

    name: str
    members: tuple[str, ...]
    lane_count: int = 0


@dataclass
class Network:
    """Validated corridor graph plus derived lookup tables."""

    intersections: dict[str, Intersection]
    links: dict[str, Link]
    districts: tuple[District, ...]
    # derived, filled by validate()
    phase_of: dict[str, tuple[str, int]] = field(default_factory=dict)
    district_links: dict[str, tuple[str, ...]] = field(default_factory=dict)

    def __post_init__(self):
        self.validate()

    # -- derived views -------------------------------------------------

    def arterial_order(self) -> list[str]:
        """Intersection ids sorted by position along the arterial axis."""
        return sorted(self.intersections, key=lambda i: self.intersections[i].position_index)

    def controlled_links(self, intersection_id: str) -> list[str]:
        out = []
        for phase in self.intersections[intersection_id].phases:
            out.extend(phase.movements)
        return out

    def sorted_links(self) -> list[str]:
        return sorted(self.links)

    def is_intersection(self, node: str) -> bool:
        return node in self.intersections

    def inbound_links(self, node: str) -> list[str]:
        return [z for z in self.sorted_links() if self.links[z].to_node == node]

    def travel_time(self, n: str, m: str) -> float:
        """Free-flow travel time in seconds between adjacent intersections.

        Follows the connecting link path from n to m; intermediate nodes must
        not be intersections themselves.
        """
        if n == m:
            raise ScenarioError("travel_time", f"zero-length path request ({n} -> {m})")
        if n not in self.intersections or m not in self.intersections:
            raise ScenarioError("travel_time", f"unknown intersection in pair ({n}, {m})")
        # BFS over links, allowing only non-intersection waypoints in between.
        best: dict[str, float] = {n: 0.0}
        frontier = [n]
        while frontier:
            node = frontier.pop(0)
            if node == m:
                return best[m]
            if node != n and self.is_intersection(node):
                continue
            for z in self.sorted_links():
                link = self.links[z]
                if link.from_node != node:
                    continue
                t = best[node] + link.travel_time
                if link.to_node not in best or t < best[link.to_node]:
                    best[link.to_node] = t
                    frontier.append(link.to_node)
        if m not in best:
            raise ScenarioError("travel_time", f"no connecting path {n} -> {m}")
        return best[m]

    def travel_time_matrix(self) -> dict[tuple[str, str], float]:
        """Travel times between consecutive intersections along the arterial."""
        order = self.arterial_order()
        return {
            (a, b): self.travel_time(a, b)
            for a, b in zip(order, order[1:])
        }

    # -- validation ------------------------------------------------------

    def validate(self) -> None:
        for z, link in self.links.items():
            path = f"network.links[{z}]"
            if link.length <= 0:
                raise ScenarioError(path, f"length must be > 0, got {link.length}")
            if link.lane_count < 1:
                raise ScenarioError(path, f"lanes must be >= 1, got {link.lane_count}")
            if link.free_flow_speed <= 0:
                raise ScenarioError(path, f"speed must be > 0, got {link.free_flow_speed}")
            if link.saturation_flow <= 0:
                raise ScenarioError(path, f"sat_flow must be > 0, got {link.saturation_flow}")
            if link.origin_class not in _ORIGIN_CLASSES:
                raise ScenarioError(path, f"class must be one of {_ORIGIN_CLASSES}")

        positions = set()
        self.phase_of = {}
        for nid, node in self.intersections.items():
            path = f"network.intersections[{nid}]"
            if not node.phases:
                raise ScenarioError(path, "phases must be nonempty")
            if node.min_green < 0:
                raise ScenarioError(path, f"min_green must be >= 0, got {node.min_green}")
            if node.yellow_time <= 0:
                raise ScenarioError(path, f"yellow_time must be > 0, got {node.yellow_time}")
            if node.position_index in positions:
                raise ScenarioError(path, f"duplicate position {node.position_index}")
            positions.add(node.position_index)
            for phase in node.phases:
                if not phase.movements:
                    raise ScenarioError(f"{path}.phases[{phase.index}]", "empty phase")
                for z in phase.movements:
                    if z not in self.links:
                        raise ScenarioError(
                            f"{path}.phases[{phase.index}]", f"unresolved link reference '{z}'"
                        )
                    if self.links[z].to_node != nid:
                        raise ScenarioError(
                            f"{path}.phases[{phase.index}]",
                            f"link '{z}' is not inbound to {nid}",
                        )
                    if z in self.phase_of:
                        raise ScenarioError(
                            f"{path}.phases[{phase.index}]",
                            f"link '{z}' appears in more than one phase",
                        )
                    self.phase_of[z] = (nid, phase.index)

        seen: set[str] = set()
        self.district_links = {}
        for d in self.districts:
            for nid in d.members:
                if nid not in self.intersections:
                    raise ScenarioError(
                        f"network.districts[{d.name}]", f"unknown intersection '{nid}'"
                    )
                if nid in seen:
                    raise ScenarioError(
                        f"network.districts[{d.name}]", f"intersection '{nid}' in two districts"
                    )
                seen.add(nid)
            members = set(d.members)
            self.district_links[d.name] = tuple(
                z for z in self.sorted_links() if self.links[z].to_node in members
            )
        if self.districts and seen != set(self.intersections):
            missing = sorted(set(self.intersections) - seen)
            raise ScenarioError("network.districts", f"intersections not covered: {missing}")


def _default_districts(order: list[str]) -> tuple[District, ...]:
    """Front / middle / back split over the arterial order.

    For 5 intersections: front = first two, middle = third, back = last two.
    Degenerate corridor sizes collapse to fewer districts.
    """
    n = len(order)
    if n == 1:
        groups = [("front", order)]
    elif n == 2:
        groups = [("front", order[:1]), ("back", order[1:])]
    else:
        f = max(1, (n - 1) // 2)
        b = max(1, n - f - 1)
        m = n - f - b
        if m == 0:
            f -= 1
            m = 1
        groups = [
            ("front", order[:f]),
            ("middle", order[f:f + m]),
            ("back", order[f + m:]),
        ]
    return tuple(District(name, tuple(members)) for name, members in groups if members)


def load_network(section: dict) -> Network:
    """Build and validate a Network from the parsed ``[network]`` section.

    Schema checking (unknown keys, types) is done by :mod:`corridorsim.scenario`;
    this performs reference resolution and physical-invariant validation.
    """
    yellow_default = int(section.get("yellow_time", 3))
    min_green_default = int(section.get("min_green", 5))

    links: dict[str, Link] = {}
    for i, row in enumerate(section.get("links", [])):
        path = f"network.links[{i}]"
        lid = str(row["id"])
        if lid in links:
            raise ScenarioError(path, f"duplicate link id '{lid}'")
        links[lid] = Link(
            id=lid,
            from_node=str(row["from"]),
            to_node=str(row["to"]),
            length=float(row["length"]),
            lane_count=int(row.get("lanes", 1)),
            free_flow_speed=float(row["speed"]),
            saturation_flow=float(row["sat_flow"]),
            origin_class=str(row.get("class", INTERNAL)),
            has_stopline_detector=bool(row.get("detector", True)),
        )

    intersections: dict[str, Intersection] = {}
    for i, row in enumerate(section.get("intersections", [])):
        path = f"network.intersections[{i}]"
        nid = str(row["id"])
        if nid in intersections:
            raise ScenarioError(path, f"duplicate intersection id '{nid}'")
        phases = tuple(
            Phase(index=j, movements=tuple(str(z) for z in movements))
            for j, movements in enumerate(row["phases"])
        )
        intersections[nid] = Intersection(
            id=nid,
            phases=phases,
            min_green=int(row.get("min_green", min_green_default)),
            yellow_time=int(row.get("yellow_time", yellow_default)),
            position_index=int(row["position"]),
        )

    order = sorted(intersections, key=lambda i: intersections[i].position_index)
    raw_districts = section.get("districts")
    if raw_districts:
        districts = tuple(
            District(name=str(row["name"]), members=tuple(str(m) for m in row["members"]))
            for row in raw_districts
        )
    else:
        districts = _default_districts(order)

    net = Network(intersections=intersections, links=links, districts=districts)
    # Fill district lane counts now that link references are validated.
    net.districts = tuple(
        District(
            name=d.name,
            members=d.members,
            lane_count=sum(net.links[z].lane_count for z in net.district_links[d.name]),
        )
        for d in net.districts
    )
    return net
