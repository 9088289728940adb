"""Shared fixtures: small hand-checkable scenarios and the bundled corridor."""

from importlib import resources

import pytest

from corridorsim.scenario import load_scenario, parse_scenario

SINGLE_TOML = """
[network]
yellow_time = 3
min_green = 5

[[network.intersections]]
id = "J"
position = 1
phases = [["NS"], ["EW"]]

[[network.links]]
id = "NS"
from = "N"
to = "J"
length = 139.0
lanes = 1
speed = 13.9
sat_flow = 1.0
class = "arterial"

[[network.links]]
id = "EW"
from = "E"
to = "J"
length = 100.0
lanes = 1
speed = 10.0
sat_flow = 1.0
class = "feeder"

[[network.links]]
id = "S_OUT"
from = "J"
to = "S"
length = 50.0
lanes = 1
speed = 10.0
sat_flow = 1.0
detector = false

[[network.links]]
id = "W_OUT"
from = "J"
to = "W"
length = 60.0
lanes = 1
speed = 10.0
sat_flow = 1.0
detector = false

[demand]

[[demand.flows]]
origin = "NS"
rate = [[0, 360]]

[[demand.flows]]
origin = "EW"
rate = [[0, 180]]

[demand.turns.J]
NS = { S_OUT = 1.0 }
EW = { W_OUT = 1.0 }

[controller]
type = "fixed"

[controller.initial]
cycle = 66
greens = { J = [30, 30] }
offsets = { J = 0 }

[runs]
horizon = 600
seeds = [1, 2]
"""

TWIN_TOML = """
[network]
yellow_time = 3
min_green = 5

[[network.intersections]]
id = "I1"
position = 1
phases = [["A0"], ["F1"]]

[[network.intersections]]
id = "I2"
position = 2
phases = [["A1"], ["F2"]]

[[network.links]]
id = "A0"
from = "W"
to = "I1"
length = 150.0
lanes = 1
speed = 15.0
sat_flow = 0.5
class = "arterial"

[[network.links]]
id = "A1"
from = "I1"
to = "I2"
length = 150.0
lanes = 1
speed = 15.0
sat_flow = 0.5

[[network.links]]
id = "A2"
from = "I2"
to = "E"
length = 100.0
lanes = 1
speed = 15.0
sat_flow = 0.5
detector = false

[[network.links]]
id = "F1"
from = "N1"
to = "I1"
length = 100.0
lanes = 1
speed = 10.0
sat_flow = 0.5
class = "feeder"

[[network.links]]
id = "F2"
from = "N2"
to = "I2"
length = 100.0
lanes = 1
speed = 10.0
sat_flow = 0.5
class = "feeder"

[demand]

[[demand.flows]]
origin = "A0"
rate = [[0, 700]]

[[demand.flows]]
origin = "F1"
rate = [[0, 250]]

[[demand.flows]]
origin = "F2"
rate = [[0, 250]]

[demand.turns.I1]
A0 = { A1 = 1.0 }
F1 = { A1 = 1.0 }

[demand.turns.I2]
A1 = { A2 = 1.0 }
F2 = { A2 = 1.0 }

[controller]
type = "scosca"

[controller.initial]
cycle = 60
greens = { I1 = [30, 24], I2 = [30, 24] }

[controller.scosca]
lambda1 = 10.0
lambda2 = 100.0
lambda3 = 1.0
tau1 = 2.0
tau2 = 0.5
g_min = 8
g_max = 40
c_min = 40
c_max = 90

[controller.fairscosca2]
ttg = 15.0
teg = 5

[runs]
horizon = 900
seeds = [1]
"""


@pytest.fixture(scope="session")
def single_scenario():
    return parse_scenario(SINGLE_TOML)


@pytest.fixture(scope="session")
def twin_scenario():
    return parse_scenario(TWIN_TOML)


@pytest.fixture(scope="session")
def corridor_scenario():
    path = resources.files("corridorsim") / "scenarios" / "corridor5.toml"
    return load_scenario(str(path))
