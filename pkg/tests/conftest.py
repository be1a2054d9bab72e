import copy

import pytest
from hypothesis import settings

from signalcurate.network import parse_scenario
from signalcurate.sim import Simulator

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


def toy_doc(n_approaches=1, lost_time=0.0, saturation=0.5, length=10.0, speed=10.0, vph=0.0, horizon=100):
    """One intersection; approach ``j`` is lane ``a{j}`` feeding exit lane ``b{j}``.

    Approaches conflict pairwise, so each through movement is its own phase.
    """
    lanes, roads, moves, flows = {}, [], [], []
    for j in range(1, n_approaches + 1):
        a, b = f"a{j}", f"b{j}"
        lanes[a] = {"length": length, "speed": speed}
        lanes[b] = {"length": length, "speed": speed}
        roads.append({"id": f"r{a}", "from": None, "to": 1, "lanes": [a]})
        roads.append({"id": f"r{b}", "from": 1, "to": None, "lanes": [b]})
        moves.append({"id": j, "from": a, "to": b, "turn": "through"})
        flows.append({"id": f"f{j}", "route": [a, b], "schedule": [[0, horizon, vph]]})
    conflicts = [[i, j] for i in range(1, n_approaches + 1) for j in range(i + 1, n_approaches + 1)]
    return {
        "name": "toy",
        "lanes": lanes,
        "roads": roads,
        "intersections": [{
            "id": 1,
            "incoming": [f"a{j}" for j in range(1, n_approaches + 1)],
            "outgoing": [f"b{j}" for j in range(1, n_approaches + 1)],
            "movements": moves,
            "conflicts": conflicts,
        }],
        "demand": {"flows": flows},
        "sim": {"tick": 1, "saturation_flow": saturation, "lost_time": lost_time, "horizon": horizon, "seed": 0},
    }


def toy_sim(**kw) -> Simulator:
    return Simulator(*parse_scenario(toy_doc(**kw)))


@pytest.fixture
def toy():
    return toy_sim


@pytest.fixture
def toy_document():
    return lambda **kw: copy.deepcopy(toy_doc(**kw))
