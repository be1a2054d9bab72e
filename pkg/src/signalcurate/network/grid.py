"""Synthetic rectangular grid scenarios.

Every node is a 4-leg intersection with one lane per road direction and
twelve movements (left/through/right from each arm). Boundary arms get an
entry road from outside and an exit road to outside. Demand enters at each
boundary entry lane: a share goes straight across the grid, the rest turns
once (left or right, at any node along the straight path) and then leaves.
"""

from __future__ import annotations

from ..sim.config import DemandProfile, Flow, SimConfig
from .conflicts import conflicts_from_geometry
from .model import Intersection, Lane, Movement, Road, RoadNetwork, Turn, validate_network
from .phases import enumerate_phases

ARMS = ("N", "E", "S", "W")
BEARING = {"N": 0.0, "E": 90.0, "S": 180.0, "W": 270.0}
_STEP = {"N": (-1, 0), "E": (0, 1), "S": (1, 0), "W": (0, -1)}
_OPPOSITE = {"N": "S", "S": "N", "E": "W", "W": "E"}
_LEFT_OF = {"N": "E", "E": "S", "S": "W", "W": "N"}  # arrival arm -> exit arm for a left turn
_RIGHT_OF = {"N": "W", "E": "N", "S": "E", "W": "S"}
TURN_ORDER = (Turn.LEFT, Turn.THROUGH, Turn.RIGHT)


def _exit_arm(arm: str, turn: Turn) -> str:
    if turn == Turn.THROUGH:
        return _OPPOSITE[arm]
    return _LEFT_OF[arm] if turn == Turn.LEFT else _RIGHT_OF[arm]


class GridBuilder:
    def __init__(self, rows: int, cols: int, link_length: float = 300.0,
                 edge_length: float = 150.0, speed: float = 13.89):
        if rows < 1 or cols < 1:
            raise ValueError("grid needs at least one row and one column")
        self.rows, self.cols = rows, cols
        self.link_length, self.edge_length, self.speed = link_length, edge_length, speed

    def node_id(self, r: int, c: int) -> int:
        return r * self.cols + c + 1

    def _neighbor(self, r: int, c: int, arm: str):
        dr, dc = _STEP[arm]
        rr, cc = r + dr, c + dc
        if 0 <= rr < self.rows and 0 <= cc < self.cols:
            return rr, cc
        return None

    def in_lane(self, r: int, c: int, arm: str) -> str:
        """Lane arriving at (r, c) from its ``arm`` side."""
        nb = self._neighbor(r, c, arm)
        me = self.node_id(r, c)
        if nb is None:
            return f"in{me}{arm}"
        return f"l{self.node_id(*nb)}_{me}"

    def out_lane(self, r: int, c: int, arm: str) -> str:
        nb = self._neighbor(r, c, arm)
        me = self.node_id(r, c)
        if nb is None:
            return f"out{me}{arm}"
        return f"l{me}_{self.node_id(*nb)}"

    def network(self, d_min: float = 5.0, d_max: float = 60.0) -> RoadNetwork:
        lanes: dict[str, Lane] = {}
        roads: list[Road] = []
        nodes: list[Intersection] = []
        for r in range(self.rows):
            for c in range(self.cols):
                me = self.node_id(r, c)
                for arm in ARMS:
                    nb = self._neighbor(r, c, arm)
                    out = self.out_lane(r, c, arm)
                    if nb is None:
                        inc = self.in_lane(r, c, arm)
                        lanes[inc] = Lane(inc, self.edge_length, self.speed)
                        roads.append(Road(f"r{inc}", None, me, (inc,)))
                        lanes[out] = Lane(out, self.edge_length, self.speed)
                        roads.append(Road(f"r{out}", me, None, (out,)))
                    else:
                        lanes[out] = Lane(out, self.link_length, self.speed)
                        roads.append(Road(f"r{out}", me, self.node_id(*nb), (out,)))
                nodes.append(build_four_leg(
                    me,
                    {arm: self.in_lane(r, c, arm) for arm in ARMS},
                    {arm: self.out_lane(r, c, arm) for arm in ARMS},
                    d_min, d_max,
                ))
        net = RoadNetwork(tuple(nodes), tuple(roads), lanes)
        validate_network(net)
        return net

    def _straight(self, r: int, c: int, heading_arm: str) -> list[tuple[int, int]]:
        """Nodes visited from (r, c) moving toward ``heading_arm`` until the boundary."""
        path = [(r, c)]
        while (nb := self._neighbor(*path[-1], heading_arm)) is not None:
            path.append(nb)
        return path

    def _route(self, nodes: list[tuple[int, int]], arrive_arms: list[str], exit_arm: str) -> tuple[str, ...]:
        lanes = [self.in_lane(*nodes[0], arrive_arms[0])]
        for k in range(1, len(nodes)):
            lanes.append(self.in_lane(*nodes[k], arrive_arms[k]))
        lanes.append(self.out_lane(*nodes[-1], exit_arm))
        return tuple(lanes)

    def demand(self, veh_per_hour: float, through_share: float = 0.6,
               duration: float = 3600.0) -> DemandProfile:
        flows = []
        for r in range(self.rows):
            for c in range(self.cols):
                for arm in ARMS:
                    if self._neighbor(r, c, arm) is not None:
                        continue
                    heading = _OPPOSITE[arm]
                    path = self._straight(r, c, heading)
                    options = []
                    options.append((through_share, path, [arm] * len(path), heading))
                    turn_opts = []
                    for k, node in enumerate(path):
                        for turn in (Turn.LEFT, Turn.RIGHT):
                            new_heading = _exit_arm(arm, turn)
                            tail = self._straight(*node, new_heading)
                            nodes = path[:k + 1] + tail[1:]
                            arrive = [arm] * (k + 1) + [_OPPOSITE[new_heading]] * (len(tail) - 1)
                            turn_opts.append((nodes, arrive, new_heading))
                    share = (1.0 - through_share) / len(turn_opts)
                    options += [(share, n, a, h) for n, a, h in turn_opts]
                    entry = self.in_lane(r, c, arm)
                    for j, (frac, nodes, arrive, exit_arm) in enumerate(options):
                        route = self._route(nodes, arrive, exit_arm)
                        flows.append(Flow(f"{entry}#{j}", route, ((0.0, duration, veh_per_hour * frac),)))
        return DemandProfile(tuple(flows))


def build_four_leg(node_id: int, incoming: dict, outgoing: dict,
                   d_min: float = 5.0, d_max: float = 60.0) -> Intersection:
    """Standard 4-leg intersection; movement id = 3 * arm index + turn index + 1."""
    movements = []
    for a, arm in enumerate(ARMS):
        for t, turn in enumerate(TURN_ORDER):
            movements.append(Movement(3 * a + t + 1, incoming[arm], outgoing[_exit_arm(arm, turn)], turn))
    bearings = {incoming[arm]: BEARING[arm] for arm in ARMS}
    conflicts = conflicts_from_geometry(movements, bearings)
    return Intersection(
        id=node_id,
        incoming=tuple(incoming[a] for a in ARMS),
        outgoing=tuple(outgoing[a] for a in ARMS),
        movements=tuple(movements),
        phases=tuple(enumerate_phases(movements, conflicts)),
        d_min=d_min,
        d_max=d_max,
        bearings=bearings,
        conflicts=conflicts,
    )


def grid_scenario(rows: int, cols: int, veh_per_hour: float = 300.0, horizon: int = 3600,
                  seed: int = 0, controller: dict | None = None, **builder_kw):
    builder = GridBuilder(rows, cols, **builder_kw)
    cfg = SimConfig(horizon=horizon, seed=seed, controller=dict(controller or {}))
    return builder.network(), builder.demand(veh_per_hour, duration=float(horizon)), cfg
