"""Scenario file loading and validation.

A scenario is one JSON document::

    {
      "name": "optional label",
      "lanes": {"<lane>": {"length": 300.0, "speed": 13.89}, ...},
      "roads": [{"id": "r1", "from": 1 | null, "to": 2 | null, "lanes": ["<lane>", ...]}, ...],
      "intersections": [{
          "id": 1,
          "incoming": ["<lane>", ...],
          "outgoing": ["<lane>", ...],
          "movements": [{"id": 1, "from": "<lane>", "to": "<lane>", "turn": "left|through|right"}, ...],
          "bearings": {"<incoming lane>": 0.0, ...},        # optional
          "conflicts": [[1, 5], ...],                        # optional
          "phases": [[1, 2, 3], ...],                        # optional
          "d_min": 5, "d_max": 60                            # optional
      }, ...],
      "demand": {"flows": [{"id": "f1", "route": ["<lane>", ...],
                            "schedule": [[start_s, end_s, veh_per_hour], ...]}]},
      "sim": {"tick": 1, "saturation_flow": 0.5, "lost_time": 3, "horizon": 3600,
              "seed": 0, "vehicle_length": 7.5, "controller": {"kind": "max_pressure", ...}}
    }

A ``null`` road endpoint is the network boundary. Unknown keys anywhere are
rejected. Conflicts come from ``conflicts`` when given, otherwise from the
default geometric rule over ``bearings``. Phases come from ``phases`` when
given, otherwise they are the maximal compatible movement sets.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any

from ..sim.config import DemandProfile, Flow, SimConfig
from .conflicts import conflicts_from_geometry
from .model import (
    ConflictRelation,
    Intersection,
    Lane,
    Movement,
    Phase,
    Road,
    RoadNetwork,
    Turn,
    ValidationError,
    validate_network,
)
from .phases import enumerate_phases

DEFAULT_D_MIN = 5.0
DEFAULT_D_MAX = 60.0

_TOP_KEYS = {"name", "intersections", "roads", "lanes", "demand", "sim"}
_LANE_KEYS = {"length", "speed"}
_ROAD_KEYS = {"id", "from", "to", "lanes"}
_NODE_KEYS = {"id", "incoming", "outgoing", "movements", "bearings", "conflicts", "phases", "d_min", "d_max"}
_MOVE_KEYS = {"id", "from", "to", "turn"}
_DEMAND_KEYS = {"flows"}
_FLOW_KEYS = {"id", "route", "schedule"}
_SIM_KEYS = {"tick", "saturation_flow", "lost_time", "horizon", "seed", "vehicle_length", "controller"}


class ScenarioParseError(ValueError):
    """The scenario file is not a well-formed document."""


def _check_keys(obj: Any, allowed: set, where: str, required: set = frozenset()) -> None:
    if not isinstance(obj, dict):
        raise ValidationError(f"{where}: expected an object")
    unknown = set(obj) - allowed
    if unknown:
        raise ValidationError(f"{where}: unknown key {sorted(unknown)[0]!r}")
    missing = set(required) - set(obj)
    if missing:
        raise ValidationError(f"{where}: missing key {sorted(missing)[0]!r}")


def load_scenario(path) -> tuple[RoadNetwork, DemandProfile, SimConfig]:
    path = Path(path)
    raw = path.read_bytes()
    try:
        doc = json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ScenarioParseError(f"{path}: {exc}") from exc
    return parse_scenario(doc)


def parse_scenario(doc: dict) -> tuple[RoadNetwork, DemandProfile, SimConfig]:
    _check_keys(doc, _TOP_KEYS, "scenario", {"intersections", "roads", "lanes"})
    if not doc["intersections"]:
        raise ValidationError("no intersections")

    lanes = {}
    for lane_id, spec in doc["lanes"].items():
        _check_keys(spec, _LANE_KEYS, f"lane {lane_id}", _LANE_KEYS)
        lanes[lane_id] = Lane(lane_id, float(spec["length"]), float(spec["speed"]))

    roads = []
    for spec in doc["roads"]:
        _check_keys(spec, _ROAD_KEYS, f"road {spec.get('id') if isinstance(spec, dict) else spec}", _ROAD_KEYS)
        roads.append(Road(str(spec["id"]), spec["from"], spec["to"], tuple(spec["lanes"])))

    nodes = [_parse_intersection(spec) for spec in doc["intersections"]]
    net = RoadNetwork(tuple(nodes), tuple(roads), lanes)
    validate_network(net)

    demand = _parse_demand(doc.get("demand", {"flows": []}), net)
    sim_doc = doc.get("sim", {})
    _check_keys(sim_doc, _SIM_KEYS, "sim")
    try:
        cfg = SimConfig(**{k: v for k, v in sim_doc.items()})
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"sim: {exc}") from exc
    return net, demand, cfg


def _parse_intersection(spec: dict) -> Intersection:
    where = f"intersection {spec.get('id') if isinstance(spec, dict) else spec}"
    _check_keys(spec, _NODE_KEYS, where, {"id", "incoming", "outgoing", "movements"})
    node_id = int(spec["id"])
    incoming = tuple(spec["incoming"])
    outgoing = tuple(spec["outgoing"])
    movements = []
    for m in spec["movements"]:
        _check_keys(m, _MOVE_KEYS, f"{where} movement {m.get('id') if isinstance(m, dict) else m}", _MOVE_KEYS)
        try:
            turn = Turn(m["turn"])
        except ValueError:
            raise ValidationError(f"{where}: movement {m['id']} has unknown turn {m['turn']!r}") from None
        movements.append(Movement(int(m["id"]), m["from"], m["to"], turn))
    movements.sort(key=lambda m: m.id)

    # Lane membership is checked before conflicts need bearings for every from-lane.
    inc, out = set(incoming), set(outgoing)
    for m in movements:
        if m.from_lane not in inc:
            raise ValidationError(f"{where}: movement {m.id} from-lane {m.from_lane} is not incoming")
        if m.to_lane not in out:
            raise ValidationError(f"{where}: movement {m.id} to-lane {m.to_lane} is not outgoing")

    bearings = {k: float(v) for k, v in spec.get("bearings", {}).items()}
    if "conflicts" in spec:
        mids = {m.id for m in movements}
        for pair in spec["conflicts"]:
            if len(pair) != 2 or not set(pair) <= mids:
                raise ValidationError(f"{where}: conflict pair {pair} references unknown movement")
        conflicts = ConflictRelation.from_pairs(tuple(p) for p in spec["conflicts"])
    elif bearings or "phases" not in spec:
        missing = [m.from_lane for m in movements if m.from_lane not in bearings]
        if missing:
            raise ValidationError(f"{where}: no bearing for incoming lane {missing[0]} (needed for conflicts)")
        conflicts = conflicts_from_geometry(movements, bearings)
    else:
        conflicts = None

    if "phases" in spec:
        phases = []
        for q, members in enumerate(spec["phases"], start=1):
            if not members:
                raise ValidationError(f"{where}: phase {q} is empty")
            phases.append(Phase(q, frozenset(int(x) for x in members)))
    else:
        try:
            phases = enumerate_phases(movements, conflicts)
        except ValueError as exc:
            raise ValidationError(f"{where}: {exc}") from exc

    return Intersection(
        id=node_id,
        incoming=incoming,
        outgoing=outgoing,
        movements=tuple(movements),
        phases=tuple(phases),
        d_min=float(spec.get("d_min", DEFAULT_D_MIN)),
        d_max=float(spec.get("d_max", DEFAULT_D_MAX)),
        bearings=bearings,
        conflicts=conflicts,
    )


def _parse_demand(doc: dict, net: RoadNetwork) -> DemandProfile:
    _check_keys(doc, _DEMAND_KEYS, "demand")
    road_of = net.lane_road()
    links = {(m.from_lane, m.to_lane) for node in net.intersections for m in node.movements}
    flows = []
    seen = set()
    for spec in doc.get("flows", []):
        where = f"flow {spec.get('id') if isinstance(spec, dict) else spec}"
        _check_keys(spec, _FLOW_KEYS, where, _FLOW_KEYS)
        fid = str(spec["id"])
        if fid in seen:
            raise ValidationError(f"{where}: duplicate flow id")
        seen.add(fid)
        route = tuple(spec["route"])
        if len(route) < 2:
            raise ValidationError(f"{where}: route needs at least two lanes")
        for lane in route:
            if lane not in road_of:
                raise ValidationError(f"{where}: unknown lane {lane}")
        if road_of[route[0]].to_node is None:
            raise ValidationError(f"{where}: first lane {route[0]} does not end at an intersection")
        for a, b in zip(route, route[1:]):
            if (a, b) not in links:
                raise ValidationError(f"{where}: no movement connects {a} to {b}")
        schedule = []
        for window in spec["schedule"]:
            if len(window) != 3:
                raise ValidationError(f"{where}: schedule entries are [start, end, veh_per_hour]")
            start, end, rate = (float(x) for x in window)
            if rate < 0:
                raise ValidationError(f"{where}: negative rate {rate}")
            if end < start:
                raise ValidationError(f"{where}: window end {end} before start {start}")
            schedule.append((start, end, rate))
        flows.append(Flow(fid, route, tuple(schedule)))
    return DemandProfile(tuple(flows))


def scenario_to_dict(net: RoadNetwork, demand: DemandProfile, cfg: SimConfig, name: str | None = None) -> dict:
    """Inverse of ``parse_scenario`` (phases and conflicts written explicitly when no bearings exist)."""
    doc: dict[str, Any] = {}
    if name is not None:
        doc["name"] = name
    doc["lanes"] = {k: {"length": v.length, "speed": v.speed} for k, v in net.lanes.items()}
    doc["roads"] = [
        {"id": r.id, "from": r.from_node, "to": r.to_node, "lanes": list(r.lanes)} for r in net.roads
    ]
    nodes = []
    for node in net.intersections:
        spec: dict[str, Any] = {
            "id": node.id,
            "incoming": list(node.incoming),
            "outgoing": list(node.outgoing),
            "movements": [
                {"id": m.id, "from": m.from_lane, "to": m.to_lane, "turn": m.turn.value}
                for m in node.movements
            ],
        }
        if node.bearings:
            spec["bearings"] = dict(node.bearings)
        else:
            if node.conflicts is not None:
                spec["conflicts"] = sorted(sorted(p) for p in node.conflicts.pairs)
            spec["phases"] = [sorted(p.movements) for p in node.phases]
        spec["d_min"] = node.d_min
        spec["d_max"] = node.d_max
        nodes.append(spec)
    doc["intersections"] = nodes
    doc["demand"] = {
        "flows": [
            {"id": f.id, "route": list(f.route), "schedule": [list(w) for w in f.schedule]}
            for f in demand.flows
        ]
    }
    doc["sim"] = {
        "tick": cfg.tick,
        "saturation_flow": cfg.saturation_flow,
        "lost_time": cfg.lost_time,
        "horizon": cfg.horizon,
        "seed": cfg.seed,
        "vehicle_length": cfg.vehicle_length,
        "controller": dict(cfg.controller),
    }
    return doc
