"""Road network types: lanes, roads, movements, phases and timing actions."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional


class ValidationError(ValueError):
    """Raised when a network or scenario violates a structural invariant."""


class Turn(str, Enum):
    LEFT = "left"
    THROUGH = "through"
    RIGHT = "right"


@dataclass(frozen=True)
class Lane:
    id: str
    length: float  # meters
    speed: float  # free-flow, m/s


@dataclass(frozen=True)
class Road:
    """Directed road. ``None`` endpoints mark the network boundary (source or sink)."""

    id: str
    from_node: Optional[int]
    to_node: Optional[int]
    lanes: tuple[str, ...]


@dataclass(frozen=True)
class Movement:
    id: int
    from_lane: str
    to_lane: str
    turn: Turn


@dataclass(frozen=True)
class Phase:
    index: int  # 1-based
    movements: frozenset[int]


@dataclass(frozen=True)
class TimingAction:
    phase: int  # 1-based phase index
    duration: float  # seconds of green


@dataclass(frozen=True)
class ConflictRelation:
    """Symmetric, irreflexive conflict predicate over movement ids."""

    pairs: frozenset[frozenset[int]]

    @classmethod
    def from_pairs(cls, pairs) -> "ConflictRelation":
        out = set()
        for a, b in pairs:
            if a != b:
                out.add(frozenset((a, b)))
        return cls(frozenset(out))

    def conflicts(self, a: int, b: int) -> bool:
        if a == b:
            return False
        return frozenset((a, b)) in self.pairs


@dataclass(frozen=True)
class Intersection:
    id: int
    incoming: tuple[str, ...]
    outgoing: tuple[str, ...]
    movements: tuple[Movement, ...]
    phases: tuple[Phase, ...]
    d_min: float = 5.0
    d_max: float = 60.0
    bearings: dict = field(default_factory=dict, compare=False, hash=False)
    conflicts: Optional[ConflictRelation] = field(default=None, compare=False, hash=False)

    @property
    def num_phases(self) -> int:
        return len(self.phases)

    def movement(self, movement_id: int) -> Movement:
        for m in self.movements:
            if m.id == movement_id:
                return m
        raise KeyError(movement_id)

    def check_action(self, action: TimingAction) -> None:
        """Raise ``ValueError`` naming the violated bound."""
        if not 1 <= action.phase <= self.num_phases:
            raise ValueError(
                f"intersection {self.id}: phase index {action.phase} outside [1, {self.num_phases}]"
            )
        if action.duration < self.d_min:
            raise ValueError(
                f"intersection {self.id}: duration {action.duration} below D_min={self.d_min}"
            )
        if action.duration > self.d_max:
            raise ValueError(
                f"intersection {self.id}: duration {action.duration} above D_max={self.d_max}"
            )

    def clamp(self, duration: float) -> float:
        return min(max(duration, self.d_min), self.d_max)


@dataclass(frozen=True)
class RoadNetwork:
    intersections: tuple[Intersection, ...]
    roads: tuple[Road, ...]
    lanes: dict  # lane id -> Lane

    def intersection(self, node_id: int) -> Intersection:
        for node in self.intersections:
            if node.id == node_id:
                return node
        raise KeyError(node_id)

    def lane_road(self) -> dict[str, Road]:
        return {lane: road for road in self.roads for lane in road.lanes}


def validate_network(net: RoadNetwork) -> None:
    """Check every structural invariant; raise ``ValidationError`` naming the offender."""
    if not net.intersections:
        raise ValidationError("no intersections")
    ids = [n.id for n in net.intersections]
    if len(set(ids)) != len(ids):
        raise ValidationError(f"duplicate intersection id in {sorted(ids)}")
    node_ids = set(ids)

    owner: dict[str, str] = {}
    for road in net.roads:
        for end in (road.from_node, road.to_node):
            if end is not None and end not in node_ids:
                raise ValidationError(f"road {road.id}: unknown intersection {end}")
        if road.from_node is None and road.to_node is None:
            raise ValidationError(f"road {road.id}: both endpoints are boundary")
        if not road.lanes:
            raise ValidationError(f"road {road.id}: no lanes")
        for lane in road.lanes:
            if lane in owner:
                raise ValidationError(f"lane {lane}: on roads {owner[lane]} and {road.id}")
            if lane not in net.lanes:
                raise ValidationError(f"road {road.id}: lane {lane} missing from lane registry")
            owner[lane] = road.id
    for lane_id, lane in net.lanes.items():
        if lane_id not in owner:
            raise ValidationError(f"lane {lane_id}: belongs to no road")
        if lane.length <= 0 or lane.speed <= 0:
            raise ValidationError(f"lane {lane_id}: length and speed must be positive")

    road_of = net.lane_road()
    for node in net.intersections:
        if not node.incoming:
            raise ValidationError(f"intersection {node.id}: no incoming lanes")
        if not node.outgoing:
            raise ValidationError(f"intersection {node.id}: no outgoing lanes")
        for lane in node.incoming:
            if lane not in road_of or road_of[lane].to_node != node.id:
                raise ValidationError(f"intersection {node.id}: incoming lane {lane} does not end here")
        for lane in node.outgoing:
            if lane not in road_of or road_of[lane].from_node != node.id:
                raise ValidationError(f"intersection {node.id}: outgoing lane {lane} does not start here")
        if not 0 < node.d_min <= node.d_max:
            raise ValidationError(
                f"intersection {node.id}: need 0 < d_min <= d_max, got d_min={node.d_min}, d_max={node.d_max}"
            )
        mids = [m.id for m in node.movements]
        if len(set(mids)) != len(mids):
            raise ValidationError(f"intersection {node.id}: duplicate movement id")
        if not node.movements:
            raise ValidationError(f"intersection {node.id}: no movements")
        inc, out = set(node.incoming), set(node.outgoing)
        for m in node.movements:
            if m.from_lane not in inc:
                raise ValidationError(
                    f"intersection {node.id}: movement {m.id} from-lane {m.from_lane} is not incoming"
                )
            if m.to_lane not in out:
                raise ValidationError(
                    f"intersection {node.id}: movement {m.id} to-lane {m.to_lane} is not outgoing"
                )
        if not node.phases:
            raise ValidationError(f"intersection {node.id}: no phases")
        seen: set[frozenset[int]] = set()
        covered: set[int] = set()
        for k, phase in enumerate(node.phases, start=1):
            if phase.index != k:
                raise ValidationError(f"intersection {node.id}: phase index {phase.index} != {k}")
            if not phase.movements:
                raise ValidationError(f"intersection {node.id}: phase {k} is empty")
            unknown = phase.movements - set(mids)
            if unknown:
                raise ValidationError(
                    f"intersection {node.id}: phase {k} references unknown movement {min(unknown)}"
                )
            if phase.movements in seen:
                raise ValidationError(f"intersection {node.id}: phase {k} duplicates another phase")
            seen.add(phase.movements)
            if node.conflicts is not None:
                members = sorted(phase.movements)
                for i, a in enumerate(members):
                    for b in members[i + 1:]:
                        if node.conflicts.conflicts(a, b):
                            raise ValidationError(
                                f"intersection {node.id}: phase {k} holds conflicting movements {a} and {b}"
                            )
            covered |= phase.movements
        missing = set(mids) - covered
        if missing:
            raise ValidationError(f"intersection {node.id}: movement {min(missing)} is in no phase")
