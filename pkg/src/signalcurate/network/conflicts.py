"""Default movement conflict rule derived from turn classes and approach bearings."""

from __future__ import annotations

from typing import Mapping, Sequence

from .model import ConflictRelation, Movement, Turn

# Relative bearings within this many degrees count as the same / opposite approach.
_ANGLE_TOL = 45.0


def _relation(bearing_a: float, bearing_b: float) -> str:
    diff = (bearing_b - bearing_a) % 360.0
    if diff <= _ANGLE_TOL or diff >= 360.0 - _ANGLE_TOL:
        return "same"
    if abs(diff - 180.0) <= _ANGLE_TOL:
        return "opposite"
    return "crossing"


def movements_conflict(a: Movement, b: Movement, bearings: Mapping[str, float]) -> bool:
    if a.id == b.id:
        return False
    if a.to_lane == b.to_lane:
        return True
    if a.from_lane == b.from_lane:
        return False
    if Turn.RIGHT in (a.turn, b.turn):
        return False
    rel = _relation(bearings[a.from_lane], bearings[b.from_lane])
    if a.turn == Turn.THROUGH and b.turn == Turn.THROUGH:
        return rel == "crossing"
    if a.turn == Turn.LEFT and b.turn == Turn.LEFT:
        return rel == "crossing"
    # left against through
    return rel != "same"


def conflicts_from_geometry(
    movements: Sequence[Movement], bearings: Mapping[str, float]
) -> ConflictRelation:
    """Geometric crossing rule.

    Movements into the same outgoing lane always conflict; movements out of the
    same incoming lane never do. Right turns otherwise conflict with nothing.
    Throughs conflict with throughs from crossing approaches, lefts with lefts
    from crossing approaches, and a left conflicts with every through that does
    not share its approach. ``bearings`` maps incoming lane id to the compass
    bearing (degrees) of its approach arm.
    """
    pairs = []
    for i, a in enumerate(movements):
        for b in movements[i + 1:]:
            if movements_conflict(a, b, bearings):
                pairs.append((a.id, b.id))
    return ConflictRelation.from_pairs(pairs)


def default_conflicts(intersection) -> ConflictRelation:
    return conflicts_from_geometry(intersection.movements, intersection.bearings)
