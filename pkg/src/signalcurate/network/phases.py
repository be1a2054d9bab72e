from __future__ import annotations

from typing import Sequence

from .model import ConflictRelation, Movement, Phase

MAX_MOVEMENTS = 32


def enumerate_phases(movements: Sequence[Movement], conflicts: ConflictRelation) -> list[Phase]:
    """All maximal sets of mutually compatible movements.

    Bron-Kerbosch with pivoting on the compatibility graph, using bitmasks over
    the movement positions. Phases come back ordered by their sorted member ids,
    which orders them by lowest member first.
    """
    n = len(movements)
    if n > MAX_MOVEMENTS:
        raise ValueError(f"{n} movements exceeds the phase enumeration limit of {MAX_MOVEMENTS}")
    if n == 0:
        return []
    ids = [m.id for m in movements]
    compatible = [0] * n
    for i in range(n):
        for j in range(n):
            if i != j and not conflicts.conflicts(ids[i], ids[j]):
                compatible[i] |= 1 << j

    found: list[int] = []

    def expand(r: int, p: int, x: int) -> None:
        if not p and not x:
            found.append(r)
            return
        pivot_pool = p | x
        pivot = max(_bits(pivot_pool), key=lambda u: (compatible[u] & p).bit_count())
        for v in _bits(p & ~compatible[pivot]):
            bit = 1 << v
            expand(r | bit, p & compatible[v], x & compatible[v])
            p &= ~bit
            x |= bit

    expand(0, (1 << n) - 1, 0)
    members = sorted({tuple(sorted(ids[k] for k in _bits(mask))) for mask in found})
    return [Phase(index=q, movements=frozenset(m)) for q, m in enumerate(members, start=1)]


def _bits(mask: int):
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low
