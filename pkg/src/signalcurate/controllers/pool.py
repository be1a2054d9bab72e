from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class PoolEntry:
    digest: tuple[float, ...]  # (total queue, phase pressure, max pressure)
    phase: int
    duration: float
    ret: float


class ExperiencePool:
    """Ring buffer of executed (state digest, phase, duration, realized return)."""

    def __init__(self, capacity: int = 4096, digest_size: int = 3):
        if capacity < 1:
            raise ValueError("pool capacity must be >= 1")
        self.capacity = capacity
        self.digests = np.zeros((capacity, digest_size))
        self.phases = np.zeros(capacity, dtype=np.int64)
        self.durations = np.zeros(capacity)
        self.returns = np.zeros(capacity)
        self._size = 0
        self._next = 0

    def __len__(self) -> int:
        return self._size

    def __iter__(self):
        return iter(self.entries())

    def add(self, entry: PoolEntry) -> None:
        j = self._next
        self.digests[j] = entry.digest
        self.phases[j] = entry.phase
        self.durations[j] = entry.duration
        self.returns[j] = entry.ret
        self._next = (j + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def order(self) -> np.ndarray:
        """Slot indices, oldest first."""
        if self._size < self.capacity:
            return np.arange(self._size)
        return np.roll(np.arange(self.capacity), -self._next)

    def entries(self) -> list[PoolEntry]:
        return [
            PoolEntry(tuple(float(x) for x in self.digests[j]), int(self.phases[j]),
                      float(self.durations[j]), float(self.returns[j]))
            for j in self.order()
        ]

    def to_dict(self) -> dict:
        return {
            "capacity": self.capacity,
            "entries": [[list(e.digest), e.phase, e.duration, e.ret] for e in self.entries()],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperiencePool":
        pool = cls(doc["capacity"])
        for digest, phase, duration, ret in doc["entries"]:
            pool.add(PoolEntry(tuple(digest), int(phase), float(duration), float(ret)))
        return pool


def propose_history(pool: ExperiencePool, digest: Sequence[float], p: int, k: int = 3) -> list[float]:
    """Durations of the ``k`` same-phase entries nearest to ``digest``, best return first.

    Distance ties keep pool order (oldest first).
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    slots = pool.order()
    slots = slots[pool.phases[slots] == p]
    if len(slots) == 0:
        return []
    diff = pool.digests[slots] - np.asarray(digest, dtype=np.float64)
    dist = np.sqrt((diff * diff).sum(axis=1))
    nearest = slots[np.argsort(dist, kind="stable")[:k]]
    # best return first; equal returns keep nearest-first order
    nearest = nearest[np.argsort(-pool.returns[nearest], kind="stable")]
    return [float(pool.durations[j]) for j in nearest]


def build_time_queue_map(pool: ExperiencePool, bins: int = 8) -> list[tuple[float, float]]:
    """(bucket-center queue level, best-return duration) over equal-width queue buckets."""
    entries = pool.entries()
    if not entries:
        return []
    levels = np.array([e.digest[0] for e in entries])
    lo, hi = float(levels.min()), float(levels.max())
    if hi == lo:
        best = max(entries, key=lambda e: e.ret)
        return [(lo, best.duration)]
    width = (hi - lo) / bins
    idx = np.minimum(((levels - lo) / width).astype(int), bins - 1)
    out = []
    for b in range(bins):
        members = [entries[j] for j in np.flatnonzero(idx == b)]
        if members:
            best = max(members, key=lambda e: e.ret)
            out.append((lo + (b + 0.5) * width, best.duration))
    return out
