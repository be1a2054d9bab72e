from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional


@dataclass(frozen=True)
class SimConfig:
    tick: float = 1.0  # seconds per tick
    saturation_flow: float = 0.5  # vehicles / second / movement
    lost_time: float = 3.0  # seconds of all-red after a phase change
    horizon: int = 3600  # ticks
    seed: int = 0
    vehicle_length: float = 7.5  # meters per queued vehicle, for AQL
    controller: dict = field(default_factory=dict, compare=False, hash=False)

    def __post_init__(self):
        if self.tick <= 0:
            raise ValueError(f"tick must be > 0, got {self.tick}")
        if self.saturation_flow <= 0:
            raise ValueError(f"saturation_flow must be > 0, got {self.saturation_flow}")
        if self.lost_time < 0:
            raise ValueError(f"lost_time must be >= 0, got {self.lost_time}")
        if self.horizon < 1:
            raise ValueError(f"horizon must be >= 1, got {self.horizon}")

    def ticks(self, seconds: float) -> int:
        """Whole ticks covering ``seconds`` (rounded to nearest, never below zero)."""
        return max(0, int(round(seconds / self.tick)))


@dataclass(frozen=True)
class Flow:
    """Vehicles following one route, arriving with a piecewise-constant rate."""

    id: str
    route: tuple[str, ...]
    schedule: tuple[tuple[float, float, float], ...]  # (start s, end s, vehicles/hour)

    def rate_at(self, t_seconds: float) -> float:
        for start, end, vph in self.schedule:
            if start <= t_seconds < end:
                return vph
        return 0.0


@dataclass(frozen=True)
class DemandProfile:
    flows: tuple[Flow, ...] = ()

    def scaled(self, factor: float) -> "DemandProfile":
        return DemandProfile(
            tuple(
                Flow(f.id, f.route, tuple((a, b, r * factor) for a, b, r in f.schedule))
                for f in self.flows
            )
        )


@dataclass
class VehicleRecord:
    id: int
    spawn_tick: int
    completion_tick: Optional[int] = None
    waiting_ticks: int = 0
