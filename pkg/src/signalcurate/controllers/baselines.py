"""Random, fixed-time and max-pressure baseline controllers."""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from ..network.model import Intersection, TimingAction
from .encoding import NodeView, StateEncoding, encode_state, pressure_select_phase

MAX_PRESSURE_DURATION = 15.0
FIXED_TIME_DURATION = 20.0


class Controller:
    """Decides a timing action whenever an intersection's green runs out."""

    name = "controller"
    window = 1

    def reset(self, sim, seed: int) -> None:
        self.sim = sim
        self.views = [NodeView.from_sim(sim, k) for k in range(len(sim.net.intersections))]
        self.elapsed = [0.0] * len(sim.net.intersections)
        self.rng = np.random.default_rng(np.random.SeedSequence([int(seed) & (2**64 - 1), 0x5EED]))

    def encode(self, state, k: int, window: Optional[int] = None) -> StateEncoding:
        active = state.active[k]
        return encode_state(state.trace, self.views[k], active.phase if active else 0,
                            self.elapsed[k], window or self.window)

    def decide(self, sim, state, k: int) -> TimingAction:
        action = self.act(sim, state, k)
        prev = state.active[k]
        if prev is not None and prev.phase == action.phase:
            self.elapsed[k] += prev.duration
        else:
            self.elapsed[k] = 0.0
        return action

    def act(self, sim, state, k: int) -> TimingAction:  # pragma: no cover - abstract
        raise NotImplementedError

    def finish(self, sim, state) -> None:
        pass


def greedy_cycle(node: Intersection) -> list[int]:
    """Phase indices covering every movement, picking the largest new coverage first."""
    left = {m.id for m in node.movements}
    cycle = []
    while left:
        best = max(node.phases, key=lambda p: (len(p.movements & left), -p.index))
        cycle.append(best.index)
        left -= best.movements
    return sorted(cycle)


def baseline_action(kind: str, h: StateEncoding, node: Intersection, rng=None,
                    schedule: Optional[Sequence[tuple[int, float]]] = None, position: int = 0,
                    duration: float = MAX_PRESSURE_DURATION) -> TimingAction:
    """One baseline decision.

    ``random`` draws a uniform phase and a uniform duration in bounds.
    ``fixed_time`` returns ``schedule[position % len(schedule)]``.
    ``max_pressure`` takes the highest-pressure phase for ``duration`` seconds.
    """
    if kind == "random":
        phase = int(rng.integers(1, node.num_phases + 1))
        return TimingAction(phase, float(rng.uniform(node.d_min, node.d_max)))
    if kind == "fixed_time":
        if not schedule:
            raise ValueError("fixed_time needs a cyclic schedule")
        phase, dur = schedule[position % len(schedule)]
        return TimingAction(int(phase), float(dur))
    if kind == "max_pressure":
        return TimingAction(pressure_select_phase(h), node.clamp(duration))
    raise ValueError(f"unknown baseline {kind!r}")


class RandomController(Controller):
    name = "random"

    def act(self, sim, state, k):
        return baseline_action("random", None, sim.net.intersections[k], self.rng)


class FixedTimeController(Controller):
    name = "fixed_time"

    def __init__(self, schedule: Optional[Sequence[tuple[int, float]]] = None,
                 duration: float = FIXED_TIME_DURATION):
        self.schedule = [tuple(x) for x in schedule] if schedule else None
        self.duration = duration

    def reset(self, sim, seed):
        super().reset(sim, seed)
        self.position = [0] * len(sim.net.intersections)
        self.schedules = []
        for node in sim.net.intersections:
            if self.schedule is not None:
                sched = self.schedule
            else:
                sched = [(p, node.clamp(self.duration)) for p in greedy_cycle(node)]
            self.schedules.append(sched)

    def act(self, sim, state, k):
        action = baseline_action("fixed_time", None, sim.net.intersections[k],
                                 schedule=self.schedules[k], position=self.position[k])
        self.position[k] += 1
        return action


class MaxPressureController(Controller):
    name = "max_pressure"

    def __init__(self, duration: float = MAX_PRESSURE_DURATION):
        self.duration = duration

    def act(self, sim, state, k):
        return baseline_action("max_pressure", self.encode(state, k), sim.net.intersections[k],
                               duration=self.duration)
