from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .engine import SimState, Simulator
from .metrics import MetricsReport, compute_metrics


class ConservationError(AssertionError):
    pass


@dataclass
class RunResult:
    metrics: MetricsReport
    state: SimState


def run_episode(sim: Simulator, controller, seed: Optional[int] = None, horizon: Optional[int] = None,
                check_conservation: bool = False, trace_file=None) -> RunResult:
    """Simulate ``horizon`` ticks: decisions, then arrivals, then one step per tick."""
    seed = sim.cfg.seed if seed is None else seed
    horizon = sim.cfg.horizon if horizon is None else horizon
    arrivals = sim.arrivals(seed, horizon)
    state = sim.initial_state()
    controller.reset(sim, seed)
    lanes = sim.incoming_lanes
    if trace_file is not None:
        trace_file.write("tick," + ",".join(sim.lane_ids[k] for k in lanes) + "\n")
    for t in range(horizon):
        for k in sim.needs_decision(state):
            sim.apply_timing(state, int(k), controller.decide(sim, state, int(k)))
        sim.spawn_vehicles(state, arrivals.at(t))
        sim.step(state)
        if check_conservation and state.spawned != state.queued + state.n_transit + state.completed:
            raise ConservationError(
                f"tick {t}: spawned {state.spawned} != queued {state.queued} + transit "
                f"{state.n_transit} + completed {state.completed}"
            )
        if trace_file is not None:
            trace_file.write(f"{t}," + ",".join(str(int(x)) for x in state.lane_queue[lanes]) + "\n")
    controller.finish(sim, state)
    cfg = sim.cfg
    metrics = compute_metrics(sim.records(state), state.queue_history, cfg.tick,
                              len(lanes), cfg.vehicle_length)
    return RunResult(metrics, state)
