"""Discrete-time point-queue simulator.

Vehicles wait at the downstream end of a lane in one FIFO per movement (so a
left-turner never blocks a through vehicle on a shared lane). A green
movement outside lost time accrues ``saturation_flow * tick`` discharge
credit per tick while it has vehicles waiting; each whole unit of credit
releases one vehicle into transit on the movement's to-lane. Credit resets
to zero whenever the movement is red, in lost time, or empty. A vehicle in
transit joins the next queue (or completes, on its last lane) after the
lane's free-flow travel time.
"""

from __future__ import annotations

import copy
import hashlib
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..network.model import RoadNetwork, TimingAction
from .config import DemandProfile, SimConfig, VehicleRecord

TRACE_DEPTH = 32


@dataclass
class SimState:
    clock: int
    lane_queue: np.ndarray  # int64 per lane index
    move_count: np.ndarray  # int64 per global movement index
    move_queue: list  # deque of vehicle ids per global movement
    credit: np.ndarray  # float per global movement
    green: np.ndarray  # bool per global movement
    transit: dict  # arrival tick -> list of (vehicle id, lane index)
    n_transit: int
    active: list  # TimingAction | None per intersection index
    remaining: np.ndarray  # green ticks left per intersection
    lost: np.ndarray  # lost-time ticks left per intersection
    node_queue_sum: np.ndarray = None  # per intersection: sum over ticks of its incoming queue
    # per-vehicle columns
    v_flow: list = field(default_factory=list)
    v_pos: list = field(default_factory=list)
    v_spawn: list = field(default_factory=list)
    v_enter: list = field(default_factory=list)
    v_wait: list = field(default_factory=list)
    v_done: list = field(default_factory=list)
    v_queued: list = field(default_factory=list)
    spawned: int = 0
    completed: int = 0
    queued: int = 0
    queue_history: list = field(default_factory=list)  # total queued vehicles after each tick
    trace: deque = field(default_factory=lambda: deque(maxlen=TRACE_DEPTH))

    def clone(self) -> "SimState":
        out = copy.copy(self)
        for name in ("lane_queue", "move_count", "credit", "green", "remaining", "lost", "node_queue_sum"):
            setattr(out, name, getattr(self, name).copy())
        out.move_queue = [deque(q) for q in self.move_queue]
        out.transit = {k: list(v) for k, v in self.transit.items()}
        out.active = list(self.active)
        for name in ("v_flow", "v_pos", "v_spawn", "v_enter", "v_wait", "v_done", "v_queued", "queue_history"):
            setattr(out, name, list(getattr(self, name)))
        out.trace = deque(self.trace, maxlen=self.trace.maxlen)
        return out

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(repr((self.clock, self.n_transit, self.spawned, self.completed, self.queued)).encode())
        for arr in (self.lane_queue, self.move_count, self.credit, self.green, self.remaining, self.lost):
            h.update(arr.tobytes())
        h.update(repr([tuple(q) for q in self.move_queue]).encode())
        h.update(repr(sorted(self.transit.items())).encode())
        h.update(repr(self.active).encode())
        h.update(repr((self.v_pos, self.v_enter, self.v_wait, self.v_done)).encode())
        return h.hexdigest()

    @property
    def vehicles_in_system(self) -> int:
        return self.queued + self.n_transit + self.completed


class Simulator:
    """Compiled, read-only view of a network plus the operations on a ``SimState``."""

    def __init__(self, net: RoadNetwork, demand: DemandProfile, cfg: SimConfig):
        self.net, self.demand, self.cfg = net, demand, cfg
        self.lane_ids = list(net.lanes)
        self.lane_index = {lane: k for k, lane in enumerate(self.lane_ids)}
        self.node_index = {node.id: k for k, node in enumerate(net.intersections)}
        self.travel = np.array(
            [max(1, int(round(net.lanes[l].length / net.lanes[l].speed / cfg.tick))) for l in self.lane_ids],
            dtype=np.int64,
        )

        self.m_from: list[int] = []
        self.m_to: list[int] = []
        self.m_node: list[int] = []
        self.link: dict[tuple[int, int], int] = {}
        self.node_moves: list[dict[int, int]] = []  # local movement id -> global index
        self.node_incoming: list[np.ndarray] = []
        self.phase_moves: list[list[np.ndarray]] = []
        for k, node in enumerate(net.intersections):
            local = {}
            for m in node.movements:
                g = len(self.m_from)
                local[m.id] = g
                a, b = self.lane_index[m.from_lane], self.lane_index[m.to_lane]
                self.m_from.append(a)
                self.m_to.append(b)
                self.m_node.append(k)
                self.link[(a, b)] = g
            self.node_moves.append(local)
            self.node_incoming.append(np.array([self.lane_index[l] for l in node.incoming], dtype=np.int64))
            self.phase_moves.append(
                [np.array(sorted(local[m] for m in p.movements), dtype=np.int64) for p in node.phases]
            )
        self.m_from_arr = np.array(self.m_from, dtype=np.int64)
        self.m_to_arr = np.array(self.m_to, dtype=np.int64)
        self.n_moves = len(self.m_from)
        self.incoming_lanes = np.unique(np.concatenate(self.node_incoming))
        self._inc_concat = np.concatenate(self.node_incoming)
        self._inc_offsets = np.cumsum([0] + [len(x) for x in self.node_incoming[:-1]])

        self.flow_lanes: list[tuple[int, ...]] = []
        self.flow_moves: list[tuple[int, ...]] = []
        for f in demand.flows:
            lanes = tuple(self.lane_index[l] for l in f.route)
            self.flow_lanes.append(lanes)
            self.flow_moves.append(tuple(self.link[(a, b)] for a, b in zip(lanes, lanes[1:])))

    # -- state -----------------------------------------------------------
    def initial_state(self) -> SimState:
        n_nodes = len(self.net.intersections)
        return SimState(
            clock=0,
            lane_queue=np.zeros(len(self.lane_ids), dtype=np.int64),
            move_count=np.zeros(self.n_moves, dtype=np.int64),
            move_queue=[deque() for _ in range(self.n_moves)],
            credit=np.zeros(self.n_moves, dtype=np.float64),
            green=np.zeros(self.n_moves, dtype=bool),
            transit={},
            n_transit=0,
            active=[None] * n_nodes,
            remaining=np.zeros(n_nodes, dtype=np.int64),
            lost=np.zeros(n_nodes, dtype=np.int64),
            node_queue_sum=np.zeros(n_nodes, dtype=np.int64),
        )

    def arrivals(self, seed: Optional[int] = None, horizon: Optional[int] = None) -> "ArrivalStreams":
        return ArrivalStreams(self, self.cfg.seed if seed is None else seed,
                              self.cfg.horizon if horizon is None else horizon)

    # -- operations ------------------------------------------------------
    def spawn_vehicles(self, state: SimState, counts) -> list[int]:
        """Append ``counts[f]`` new vehicles of flow ``f`` to their entry queues."""
        new = []
        for f in np.flatnonzero(counts):
            m = self.flow_moves[f][0]
            lane = self.flow_lanes[f][0]
            q = state.move_queue[m]
            for _ in range(int(counts[f])):
                vid = len(state.v_flow)
                state.v_flow.append(int(f))
                state.v_pos.append(0)
                state.v_spawn.append(state.clock)
                state.v_enter.append(state.clock)
                state.v_wait.append(0)
                state.v_done.append(None)
                state.v_queued.append(True)
                q.append(vid)
                new.append(vid)
            n = int(counts[f])
            state.move_count[m] += n
            state.lane_queue[lane] += n
            state.queued += n
            state.spawned += n
        return new

    def apply_timing(self, state: SimState, node_index: int, action: TimingAction) -> None:
        node = self.net.intersections[node_index]
        node.check_action(action)
        prev = state.active[node_index]
        moves = self.phase_moves[node_index]
        switch = prev is not None and prev.phase != action.phase
        if prev is not None:
            state.green[moves[prev.phase - 1]] = False
        state.active[node_index] = action
        state.remaining[node_index] = max(1, self.cfg.ticks(action.duration))
        lost = self.cfg.ticks(self.cfg.lost_time) if switch else 0
        if lost > 0:
            state.lost[node_index] = lost
        else:
            state.lost[node_index] = 0
            state.green[moves[action.phase - 1]] = True

    def needs_decision(self, state: SimState) -> np.ndarray:
        """Intersection indices whose green has run out (or never started)."""
        return np.flatnonzero((state.remaining == 0) & (state.lost == 0))

    def step(self, state: SimState) -> None:
        clock = state.clock
        v_pos, v_enter, v_wait, v_flow = state.v_pos, state.v_enter, state.v_wait, state.v_flow

        arriving = state.transit.pop(clock, None)
        if arriving:
            for vid, lane in arriving:
                f = v_flow[vid]
                pos = v_pos[vid]
                state.n_transit -= 1
                if pos == len(self.flow_lanes[f]) - 1:
                    state.v_done[vid] = clock
                    state.completed += 1
                    continue
                m = self.flow_moves[f][pos]
                state.move_queue[m].append(vid)
                state.move_count[m] += 1
                state.lane_queue[lane] += 1
                state.queued += 1
                v_enter[vid] = clock
                state.v_queued[vid] = True

        eligible = state.green & (state.move_count > 0)
        credit = np.where(eligible, state.credit + self.cfg.saturation_flow * self.cfg.tick, 0.0)
        release = np.minimum(np.floor(credit).astype(np.int64), state.move_count)
        state.credit = credit - release
        for m in np.flatnonzero(release):
            n = int(release[m])
            q = state.move_queue[m]
            to_lane = self.m_to[m]
            arrival = clock + int(self.travel[to_lane])
            bucket = state.transit.setdefault(arrival, [])
            for _ in range(n):
                vid = q.popleft()
                v_wait[vid] += clock - v_enter[vid]
                v_pos[vid] += 1
                state.v_queued[vid] = False
                bucket.append((vid, to_lane))
            state.move_count[m] -= n
            state.lane_queue[self.m_from[m]] -= n
            state.queued -= n
            state.n_transit += n

        in_lost = state.lost > 0
        if in_lost.any():
            state.lost[in_lost] -= 1
            for k in np.flatnonzero(in_lost & (state.lost == 0)):
                state.green[self.phase_moves[k][state.active[k].phase - 1]] = True
        running = ~in_lost & (state.remaining > 0)
        state.remaining[running] -= 1

        state.node_queue_sum += np.add.reduceat(state.lane_queue[self._inc_concat], self._inc_offsets)
        state.queue_history.append(state.queued)
        state.trace.append(state.lane_queue.copy())
        state.clock = clock + 1

    def node_queues(self, state: SimState, node_index: int) -> np.ndarray:
        return state.lane_queue[self.node_incoming[node_index]].copy()

    def rollout_predict(self, state: SimState, node_index: int, action: TimingAction, horizon: int) -> np.ndarray:
        """Queue vector at ``node_index`` after ``horizon`` ticks under ``action``.

        Works on a clone with no new arrivals; every intersection repeats its
        current action when its green runs out. The live state is not touched.
        """
        if horizon < 1:
            raise ValueError(f"rollout horizon must be >= 1, got {horizon}")
        sim_state = state.clone()
        self.apply_timing(sim_state, node_index, action)
        for _ in range(horizon):
            for k in self.needs_decision(sim_state):
                held = sim_state.active[k]
                if held is not None:
                    self.apply_timing(sim_state, k, held)
            self.step(sim_state)
        return self.node_queues(sim_state, node_index)

    def records(self, state: SimState) -> list[VehicleRecord]:
        out = []
        for vid in range(len(state.v_flow)):
            done = state.v_done[vid]
            wait = state.v_wait[vid]
            if state.v_queued[vid]:
                wait += state.clock - state.v_enter[vid]
            out.append(VehicleRecord(vid, state.v_spawn[vid], done, wait))
        return out


class ArrivalStreams:
    """Poisson arrival counts per flow and tick, one independent stream per flow.

    Each flow's generator is seeded from ``(seed, flow id)`` so adding or
    removing flows leaves the others' arrival sequences unchanged.
    """

    def __init__(self, sim: Simulator, seed: int, horizon: int):
        tick = sim.cfg.tick
        times = np.arange(horizon) * tick
        self.counts = np.zeros((horizon, len(sim.demand.flows)), dtype=np.int64)
        for j, flow in enumerate(sim.demand.flows):
            key = int.from_bytes(hashlib.sha256(flow.id.encode()).digest()[:8], "little")
            rng = np.random.default_rng(np.random.SeedSequence([seed & (2**64 - 1), key]))
            rates = np.zeros(horizon)
            for start, end, vph in flow.schedule:
                rates[(times >= start) & (times < end)] = vph
            self.counts[:, j] = rng.poisson(rates / 3600.0 * tick)

    def at(self, tick: int) -> np.ndarray:
        if tick >= len(self.counts):
            return np.zeros(self.counts.shape[1], dtype=np.int64)
        return self.counts[tick]
