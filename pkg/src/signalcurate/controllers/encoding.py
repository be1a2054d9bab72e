from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class NodeView:
    """Index arrays needed to read one intersection out of global lane vectors."""

    incoming: np.ndarray  # global lane indices, intersection order
    move_from: np.ndarray  # global lane index per local movement
    move_to: np.ndarray
    phase_matrix: np.ndarray  # (J, M) 0/1 membership
    d_min: float
    d_max: float

    @property
    def num_phases(self) -> int:
        return self.phase_matrix.shape[0]

    @classmethod
    def from_sim(cls, sim, node_index: int) -> "NodeView":
        node = sim.net.intersections[node_index]
        local = sim.node_moves[node_index]
        order = [m.id for m in node.movements]
        g = np.array([local[mid] for mid in order], dtype=np.int64)
        pos = {mid: j for j, mid in enumerate(order)}
        mat = np.zeros((len(node.phases), len(order)))
        for q, phase in enumerate(node.phases):
            for mid in phase.movements:
                mat[q, pos[mid]] = 1.0
        return cls(
            incoming=sim.node_incoming[node_index],
            move_from=sim.m_from_arr[g],
            move_to=sim.m_to_arr[g],
            phase_matrix=mat,
            d_min=node.d_min,
            d_max=node.d_max,
        )


@dataclass(frozen=True)
class StateEncoding:
    window: np.ndarray  # (W, n_incoming) queued vehicles, oldest row first
    pressures: np.ndarray  # (J,)
    phase: int  # active phase index, 0 when none
    elapsed: float  # seconds of green already given to the active phase

    @property
    def total_queue(self) -> float:
        return float(self.window[-1].sum())

    def digest(self, p: int) -> np.ndarray:
        """Intersection-agnostic summary used for pool look-ups."""
        return np.array([self.total_queue, float(self.pressures[p - 1]), float(self.pressures.max())])


def phase_pressures(queues: np.ndarray, view: NodeView) -> np.ndarray:
    """Per phase: sum over its movements of from-lane queue minus to-lane queue."""
    per_move = queues[view.move_from] - queues[view.move_to]
    return view.phase_matrix @ per_move.astype(np.float64)


def encode_state(trace: Sequence[np.ndarray], view: NodeView, phase: int = 0,
                 elapsed: float = 0.0, window: int = 5) -> StateEncoding:
    """Last ``window`` global lane-queue vectors restricted to the intersection.

    Missing history is zero-padded at the front. Pressures use the newest row.
    """
    rows = list(trace)[-window:] if window > 0 else []
    n_in = len(view.incoming)
    mat = np.zeros((window, n_in))
    for k, row in enumerate(rows):
        mat[window - len(rows) + k] = np.asarray(row)[view.incoming]
    if rows:
        pressures = phase_pressures(np.asarray(rows[-1]), view)
    else:
        pressures = np.zeros(view.num_phases)
    return StateEncoding(mat, pressures, phase, float(elapsed))


def pressure_select_phase(h: StateEncoding) -> int:
    """1-based index of the highest-pressure phase; ties go to the lowest index."""
    return int(np.argmax(h.pressures)) + 1
