"""Pressure-selected phase plus critic-selected duration, trained online."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from ..network.model import TimingAction
from .baselines import Controller
from .critic import QUEUE_SCALE, CriticModel, Transition, critic_features, critic_update, critic_value, select_duration
from .encoding import NodeView, StateEncoding, pressure_select_phase
from .pool import ExperiencePool, PoolEntry, build_time_queue_map, propose_history
from .sampler import CandidateSet, GenerativeDurationSampler, build_candidates, propose_generative

CHECKPOINT_VERSION = 1


@dataclass
class AssistantConfig:
    window: int = 5
    pool_capacity: int = 4096
    history_k: int = 3
    generative_n: int = 5
    map_bins: int = 8
    map_excerpt: int = 3
    refit_every: int = 200
    replay_passes: int = 3


@dataclass(frozen=True)
class RLProposal:
    action: TimingAction
    q_rl: float
    quantiles: tuple[float, ...]
    rollout: tuple[float, ...]  # predicted incoming-lane queues after the action
    time_queue_map: tuple[tuple[float, float], ...]
    candidates: CandidateSet


class RLAssistant:
    """Owns the critic, the experience pool and the duration sampler."""

    def __init__(self, config: Optional[AssistantConfig] = None, critic: Optional[CriticModel] = None,
                 pool: Optional[ExperiencePool] = None,
                 sampler: Optional[GenerativeDurationSampler] = None):
        self.config = config or AssistantConfig()
        self.critic = critic or CriticModel()
        self.pool = pool or ExperiencePool(self.config.pool_capacity)
        self.sampler = sampler or GenerativeDurationSampler()
        self._since_fit = 0

    def candidates(self, h: StateEncoding, p: int, view: NodeView, rng) -> CandidateSet:
        hist = propose_history(self.pool, h.digest(p), p, self.config.history_k)
        gen = propose_generative(self.sampler, h, p, self.config.generative_n, rng)
        return build_candidates(hist, gen, view.d_min, view.d_max, phase=p)

    def decide(self, h: StateEncoding, view: NodeView, rng) -> tuple[int, float, CandidateSet]:
        p = pressure_select_phase(h)
        cands = self.candidates(h, p, view, rng)
        d = select_duration(cands.durations, self.critic, h, p, view.d_min, view.d_max)
        return p, d, cands

    def value(self, h: StateEncoding, p: int, d: float, view: NodeView) -> tuple[np.ndarray, float]:
        return critic_value(self.critic, h, p, d, view.d_min, view.d_max)

    def learn(self, transition: Transition, entry: PoolEntry) -> None:
        self.critic = critic_update(self.critic, [transition])
        self.pool.add(entry)
        self._since_fit += 1
        if self._since_fit >= self.config.refit_every:
            self.sampler.fit(self.pool)
            self._since_fit = 0

    def time_queue_map(self) -> list[tuple[float, float]]:
        return build_time_queue_map(self.pool, self.config.map_bins)

    # -- checkpoints -----------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "version": CHECKPOINT_VERSION,
            "config": self.config.__dict__.copy(),
            "critic": self.critic.to_dict(),
            "pool": self.pool.to_dict(),
            "sampler": self.sampler.to_dict(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "RLAssistant":
        if doc.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {doc.get('version')!r}")
        return cls(AssistantConfig(**doc["config"]), CriticModel.from_dict(doc["critic"]),
                   ExperiencePool.from_dict(doc["pool"]), GenerativeDurationSampler.from_dict(doc["sampler"]))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()), encoding="utf-8")

    @classmethod
    def load(cls, path) -> "RLAssistant":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


@dataclass
class _Pending:
    h: StateEncoding
    phase: int
    duration: float
    features: np.ndarray
    queue_sum: int
    tick: int


class AssistantController(Controller):
    """Online controller around an ``RLAssistant``.

    When ``train`` is set, each decision closes the previous one at the same
    intersection as a semi-Markov transition over the ``L`` seconds between
    them: the reward is ``-(mean total queue over those seconds) * (1 - g**L)``
    (queue in units of ``QUEUE_SCALE`` vehicles) and the bootstrap value, the
    best expectation over the new candidate set, is discounted by ``g**L``,
    where ``g`` is the critic's per-second ``gamma``. ``explore`` is the
    probability of executing a uniformly drawn duration instead of the
    critic's choice. At episode end the episode's transitions are replayed
    ``replay_passes`` more times in shuffled order.
    """

    name = "rl_assistant"

    def __init__(self, assistant: RLAssistant, train: bool = False, explore: float = 0.0):
        self.assistant = assistant
        self.train = train
        self.explore = explore
        self.window = assistant.config.window

    def reset(self, sim, seed):
        super().reset(sim, seed)
        self.pending: list[Optional[_Pending]] = [None] * len(sim.net.intersections)
        self.replay: list[Transition] = []

    def act(self, sim, state, k):
        view = self.views[k]
        h = self.encode(state, k)
        p, d, cands = self.assistant.decide(h, view, self.rng)
        if self.train:
            best_next = self.assistant.value(h, p, d, view)[1]
            self._close(sim, state, k, h, best_next)
            if self.explore > 0 and self.rng.random() < self.explore:
                d = float(self.rng.choice(np.arange(view.d_min, view.d_max + 1.0, 1.0)))
            phi = critic_features(h, p, d, view.d_min, view.d_max)
            self.pending[k] = _Pending(h, p, d, phi, int(state.node_queue_sum[k]), state.clock)
        return TimingAction(p, d)

    def _close(self, sim, state, k, h_now: StateEncoding, next_value: float) -> None:
        prev = self.pending[k]
        if prev is None:
            return
        ticks = max(1, state.clock - prev.tick)
        seconds = ticks * sim.cfg.tick
        mean_queue = (int(state.node_queue_sum[k]) - prev.queue_sum) / ticks / QUEUE_SCALE
        discount = self.assistant.critic.gamma ** seconds
        reward = -mean_queue * (1.0 - discount)
        tr = Transition(prev.features, reward, next_value, discount)
        self.replay.append(tr)
        self.assistant.learn(
            tr, PoolEntry(tuple(float(x) for x in prev.h.digest(prev.phase)), prev.phase, prev.duration, reward)
        )
        self.pending[k] = None

    def finish(self, sim, state):
        if not self.train:
            return
        for _ in range(self.assistant.config.replay_passes):
            order = self.rng.permutation(len(self.replay))
            self.assistant.critic = critic_update(self.assistant.critic, [self.replay[j] for j in order])
        self.assistant.sampler.fit(self.assistant.pool)


def rl_reference(sim, state, k: int, assistant: RLAssistant, rng, view: Optional[NodeView] = None,
                 h: Optional[StateEncoding] = None, rollout_horizon: Optional[int] = None) -> RLProposal:
    """Reference proposal for intersection ``k``: phase, critic-chosen duration,
    its expectation, the predicted queues after executing it, and the slice of
    the time-queue map nearest the current queue level."""
    from .encoding import encode_state

    view = view or NodeView.from_sim(sim, k)
    if h is None:
        active = state.active[k]
        h = encode_state(state.trace, view, active.phase if active else 0, 0.0, assistant.config.window)
    p, d, cands = assistant.decide(h, view, rng)
    quantiles, q_rl = assistant.value(h, p, d, view)
    action = TimingAction(p, d)
    horizon = rollout_horizon or max(1, sim.cfg.ticks(d))
    rollout = sim.rollout_predict(state, k, action, horizon)
    tq = assistant.time_queue_map()
    level = h.total_queue
    excerpt = sorted(tq, key=lambda e: (abs(e[0] - level), e[0]))[: assistant.config.map_excerpt]
    return RLProposal(
        action=action,
        q_rl=q_rl,
        quantiles=tuple(float(x) for x in quantiles),
        rollout=tuple(float(x) for x in rollout),
        time_queue_map=tuple(sorted(excerpt)),
        candidates=cands,
    )


def train_assistant(sim, seed: int, episodes: int = 2, explore: float = 0.1,
                    assistant: Optional[RLAssistant] = None, horizon: Optional[int] = None) -> RLAssistant:
    """Online training on seeds disjoint from the evaluation seed ``seed``."""
    from ..sim.runner import run_episode

    assistant = assistant or RLAssistant()
    for ep in range(episodes):
        run_episode(sim, AssistantController(assistant, train=True, explore=explore),
                    seed=1000 * (ep + 1) + int(seed), horizon=horizon)
    return assistant
