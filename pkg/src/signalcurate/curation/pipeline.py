"""Per-decision deliberation and record construction along a simulated run."""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ..controllers.assistant import RLAssistant, rl_reference
from ..controllers.baselines import Controller
from ..deliberation.core import (
    DEFAULT_MARGIN,
    DEFAULT_PARALLELISM,
    Candidate,
    DeliberationContext,
    DeliberationUnavailable,
    deliberate,
    rl_prefilter,
)
from ..network.model import TimingAction
from ..sim.metrics import MetricsReport
from ..sim.runner import run_episode
from .priority import fuse_priority, label_record, rl_only_priorities
from .prompt import build_prompt, render_answer, render_state
from .records import PriorityConfig, PromptRecord, Provenance

log = logging.getLogger(__name__)


class CurationController(Controller):
    """Executes the highest-priority deliberated action and records every candidate.

    Candidates are the critic-scored durations of the ``top_phases``
    highest-pressure phases.
    """

    name = "curation"

    def __init__(self, assistant: RLAssistant, defenders: Sequence, consensus, cfg: PriorityConfig = PriorityConfig(),
                 K: int = 3, top_phases: int = 2, scenario: str = "", margin_frac: float = DEFAULT_MARGIN,
                 parallelism: int = DEFAULT_PARALLELISM):
        self.assistant = assistant
        self.defenders = list(defenders)
        self.consensus = consensus
        self.cfg = cfg
        self.K = K
        self.top_phases = top_phases
        self.scenario = scenario
        self.margin_frac = margin_frac
        self.parallelism = parallelism
        self.window = assistant.config.window

    def reset(self, sim, seed):
        super().reset(sim, seed)
        self.seed = seed
        self.records: list[PromptRecord] = []
        self.decisions = 0
        self.fallbacks = 0

    def act(self, sim, state, k):
        view = self.views[k]
        h = self.encode(state, k)
        node = sim.net.intersections[k]
        proposal = rl_reference(sim, state, k, self.assistant, self.rng, view, h)
        ranked = sorted(range(1, view.num_phases + 1), key=lambda p: (-h.pressures[p - 1], p))
        cands: list[Candidate] = []
        for p in ranked[: self.top_phases]:
            durations = (proposal.candidates.durations if p == proposal.action.phase
                         else self.assistant.candidates(h, p, view, self.rng).durations)
            for d in durations:
                cands.append(Candidate(TimingAction(p, d), self.assistant.value(h, p, d, view)[1]))
        state_text = render_state(h, [sim.lane_ids[j] for j in view.incoming], node.id, state.clock, self.scenario)
        ctx = DeliberationContext(
            state_text, tuple(cands),
            " ".join(f"{q:g}" for q in proposal.rollout),
            "; ".join(f"q={q:g} -> D={d:g}s" for q, d in proposal.time_queue_map),
        )
        try:
            res = deliberate(ctx, self.defenders, self.consensus, self.K, self.margin_frac, self.parallelism)
            filtered = res.filtered
            fused = fuse_priority({c.id: c.q_rl for c in filtered}, res.summary.scores, self.cfg)
            consensus_text, kept = res.summary.text, Provenance.DELIBERATED
        except DeliberationUnavailable as exc:
            log.warning("intersection %s tick %d: %s; falling back to critic priorities", node.id, state.clock, exc)
            self.fallbacks += 1
            filtered = rl_prefilter(cands, self.K, margin_frac=self.margin_frac)
            fused = rl_only_priorities({c.id: c.q_rl for c in filtered}, self.cfg)
            consensus_text, kept = None, Provenance.RL_ONLY
        prompt = build_prompt(state_text, proposal, consensus_text)
        chosen = max(filtered, key=lambda c: fused[c.id])  # first maximum in pre-filter order
        for c in cands:
            s, prov = label_record(c.id, fused, fused)
            if prov is Provenance.DELIBERATED:
                prov = kept
            ids = {"scenario": self.scenario, "seed": int(self.seed), "intersection": node.id,
                   "tick": int(state.clock), "action": c.id}
            self.records.append(PromptRecord(prompt, render_answer(c.action, h), s, prov, ids))
        self.decisions += 1
        return chosen.action


@dataclass
class CurationRun:
    records: list
    decisions: int
    fallbacks: int
    metrics: MetricsReport


def curate_run(sim, assistant: RLAssistant, defenders, consensus, seed: int, cfg: PriorityConfig = PriorityConfig(),
               K: int = 3, top_phases: int = 2, scenario: str = "", horizon: Optional[int] = None,
               parallelism: int = DEFAULT_PARALLELISM) -> CurationRun:
    ctl = CurationController(assistant, defenders, consensus, cfg, K, top_phases, scenario, parallelism=parallelism)
    result = run_episode(sim, ctl, seed=seed, horizon=horizon)
    return CurationRun(ctl.records, ctl.decisions, ctl.fallbacks, result.metrics)


HIST_EDGES = tuple(np.round(np.linspace(0.0, 1.0, 11), 10))


def curation_report(records: Sequence[PromptRecord], cfg: PriorityConfig, decisions: int = 0,
                    fallbacks: int = 0) -> dict:
    s = np.array([r.priority for r in records])
    pos = s[s >= 0]
    hist, _ = np.histogram(pos, bins=HIST_EDGES)
    prov = Counter(r.provenance.value for r in records)
    return {
        "records": len(records),
        "decisions": decisions,
        "consensus_fallbacks": fallbacks,
        "d_plus": int((s >= 0).sum()),
        "d_minus": int((s < 0).sum()),
        "high_priority": int((s >= cfg.kappa).sum()),
        "provenance": {p.value: prov.get(p.value, 0) for p in Provenance},
        "priority_histogram": {
            "negative": int((s < 0).sum()),
            "bins": [{"lo": float(HIST_EDGES[i]), "hi": float(HIST_EDGES[i + 1]), "count": int(hist[i])}
                     for i in range(len(hist))],
        },
        "config": {"alpha": cfg.alpha, "kappa": cfg.kappa, "lambda_neg": cfg.lambda_neg, "tau": cfg.tau,
                   "f": cfg.f, "g": cfg.g},
    }
