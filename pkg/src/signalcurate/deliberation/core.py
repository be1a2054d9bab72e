"""RL pre-filter, defender assignment, defense and consensus exchanges."""

from __future__ import annotations

import logging
import math
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from importlib import resources
from string import Template
from typing import NamedTuple, Optional, Sequence

from ..network.model import TimingAction
from .client import ChatClient, ChatTransportError, exchange

log = logging.getLogger(__name__)

DEFENSE_CAP = 1200
DEFAULT_MARGIN = 0.25
DEFAULT_PARALLELISM = 4


class DeliberationConfigError(ValueError):
    pass


class DefenseUnavailable(RuntimeError):
    def __init__(self, candidate_id: str, cause: Exception):
        super().__init__(f"defense for {candidate_id} unavailable: {cause}")
        self.candidate_id = candidate_id


class DeliberationUnavailable(RuntimeError):
    pass


def action_id(action: TimingAction) -> str:
    return f"p{action.phase}_d{action.duration:g}"


@dataclass(frozen=True)
class Candidate:
    action: TimingAction
    q_rl: float

    @property
    def id(self) -> str:
        return action_id(self.action)


@dataclass(frozen=True)
class DeliberationContext:
    state_text: str
    candidates: tuple[Candidate, ...]
    rollout_text: str = ""
    map_text: str = ""

    def __post_init__(self):
        object.__setattr__(self, "candidates", tuple(self.candidates))
        if not self.candidates:
            raise DeliberationConfigError("deliberation needs at least one candidate")
        for c in self.candidates:
            if not math.isfinite(c.q_rl):
                raise DeliberationConfigError(f"candidate {c.id} has non-finite q_RL {c.q_rl}")


@dataclass(frozen=True)
class DefenseArgument:
    candidate_id: str
    text: str
    defender_id: int
    available: bool = True  # False for the empty stand-in after a failed defense


@dataclass(frozen=True)
class ConsensusSummary:
    text: str
    scores: dict  # action id -> preference in [0, 1]
    flagged: tuple[str, ...] = ()  # ids whose score was missing or unparseable
    hidden: bool = True


class DeliberationResult(NamedTuple):
    filtered: list
    defenses: list
    summary: ConsensusSummary


def _tie_key(c: Candidate):
    return (-c.q_rl, c.action.duration, c.action.phase)


def rl_prefilter(candidates: Sequence[Candidate], K: int, margin: Optional[float] = None,
                 margin_frac: float = DEFAULT_MARGIN) -> list[Candidate]:
    """Top-``K`` by q_RL, minus anything more than ``margin`` below the best.

    ``margin`` defaults to ``margin_frac`` of the q_RL range over the input.
    Output is ordered by q_RL descending, then shorter duration, then lower phase.
    """
    if K < 1:
        raise DeliberationConfigError(f"K must be >= 1, got {K}")
    if not candidates:
        raise DeliberationConfigError("no candidates to filter")
    ranked = sorted(candidates, key=_tie_key)
    qs = [c.q_rl for c in candidates]
    if margin is None:
        margin = margin_frac * (max(qs) - min(qs))
    floor = max(qs) - margin
    return [c for c in ranked[:K] if c.q_rl >= floor]


def assign_defenders(filtered: Sequence[Candidate], defenders: Sequence) -> list[list[Candidate]]:
    """Round-robin: candidate ``i`` goes to defender ``i mod n``."""
    if not defenders:
        raise DeliberationConfigError("at least one defender client is required")
    out: list[list[Candidate]] = [[] for _ in defenders]
    for i, c in enumerate(filtered):
        out[i % len(defenders)].append(c)
    return out


def _template(name: str) -> Template:
    return Template(resources.files(__package__).joinpath("templates", name).read_text(encoding="utf-8"))


def _candidate_lines(ctx: DeliberationContext) -> str:
    return "\n".join(f"- {c.id}: phase={c.action.phase} duration={c.action.duration:g}s q_RL={c.q_rl:.6f}"
                     for c in ctx.candidates)


def _history(ctx: DeliberationContext) -> str:
    parts = [f"rollout: {ctx.rollout_text or 'n/a'}", f"time-queue map: {ctx.map_text or 'n/a'}"]
    return "\n".join(parts)


def defense_prompt(ctx: DeliberationContext, candidate: Candidate) -> str:
    return _template("defense.txt").substitute(
        state=ctx.state_text, candidates=_candidate_lines(ctx), history=_history(ctx), candidate_id=candidate.id)


def consensus_prompt(ctx: DeliberationContext, defenses: Sequence[DefenseArgument]) -> str:
    body = "\n\n".join(f"<{d.candidate_id} defender={d.defender_id}>\n{d.text or '(no argument)'}" for d in defenses)
    return _template("consensus.txt").substitute(
        state=ctx.state_text, candidates=_candidate_lines(ctx), history=_history(ctx),
        defenses=body or "(none)", candidate_ids=", ".join(c.id for c in ctx.candidates))


def run_defense(client: ChatClient, ctx: DeliberationContext, candidate: Candidate, defender_id: int = 0,
                cap: int = DEFENSE_CAP, sleep=None) -> DefenseArgument:
    messages = [{"role": "user", "content": defense_prompt(ctx, candidate)}]
    try:
        text = exchange(client, messages, sleep) if sleep else exchange(client, messages)
    except ChatTransportError as exc:
        raise DefenseUnavailable(candidate.id, exc) from exc
    return DefenseArgument(candidate.id, text[:cap], defender_id)


_BEGIN, _END = "SCORES_BEGIN", "SCORES_END"
_LINE = re.compile(r"^([A-Za-z0-9_.:-]+)=([^=\s]+)$")


def parse_score_block(text: str, ids: Sequence[str]) -> tuple[dict, tuple[str, ...], str]:
    """Scores for ``ids`` from the last complete ``SCORES_BEGIN``/``SCORES_END`` block.

    Returns (scores, flagged ids, text with that block removed). Missing or
    non-numeric entries score 0 and are flagged; values are clamped to [0, 1].
    """
    lines = text.splitlines()
    stripped = [ln.strip() for ln in lines]
    block: Optional[tuple[int, int]] = None
    start = None
    for i, ln in enumerate(stripped):
        if ln == _BEGIN:
            start = i
        elif ln == _END and start is not None:
            block = (start, i)
            start = None
    raw: dict[str, str] = {}
    remainder = text
    if block is not None:
        for ln in stripped[block[0] + 1: block[1]]:
            m = _LINE.match(ln)
            if m:
                raw[m.group(1)] = m.group(2)
        remainder = "\n".join(lines[: block[0]] + lines[block[1] + 1:]).strip()
    scores, flagged = {}, []
    for cid in ids:
        try:
            v = float(raw[cid])
            if math.isnan(v):
                raise ValueError("nan")
        except (KeyError, ValueError):
            scores[cid] = 0.0
            flagged.append(cid)
            continue
        scores[cid] = min(1.0, max(0.0, v))
    return scores, tuple(flagged), remainder


def run_consensus(client: ChatClient, ctx: DeliberationContext, defenses: Sequence[DefenseArgument],
                  sleep=None) -> ConsensusSummary:
    if not defenses:
        raise DeliberationConfigError("consensus needs at least one defense (possibly empty)")
    messages = [{"role": "user", "content": consensus_prompt(ctx, defenses)}]
    try:
        reply = exchange(client, messages, sleep) if sleep else exchange(client, messages)
    except ChatTransportError as exc:
        raise DeliberationUnavailable(f"consensus unavailable: {exc}") from exc
    scores, flagged, text = parse_score_block(reply, [c.id for c in ctx.candidates])
    if flagged:
        log.warning("consensus gave no usable score for %s; scored 0", ", ".join(flagged))
    return ConsensusSummary(text, scores, flagged)


def deliberate(ctx: DeliberationContext, defenders: Sequence[ChatClient], consensus: ChatClient, K: int,
               margin_frac: float = DEFAULT_MARGIN, parallelism: int = DEFAULT_PARALLELISM,
               cap: int = DEFENSE_CAP) -> DeliberationResult:
    """Pre-filter, defend each survivor in parallel, then one consensus round.

    A failed defense becomes an empty argument; a failed consensus raises
    ``DeliberationUnavailable``.
    """
    if parallelism < 1:
        raise DeliberationConfigError("parallelism must be >= 1")
    filtered = rl_prefilter(ctx.candidates, K, margin_frac=margin_frac)
    assignments = assign_defenders(filtered, defenders)
    sub = DeliberationContext(ctx.state_text, tuple(filtered), ctx.rollout_text, ctx.map_text)
    jobs = [(d, c) for d, cs in enumerate(assignments) for c in cs]
    jobs.sort(key=lambda j: filtered.index(j[1]))

    def defend(job):
        d, c = job
        try:
            return run_defense(defenders[d], sub, c, d, cap)
        except DefenseUnavailable as exc:
            log.warning("%s", exc)
            return DefenseArgument(c.id, "", d, available=False)

    with ThreadPoolExecutor(max_workers=min(parallelism, len(jobs))) as pool:
        defenses = list(pool.map(defend, jobs))
    summary = run_consensus(consensus, sub, defenses)
    return DeliberationResult(filtered, defenses, summary)
