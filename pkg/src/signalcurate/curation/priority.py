"""Priority fusion, labelling, threshold filtering and score-based sampling."""

from __future__ import annotations

from typing import Collection, Hashable, Mapping, Sequence

import numpy as np

from .records import NON_DELIBERATED_PRIORITY, PriorityConfig, PromptRecord, Provenance


def normalize(values: Mapping[Hashable, float], kind: str = "minmax") -> dict:
    """Map values into [0, 1]; a constant input maps to 0.5 under either rule."""
    keys = list(values)
    x = np.array([float(values[k]) for k in keys])
    if len(x) == 0:
        return {}
    if kind == "minmax":
        lo, hi = x.min(), x.max()
        out = np.full_like(x, 0.5) if hi == lo else (x - lo) / (hi - lo)
    elif kind == "zsigmoid":
        sd = x.std()
        out = np.full_like(x, 0.5) if sd == 0 else 1.0 / (1.0 + np.exp(-(x - x.mean()) / sd))
    else:
        raise ValueError(f"unknown normalizer {kind!r}")
    return {k: float(v) for k, v in zip(keys, out)}


def fuse_priority(q_rl: Mapping, r_llm: Mapping, cfg: PriorityConfig = PriorityConfig()) -> dict:
    """``s = alpha * f(q_RL) + (1 - alpha) * g(r_LLM)`` per action."""
    if set(q_rl) != set(r_llm):
        raise ValueError("q_RL and r_LLM must cover the same actions")
    fq = normalize(q_rl, cfg.f)
    gr = normalize({k: r_llm[k] for k in q_rl}, cfg.g)
    a = cfg.alpha
    return {k: min(1.0, max(0.0, a * fq[k] + (1.0 - a) * gr[k])) for k in q_rl}


def label_record(action, deliberated: Collection, fused: Mapping) -> tuple[float, Provenance]:
    """Fused score and ``deliberated`` for members of the deliberated set, else -1."""
    if action in deliberated:
        return float(fused[action]), Provenance.DELIBERATED
    return NON_DELIBERATED_PRIORITY, Provenance.NON_DELIBERATED


def threshold_filter(records: Sequence[PromptRecord], kappa: float) -> list[PromptRecord]:
    return [r for r in records if r.priority >= kappa]


def score_sample(records: Sequence[PromptRecord], count: int, tau: float, rng) -> list[PromptRecord]:
    """Draw ``count`` records without replacement, weight ``exp(s / tau)``; original order kept."""
    if not tau > 0:
        raise ValueError(f"tau must be > 0, got {tau}")
    if count >= len(records):
        return list(records)
    if count <= 0:
        return []
    s = np.array([r.priority for r in records]) / tau
    w = np.exp(s - s.max())
    picked = rng.choice(len(records), size=count, replace=False, p=w / w.sum())
    return [records[j] for j in sorted(picked)]


def rl_only_priorities(q_rl: Mapping, cfg: PriorityConfig = PriorityConfig()) -> dict:
    """Fallback when the consensus is unavailable: ``f(q_RL)`` alone."""
    return normalize(q_rl, cfg.f)
