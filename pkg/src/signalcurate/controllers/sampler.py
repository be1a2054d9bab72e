"""Annealed-noise duration sampler around a learned conditional mean.

Stands in for a diffusion policy: a sample starts at ``mu + sigma_0 * eps``
and each of the ``T`` denoising steps pulls it toward ``mu`` while keeping
its marginal spread equal to the schedule's current level::

    x_j = mu + c * (sigma_j / sigma_{j-1}) * (x_{j-1} - mu) + sigma_j * sqrt(1 - c^2) * eps_j

so the final sample is ``N(mu, sigma_T^2)`` before clamping. Any object with
``mean(h, p)`` and ``sample(h, p, n, rng)`` can replace it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .critic import QUEUE_SCALE
from .encoding import StateEncoding
from .pool import ExperiencePool


def mean_features(h: StateEncoding, p: int) -> np.ndarray:
    return np.array([1.0, h.total_queue / QUEUE_SCALE, float(h.pressures[p - 1]) / QUEUE_SCALE])


@dataclass
class GenerativeDurationSampler:
    d_min: float = 5.0
    d_max: float = 60.0
    schedule: tuple[float, ...] = (10.0, 7.0, 5.0, 4.0)
    carry: float = 0.5
    coef: np.ndarray = field(default=None)

    def __post_init__(self):
        self.schedule = tuple(float(s) for s in self.schedule)
        if len(self.schedule) < 2:
            raise ValueError("schedule needs an initial level and at least one denoising step")
        if any(b > a for a, b in zip(self.schedule, self.schedule[1:])):
            raise ValueError(f"noise schedule must be non-increasing, got {self.schedule}")
        if self.coef is None:
            self.coef = np.array([(self.d_min + self.d_max) / 2.0, 0.0, 0.0])
        self.coef = np.asarray(self.coef, dtype=np.float64)

    @property
    def steps(self) -> int:
        return len(self.schedule) - 1

    def mean(self, h: StateEncoding, p: int) -> float:
        return float(mean_features(h, p) @ self.coef)

    def sample(self, h: StateEncoding, p: int, n: int, rng) -> list[float]:
        if n < 1:
            raise ValueError("n must be >= 1")
        mu = self.mean(h, p)
        sig = self.schedule
        x = mu + sig[0] * rng.standard_normal(n)
        c = self.carry
        for j in range(1, len(sig)):
            ratio = sig[j] / sig[j - 1] if sig[j - 1] > 0 else 0.0
            x = mu + c * ratio * (x - mu) + sig[j] * np.sqrt(1.0 - c * c) * rng.standard_normal(n)
        return [float(v) for v in np.clip(x, self.d_min, self.d_max)]

    def fit(self, pool: ExperiencePool, quantile: float = 0.75, ridge: float = 1e-3) -> None:
        """Regress the mean toward the best-return durations in the pool.

        Keeps entries whose return is at least the ``quantile`` level within
        their phase, then solves a ridge least-squares fit.
        """
        entries = pool.entries()
        if len(entries) < 8:
            return
        rows, targets = [], []
        by_phase: dict[int, list] = {}
        for e in entries:
            by_phase.setdefault(e.phase, []).append(e)
        for group in by_phase.values():
            cut = np.quantile([e.ret for e in group], quantile)
            for e in group:
                if e.ret >= cut:
                    rows.append([1.0, e.digest[0] / QUEUE_SCALE, e.digest[1] / QUEUE_SCALE])
                    targets.append(e.duration)
        X = np.array(rows)
        y = np.array(targets)
        A = X.T @ X + ridge * np.eye(X.shape[1])
        self.coef = np.linalg.solve(A, X.T @ y)

    def to_dict(self) -> dict:
        return {"d_min": self.d_min, "d_max": self.d_max, "schedule": list(self.schedule),
                "carry": self.carry, "coef": self.coef.tolist()}

    @classmethod
    def from_dict(cls, doc: dict) -> "GenerativeDurationSampler":
        return cls(doc["d_min"], doc["d_max"], tuple(doc["schedule"]), doc["carry"], np.array(doc["coef"]))


def propose_generative(sampler, h: StateEncoding, p: int, n: int, rng) -> list[float]:
    return sampler.sample(h, p, n, rng)


@dataclass(frozen=True)
class CandidateSet:
    phase: int
    durations: tuple[float, ...]
    sources: tuple[str, ...]  # "history" or "generative", parallel to durations

    def __len__(self):
        return len(self.durations)


def build_candidates(hist: Sequence[float], gen: Sequence[float], d_min: float, d_max: float,
                     phase: int = 0) -> CandidateSet:
    """Union of history anchors and generative samples, clamped, rounded to whole
    seconds (halves round up) and deduplicated (first occurrence wins, history before generative).

    With both inputs empty the midpoint of the bounds is the sole candidate.
    """
    durations: list[float] = []
    sources: list[str] = []
    seen = set()
    for tag, values in (("history", hist), ("generative", gen)):
        for v in values:
            d = float(math.floor(min(max(float(v), d_min), d_max) + 0.5))
            d = min(max(d, d_min), d_max)
            if d not in seen:
                seen.add(d)
                durations.append(d)
                sources.append(tag)
    if not durations:
        durations, sources = [(d_min + d_max) / 2.0], ["fallback"]
    return CandidateSet(phase, tuple(durations), tuple(sources))
