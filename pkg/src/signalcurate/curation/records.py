from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

NON_DELIBERATED_PRIORITY = -1.0


class Provenance(str, Enum):
    DELIBERATED = "deliberated"
    RL_ONLY = "rl_only"
    NON_DELIBERATED = "non_deliberated"


@dataclass(frozen=True)
class PromptRecord:
    """Prompt ``x``, answer ``y`` and priority ``s`` for one candidate action."""

    prompt: str
    answer: str
    priority: float
    provenance: Provenance
    ids: dict = field(default_factory=dict)  # scenario, intersection, tick, action

    def __post_init__(self):
        object.__setattr__(self, "provenance", Provenance(self.provenance))
        if not math.isfinite(self.priority):
            raise ValueError(f"priority must be finite, got {self.priority}")
        if self.provenance is Provenance.NON_DELIBERATED and self.priority >= 0:
            raise ValueError("non-deliberated records need a negative priority")


_NORMALIZERS = ("minmax", "zsigmoid")


@dataclass(frozen=True)
class PriorityConfig:
    alpha: float = 0.5
    kappa: float = 0.5
    lambda_neg: float = 0.3
    tau: float = 0.25
    f: str = "minmax"
    g: str = "minmax"

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.lambda_neg < 0:
            raise ValueError(f"lambda_neg must be >= 0, got {self.lambda_neg}")
        if not self.tau > 0:
            raise ValueError(f"tau must be > 0, got {self.tau}")
        if math.isnan(self.kappa):
            raise ValueError("kappa is NaN")
        for name in (self.f, self.g):
            if name not in _NORMALIZERS:
                raise ValueError(f"unknown normalizer {name!r}; expected one of {_NORMALIZERS}")
