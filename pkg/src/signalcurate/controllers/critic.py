"""Linear quantile critic over (state, phase, duration) features."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .encoding import StateEncoding

QUEUE_SCALE = 10.0
N_FEATURES = 9


def critic_features(h: StateEncoding, p: int, duration: float, d_min: float, d_max: float) -> np.ndarray:
    """Total queue, phase pressure, normalized D and D^2, elapsed green, bias,
    plus pressure*D, queue*D and a phase-switch flag."""
    span = d_max - d_min
    d = (duration - d_min) / span if span > 0 else 0.0
    total = h.total_queue / QUEUE_SCALE
    press = float(h.pressures[p - 1]) / QUEUE_SCALE
    switch = 0.0 if h.phase == p else 1.0
    return np.array([total, press, d, d * d, h.elapsed / 60.0, 1.0, press * d, total * d, switch])


@dataclass
class CriticModel:
    n_quantiles: int = 8
    n_features: int = N_FEATURES
    learning_rate: float = 0.05
    gamma: float = 0.97
    huber: float = 1.0
    weights: np.ndarray = field(default=None)  # (K, F)

    def __post_init__(self):
        if self.n_quantiles < 1:
            raise ValueError("need at least one quantile")
        if self.weights is None:
            self.weights = np.zeros((self.n_quantiles, self.n_features))
        self.weights = np.asarray(self.weights, dtype=np.float64)

    @property
    def levels(self) -> np.ndarray:
        k = self.n_quantiles
        return (2 * np.arange(k) + 1) / (2.0 * k)

    def to_dict(self) -> dict:
        return {
            "n_quantiles": self.n_quantiles,
            "n_features": self.n_features,
            "learning_rate": self.learning_rate,
            "gamma": self.gamma,
            "huber": self.huber,
            "weights": self.weights.tolist(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "CriticModel":
        return cls(**{**doc, "weights": np.array(doc["weights"])})


def quantiles_from_features(Q: CriticModel, phi: np.ndarray) -> np.ndarray:
    # monotone rearrangement keeps quantiles ordered; the mean is unaffected
    return np.sort(Q.weights @ phi)


def value_of_features(Q: CriticModel, phi: np.ndarray) -> tuple[np.ndarray, float]:
    qs = quantiles_from_features(Q, phi)
    return qs, float(qs.mean())


def critic_value(Q: CriticModel, h: StateEncoding, p: int, duration: float,
                 d_min: float, d_max: float) -> tuple[np.ndarray, float]:
    """Sorted quantile vector and its mean for one (state, phase, duration)."""
    return value_of_features(Q, critic_features(h, p, duration, d_min, d_max))


def select_duration(candidates: Sequence[float], Q: CriticModel, h: StateEncoding, p: int,
                    d_min: float, d_max: float) -> float:
    """Candidate with the highest expected value; ties go to the shorter duration."""
    if len(candidates) == 0:
        raise ValueError("empty candidate set")
    best, best_val = None, -np.inf
    for d in sorted(candidates):
        val = critic_value(Q, h, p, d, d_min, d_max)[1]
        if val > best_val:
            best, best_val = d, val
    return best


@dataclass(frozen=True)
class Transition:
    features: np.ndarray
    reward: float
    next_value: float  # best expectation at the next decision; 0 at terminal
    discount: Optional[float] = None  # overrides the model's gamma for this transition


def critic_update(Q: CriticModel, transitions: Sequence[Transition]) -> CriticModel:
    """One pass of quantile-Huber TD(0) toward ``reward + discount * next_value``.

    Returns a new model; ``Q`` is left as it was.
    """
    w = Q.weights.copy()
    tau = Q.levels
    kappa = Q.huber
    for tr in transitions:
        if not np.isfinite(tr.reward):
            raise ValueError(f"non-finite reward {tr.reward}")
        discount = Q.gamma if tr.discount is None else tr.discount
        target = tr.reward + discount * tr.next_value
        pred = w @ tr.features
        u = target - pred
        weight = np.abs(tau - (u < 0))
        grad = weight * np.clip(u, -kappa, kappa) / kappa
        w += Q.learning_rate * np.outer(grad, tr.features)
    return CriticModel(Q.n_quantiles, Q.n_features, Q.learning_rate, Q.gamma, Q.huber, w)
