"""Weighted cross-entropy plus unlikelihood objective over a partitioned dataset."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .records import PriorityConfig, PromptRecord


class DegenerateWeightsError(ValueError):
    pass


@dataclass(frozen=True)
class CurationBatch:
    plus: tuple[PromptRecord, ...]  # s >= 0
    minus: tuple[PromptRecord, ...]  # s < 0
    weights: tuple[float, ...]  # one per plus record
    lambda_neg: float = 0.3

    def __len__(self):
        return len(self.plus) + len(self.minus)


def partition_and_weight(records: Sequence[PromptRecord], cfg: PriorityConfig = PriorityConfig()) -> CurationBatch:
    plus = tuple(r for r in records if r.priority >= 0)
    minus = tuple(r for r in records if r.priority < 0)
    return CurationBatch(plus, minus, tuple(float(r.priority) for r in plus), cfg.lambda_neg)


def cross_entropy(token_logprobs) -> float:
    """Negative log-likelihood of an answer from its per-token log-probabilities."""
    return -float(np.sum(np.asarray(token_logprobs, dtype=np.float64)))


def unlikelihood(token_probs) -> float:
    """``-sum(log(1 - p))`` over the answer's tokens."""
    p = np.asarray(token_probs, dtype=np.float64)
    if np.any((p < 0) | (p >= 1)):
        raise ValueError("token probabilities must lie in [0, 1)")
    return -float(np.sum(np.log1p(-p)))


def evaluate_curation_loss(batch: CurationBatch, logprobs: Sequence, unlikelihoods: Sequence[float]) -> float:
    """``sum_i w_i CE_i / sum_i w_i + lambda_neg * mean_j UL_j``.

    ``logprobs[i]`` holds the token log-probabilities of ``batch.plus[i]``'s
    answer and ``unlikelihoods[j]`` the unlikelihood value of ``batch.minus[j]``.
    Empty partitions contribute 0.
    """
    if len(logprobs) != len(batch.plus):
        raise ValueError(f"expected {len(batch.plus)} log-probability sequences, got {len(logprobs)}")
    if len(unlikelihoods) != len(batch.minus):
        raise ValueError(f"expected {len(batch.minus)} unlikelihood values, got {len(unlikelihoods)}")
    total = 0.0
    if batch.plus:
        w = np.asarray(batch.weights, dtype=np.float64)
        if np.any(w < 0):
            raise ValueError("weights must be nonnegative")
        wsum = w.sum()
        if wsum == 0:
            raise DegenerateWeightsError("all D+ weights are zero")
        ce = np.array([cross_entropy(lp) for lp in logprobs])
        total += float(w @ ce / wsum)
    if batch.minus and batch.lambda_neg != 0:
        total += batch.lambda_neg * float(np.mean(np.asarray(unlikelihoods, dtype=np.float64)))
    return total
