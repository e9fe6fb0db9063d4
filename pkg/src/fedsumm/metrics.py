"""ROUGE-1/2/L F1, perplexity, and the per-round metrics record."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from . import models
from .errors import ConfigError, UnsupportedMetricError


@dataclass(frozen=True)
class RougeScore:
    recall: float
    precision: float
    f1: float

    @classmethod
    def from_pr(cls, precision: float, recall: float) -> "RougeScore":
        if precision + recall == 0:
            return cls(recall, precision, 0.0)
        return cls(recall, precision, 2 * precision * recall / (precision + recall))


def tokenize(text: str, mode: str = "whitespace") -> list[str]:
    if mode == "whitespace":
        return text.split()
    if mode == "char":
        return [ch for ch in text if not ch.isspace()]
    raise ConfigError(f"unknown tokenizer {mode!r}", "tokenizer")


def ngrams(tokens, n: int) -> Counter:
    tokens = list(tokens)
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def rouge_n(candidate, reference, n: int) -> RougeScore:
    if n < 1:
        raise ConfigError("n must be >= 1")
    cand, ref = ngrams(candidate, n), ngrams(reference, n)
    overlap = sum((cand & ref).values())
    n_cand, n_ref = sum(cand.values()), sum(ref.values())
    precision = overlap / n_cand if n_cand else 0.0
    recall = overlap / n_ref if n_ref else 0.0
    return RougeScore.from_pr(precision, recall)


def lcs_length(a, b) -> int:
    """Length of the longest common subsequence, O(len(a) * len(b)) time, O(len(b)) memory."""
    a, b = list(a), list(b)
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b, start=1):
            cur.append(prev[j - 1] + 1 if x == y else max(prev[j], cur[j - 1]))
        prev = cur
    return prev[-1]


def rouge_l(candidate, reference) -> RougeScore:
    candidate, reference = list(candidate), list(reference)
    lcs = lcs_length(candidate, reference)
    precision = lcs / len(candidate) if candidate else 0.0
    recall = lcs / len(reference) if reference else 0.0
    return RougeScore.from_pr(precision, recall)


def rouge_all(candidate, reference) -> dict[str, RougeScore]:
    return {"R1": rouge_n(candidate, reference, 1), "R2": rouge_n(candidate, reference, 2), "RL": rouge_l(candidate, reference)}


def perplexity(spec: models.ModelSpec, w, dataset: models.Dataset) -> float:
    """``exp`` of the mean per-example cross-entropy (nats)."""
    if not spec.is_classifier:
        raise UnsupportedMetricError("perplexity needs a cross-entropy model")
    return math.exp(models.loss(spec, w, dataset))


@dataclass
class RoundMetrics:
    round: int
    global_loss: float
    per_client_loss: dict[int, float]
    rho_per_client: dict[int, float]
    perplexity: float | None
    global_params: np.ndarray
    participants: list[int] = field(default_factory=list)
    modulation: dict[int, float] = field(default_factory=dict)
    store_order: list[int] = field(default_factory=list)
    rouge: RougeScore | None = None
    dp_telemetry: object | None = None

    @property
    def rho_mean(self) -> float | None:
        if not self.rho_per_client:
            return None
        return float(np.mean([self.rho_per_client[c] for c in sorted(self.rho_per_client)]))

    @property
    def rho_max_abs_dev(self) -> float | None:
        if not self.rho_per_client:
            return None
        return max(abs(r - 1.0) for r in self.rho_per_client.values())

    @property
    def rho_mean_abs_dev(self) -> float | None:
        if not self.rho_per_client:
            return None
        return float(np.mean([abs(self.rho_per_client[c] - 1.0) for c in sorted(self.rho_per_client)]))
