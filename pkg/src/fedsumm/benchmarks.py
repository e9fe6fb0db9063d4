"""Fixed desk-scale benchmark used by the experiment scripts and the acceptance suite."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import data, models, protocol
from .adapter import AdapterConfig


@dataclass(frozen=True)
class ConceptShiftBenchmark:
    """Linear regression, 10 clients with concept shift at skew 0.8."""

    seed: int = 0
    skew: float = 0.8
    clients: int = 10
    examples_per_client: int = 100
    input_dim: int = 5
    rounds: int = 200
    local_steps: int = 1
    batch_size: int = 32
    learning_rate: float = 0.05
    sample_fraction: float = 1.0

    @property
    def spec(self) -> models.ModelSpec:
        return models.ModelSpec("linear", self.input_dim, 1)

    def partitions(self):
        cfg = data.HeterogeneityConfig("concept-shift", self.skew, self.clients, self.examples_per_client, self.seed)
        return data.generate(cfg, self.spec)

    def round_config(self) -> protocol.RoundConfig:
        return protocol.RoundConfig(self.rounds, self.clients, self.sample_fraction, self.local_steps,
                                    self.batch_size, self.learning_rate, self.seed)

    def run(self, algo: str, epsilon: float | None = None, parts=None):
        adapter = AdapterConfig(epsilon=epsilon) if algo == "fedsumm" else None
        parts = parts if parts is not None else self.partitions()
        return protocol.run_experiment(self.round_config(), algo, None, parts, self.spec, adapter)

    def target_loss(self, parts=None, fraction: float = 0.01) -> float:
        """Optimal loss plus ``fraction`` of the gap from the zero-initialised model."""
        parts = parts if parts is not None else self.partitions()
        union = data.union(parts)
        best = models.loss(self.spec, least_squares(union), union)
        start = models.loss(self.spec, np.zeros(self.spec.param_dim), union)
        return best + fraction * (start - best)


def least_squares(dataset: models.Dataset) -> np.ndarray:
    """Closed-form linear fit (weights then bias) from the normal equations."""
    x = np.hstack([dataset.features, np.ones((len(dataset), 1))])
    y = np.asarray(dataset.targets, dtype=np.float64).reshape(len(dataset), -1)
    beta = np.linalg.solve(x.T @ x, x.T @ y)
    return np.concatenate([beta[:-1].T.ravel(), beta[-1]])


def rounds_to_target(history, target: float):
    return next((m.round for m in history if m.global_loss <= target), None)
