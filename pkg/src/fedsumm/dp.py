"""Median-norm clipping and Gaussian noise for server aggregation.

The mechanism targets (epsilon, delta)-DP: for neighbouring datasets D, D',
P[M(D) in S] <= exp(epsilon) * P[M(D') in S] + delta.  Nothing here accounts
for the privacy budget across rounds; callers get (sigma, M, rounds) from the
telemetry and can feed those to an external accountant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NumericalError, ProtocolError

NOISE_TAG = 3


@dataclass(frozen=True)
class DpConfig:
    noise_multiplier: float = 1.0
    delta: float = 1e-5
    enabled: bool = True
    seed: int = 0

    def __post_init__(self):
        if not self.noise_multiplier >= 0:
            raise ConfigError("must be non-negative", "dp.noise_multiplier")
        if not 0.0 < self.delta < 1.0:
            raise ConfigError("must lie in (0, 1)", "dp.delta")


@dataclass(frozen=True)
class ClippedUpdate:
    client_id: int
    delta_w: np.ndarray
    pre_clip_norm: float
    clipped: bool


def median_norm(norms) -> float:
    """Median of client update norms; even counts average the two middle values."""
    values = sorted(float(v) for v in norms)
    if not values:
        raise ProtocolError("median of an empty norm collection")
    if any(not math.isfinite(v) for v in values):
        raise NumericalError("non-finite update norm")
    if values[0] < 0:
        raise ConfigError("norms must be non-negative")
    mid = len(values) // 2
    if len(values) % 2:
        return values[mid]
    return (values[mid - 1] + values[mid]) / 2.0


def clip(delta_w, M: float, client_id: int = -1) -> ClippedUpdate:
    if not M > 0:
        raise ConfigError("clipping bound must be positive")
    delta_w = np.asarray(delta_w, dtype=np.float64)
    zeta = float(np.linalg.norm(delta_w))
    return ClippedUpdate(client_id, delta_w / max(1.0, zeta / M), zeta, zeta > M)


def noise_rng(seed: int, round: int) -> np.random.Generator:
    """Per-round noise stream; normals come from numpy's ziggurat sampler."""
    return np.random.default_rng(np.random.SeedSequence([seed, round, NOISE_TAG]))


def dp_aggregate(updates, w_prev, M: float, sigma: float, rng: np.random.Generator) -> np.ndarray:
    """``w_prev + (sum of clipped deltas + N(0, (M*sigma)^2 I)) / m``.

    Clipped deltas are summed in ascending client id order and noise is drawn
    for coordinates in ascending order from ``rng``.
    """
    updates = sorted(updates, key=lambda u: u.client_id)
    if not updates:
        raise ProtocolError("no updates to aggregate")
    w_prev = np.asarray(w_prev, dtype=np.float64)
    total = np.zeros_like(w_prev)
    for u in updates:
        if u.delta_w.shape != w_prev.shape:
            raise ProtocolError(f"update shape {u.delta_w.shape} != {w_prev.shape}", u.client_id)
        total += u.delta_w
    if sigma > 0 and M > 0:
        total += rng.standard_normal(w_prev.shape[0]) * (M * sigma)
    return w_prev + total / len(updates)


@dataclass(frozen=True)
class DpTelemetry:
    M: float
    clipped_fraction: float
    sigma: float


def private_aggregate(deltas: dict, w_prev, config: DpConfig, round: int) -> tuple[np.ndarray, DpTelemetry]:
    """Full server step: median bound, clip every delta, add noise.

    When every delta is zero the median is 0 and there is nothing to clip or
    scale noise by; the update is then the plain (zero) mean.
    """
    ids = sorted(deltas)
    norms = [float(np.linalg.norm(deltas[c])) for c in ids]
    M = median_norm(norms)
    if M > 0:
        updates = [clip(deltas[c], M, c) for c in ids]
    else:
        updates = [ClippedUpdate(c, np.asarray(deltas[c], dtype=np.float64), n, False) for c, n in zip(ids, norms)]
    rng = noise_rng(config.seed, round)
    w_next = dp_aggregate(updates, w_prev, M, config.noise_multiplier, rng)
    frac = sum(u.clipped for u in updates) / len(updates)
    return w_next, DpTelemetry(M, frac, config.noise_multiplier)
