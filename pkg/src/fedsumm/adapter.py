"""Server-side gradient adapter: memory gradients ranked by client loss and
scaled by a per-client discrepancy ratio.

Each client keeps a running ratio

    rho_c = sum_t peak_softmax(w_local[c, t]) / sum_t peak_softmax(w_global[t])

where ``peak_softmax`` is the largest entry of the softmax over the flattened
parameter vector.  After every round the server stores each participant's
latest gradient and loss, sorts the store by ascending loss, and hands the
client ranked ``v`` the correction ``eps * rho * MG[v]``.  The guard
``| ||g|| - 1 | > norm_tolerance`` decides whether a correction is made at all.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, NumericalError, ProtocolError


@dataclass(frozen=True)
class AdapterConfig:
    epsilon: float = 0.1
    norm_tolerance: float = 1e-9
    correction_rate: float = 1.0

    def __post_init__(self):
        if not self.epsilon >= 0:
            raise ConfigError("must be non-negative", "adapter.epsilon")
        if not self.norm_tolerance > 0:
            raise ConfigError("must be positive", "adapter.norm_tolerance")
        if not self.correction_rate > 0:
            raise ConfigError("must be positive", "adapter.correction_rate")


@dataclass(frozen=True)
class MemoryEntry:
    client_id: int
    gradient: np.ndarray
    loss: float
    round: int


@dataclass
class MemoryGradientStore:
    """Latest gradient per client; ``entries`` order is whatever the last sort left."""

    entries: list[MemoryEntry] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.entries)

    def upsert(self, client_id: int, gradient, loss: float, round: int) -> None:
        entry = MemoryEntry(client_id, np.array(gradient, dtype=np.float64), float(loss), round)
        for i, old in enumerate(self.entries):
            if old.client_id == client_id:
                if round >= old.round:
                    self.entries[i] = entry
                return
        self.entries.append(entry)

    def client_ids(self) -> list[int]:
        return [e.client_id for e in self.entries]

    def rank_of(self, client_id: int) -> int:
        for v, e in enumerate(self.entries):
            if e.client_id == client_id:
                return v
        raise ProtocolError("not in memory store", client_id)


@dataclass(frozen=True)
class DiscrepancyState:
    sum_local: float = 0.0
    sum_global: float = 0.0
    rounds_seen: int = 0

    @property
    def rho(self) -> float:
        """Ratio of accumulated summaries; 1.0 before any round is observed."""
        if self.rounds_seen == 0:
            return 1.0
        return self.sum_local / self.sum_global


def softmax_summary(w) -> float:
    """Peak entry of ``softmax(w)``, computed with max-subtraction."""
    w = np.asarray(w, dtype=np.float64).ravel()
    if w.size == 0:
        raise ConfigError("cannot summarise an empty parameter vector")
    bad = np.flatnonzero(~np.isfinite(w))
    if bad.size:
        raise NumericalError("non-finite parameter in softmax summary", int(bad[0]))
    # the peak of exp(w - max) is exactly 1
    return float(1.0 / np.exp(w - w.max()).sum())


def update_discrepancy(state: DiscrepancyState, w_local, w_global) -> DiscrepancyState:
    if np.shape(w_local) != np.shape(w_global):
        raise ConfigError("local and global parameters differ in shape")
    return DiscrepancyState(
        state.sum_local + softmax_summary(w_local),
        state.sum_global + softmax_summary(w_global),
        state.rounds_seen + 1,
    )


def sort_store(store: MemoryGradientStore, losses) -> MemoryGradientStore:
    """Refresh losses from ``losses`` and order entries by (loss, client_id)."""
    losses = dict(losses)
    known = set(store.client_ids())
    for cid in losses:
        if cid not in known:
            raise ProtocolError("loss reported for a client with no memory entry", cid)
    entries = [replace(e, loss=float(losses[e.client_id])) if e.client_id in losses else e for e in store.entries]
    entries.sort(key=lambda e: (e.loss, e.client_id))
    return MemoryGradientStore(entries)


def adapt(store_sorted: MemoryGradientStore, rank: int, epsilon: float, rho: float, g_client, norm_tolerance: float = 1e-9) -> np.ndarray:
    if not 0 <= rank < len(store_sorted):
        raise ProtocolError(f"rank {rank} outside store of size {len(store_sorted)}")
    stored = store_sorted.entries[rank].gradient
    norm = float(np.linalg.norm(np.asarray(g_client, dtype=np.float64).ravel()))
    if abs(norm - 1.0) > norm_tolerance:
        return stored * (epsilon * rho)
    return np.zeros_like(stored)


def modulation_term(rho: float, epsilon: float, loss_now: float, loss_prev: float, grad_norm: float) -> float:
    """Discrete stand-in for ``eps * rho * dL/dt * max(||grad||, 1)``."""
    return epsilon * rho * (loss_now - loss_prev) * max(grad_norm, 1.0)


@dataclass
class Personalization:
    corrections: dict[int, np.ndarray]
    rho: dict[int, float]
    modulation: dict[int, float]
    ranks: dict[int, int]
    store: MemoryGradientStore


def personalize(reports, store: MemoryGradientStore, disc_states: dict, config: AdapterConfig, prev_losses: dict | None = None) -> Personalization:
    """Upsert this round's reports, rank them by loss, and compute corrections.

    ``disc_states`` maps client id to its :class:`DiscrepancyState` as of the
    previous round; ``prev_losses`` holds each client's previously reported loss
    for the modulation diagnostic (absent means no change, i.e. a zero term).
    """
    prev_losses = prev_losses or {}
    reports = sorted(reports, key=lambda r: r.client_id)
    for r in reports:
        store.upsert(r.client_id, r.gradient, r.loss, r.round)
    ranked = sort_store(store, {r.client_id: r.loss for r in reports})

    out = Personalization({}, {}, {}, {}, ranked)
    for r in reports:
        rho = disc_states.get(r.client_id, DiscrepancyState()).rho
        rank = ranked.rank_of(r.client_id)
        out.corrections[r.client_id] = adapt(ranked, rank, config.epsilon, rho, r.gradient, config.norm_tolerance)
        out.rho[r.client_id] = rho
        out.ranks[r.client_id] = rank
        g_norm = float(np.linalg.norm(r.gradient))
        out.modulation[r.client_id] = modulation_term(rho, config.epsilon, r.loss, prev_losses.get(r.client_id, r.loss), g_norm)
    return out
