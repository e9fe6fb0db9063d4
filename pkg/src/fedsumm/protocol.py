"""Round-based federated orchestration (FedAvg and FedSUMM).

Every random draw comes from a stream keyed on ``(seed, round, ...)`` so a
client's update never depends on which other clients ran before it.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import adapter as adapt_mod
from . import dp as dp_mod
from . import models
from .data import Partition, union
from .errors import ConfigError, FedSummError, ProtocolError, RunError
from .metrics import RoundMetrics

log = logging.getLogger(__name__)

ALGOS = ("fedavg", "fedsumm")
WEIGHTINGS = ("uniform", "size")
_SAMPLE, _CLIENT = 1, 2


@dataclass(frozen=True)
class RoundConfig:
    total_rounds: int = 50
    clients: int = 10
    sample_fraction: float = 1.0
    local_steps: int = 1
    batch_size: int = 32
    learning_rate: float = 0.05
    seed: int = 0
    weighting: str = "uniform"

    def __post_init__(self):
        if self.total_rounds < 1:
            raise ConfigError("must be >= 1", "rounds.total_rounds")
        if self.clients < 2:
            raise ConfigError("must be >= 2", "rounds.clients")
        if not 0.0 < self.sample_fraction <= 1.0:
            raise ConfigError("must lie in (0, 1]", "rounds.sample_fraction")
        if self.local_steps < 1:
            raise ConfigError("must be >= 1", "rounds.local_steps")
        if self.batch_size < 1:
            raise ConfigError("must be >= 1", "rounds.batch_size")
        if not self.learning_rate > 0:
            raise ConfigError("must be positive", "rounds.learning_rate")
        if self.weighting not in WEIGHTINGS:
            raise ConfigError(f"must be one of {WEIGHTINGS}", "rounds.weighting")

    @property
    def participants_per_round(self) -> int:
        # round() first so 0.3 * 10 = 3.0000000000000004 does not ceil to 4
        return max(1, math.ceil(round(self.sample_fraction * self.clients, 9)))


@dataclass(frozen=True)
class ClientReport:
    client_id: int
    gradient: np.ndarray
    loss: float
    params: np.ndarray
    round: int
    n_examples: int = 0


@dataclass
class ServerState:
    global_params: np.ndarray
    round: int = 0
    seed: int = 0


def _stream(*key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(list(key)))


def sample_clients(state: ServerState, C: int, q: float) -> list[int]:
    """``ceil(q*C)`` distinct ids, uniform without replacement, sorted."""
    if not 0.0 < q <= 1.0:
        raise ConfigError("sample fraction must lie in (0, 1]")
    k = max(1, math.ceil(round(q * C, 9)))
    if k >= C:
        return list(range(C))
    rng = _stream(state.seed, state.round, _SAMPLE)
    return sorted(int(c) for c in rng.choice(C, size=k, replace=False))


def client_update(
    client_id: int,
    w_in,
    personalization,
    partition: Partition,
    spec: models.ModelSpec,
    local_steps: int,
    batch_size: int,
    learning_rate: float,
    round_seed: tuple[int, int],
    correction_rate: float = 1.0,
) -> ClientReport:
    """Local mini-batch SGD for ``local_steps`` epochs.

    ``round_seed`` is ``(seed, round)``; the shuffle stream is further keyed by
    ``client_id``.  The reported loss and gradient are taken over the whole
    local dataset at the final parameters.
    """
    data = partition.examples.canonical()
    n = len(data)
    if n == 0:
        raise ConfigError("client has no data")
    w = np.array(w_in, dtype=np.float64)
    if personalization is not None:
        personalization = np.asarray(personalization, dtype=np.float64)
        if personalization.shape != w.shape:
            raise ProtocolError("personalization shape mismatch", client_id)
        w = w - correction_rate * personalization
    if batch_size > n:
        log.warning("client %d: batch size %d exceeds %d local examples; clamping", client_id, batch_size, n)
        batch_size = n

    seed, rnd = round_seed
    rng = _stream(seed, rnd, _CLIENT, client_id)
    for _ in range(local_steps):
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            batch = data.take(order[start : start + batch_size])
            w = w - learning_rate * models.gradient(spec, w, batch)

    loss, grad = models.loss_and_gradient(spec, w, data)
    return ClientReport(client_id, grad, loss, w, rnd, n)


def fedavg_aggregate(reports, weighting: str = "uniform") -> np.ndarray:
    """Mean of participant params, summed in ascending client id order."""
    reports = sorted(reports, key=lambda r: r.client_id)
    if not reports:
        raise ProtocolError("no reports to aggregate")
    shape = reports[0].params.shape
    for r in reports:
        if r.params.shape != shape:
            raise ProtocolError(f"params shape {r.params.shape} != {shape}", r.client_id)
    if weighting == "size":
        sizes = [float(r.n_examples) for r in reports]
        if min(sizes) <= 0:
            raise ProtocolError("size weighting needs example counts")
        total = np.zeros(shape)
        for r, s in zip(reports, sizes):
            total = total + s * r.params
        return total / sum(sizes)
    total = np.zeros(shape)
    for r in reports:
        total = total + r.params
    return total / len(reports)


@dataclass
class _FedSummState:
    store: adapt_mod.MemoryGradientStore = field(default_factory=adapt_mod.MemoryGradientStore)
    pending: dict = field(default_factory=dict)


def run_experiment(
    round_config: RoundConfig,
    algo: str,
    dp_config: dp_mod.DpConfig | None,
    partitions: list[Partition],
    spec: models.ModelSpec,
    adapter_config: adapt_mod.AdapterConfig | None = None,
    init=None,
    eval_data: models.Dataset | None = None,
    on_round=None,
) -> list[RoundMetrics]:
    """Run ``total_rounds`` rounds and return one :class:`RoundMetrics` per round.

    Discrepancy ratios are tracked under both algorithms; only FedSUMM feeds
    them back into the clients.  ``on_round`` (if given) is called with each
    record as soon as it is produced.
    """
    if algo not in ALGOS:
        raise ConfigError(f"unknown algorithm {algo!r}", "algo")
    if algo == "fedsumm" and adapter_config is None:
        adapter_config = adapt_mod.AdapterConfig()
    parts = {p.client_id: p for p in partitions}
    if sorted(parts) != list(range(round_config.clients)):
        raise ConfigError(
            f"expected client ids 0..{round_config.clients - 1}, got {sorted(parts)}", "rounds.clients"
        )
    eval_data = eval_data if eval_data is not None else union(partitions)

    w0 = models.init_params(spec, round_config.seed) if init is None else np.array(init, dtype=np.float64)
    if w0.shape != (spec.param_dim,):
        raise ConfigError(f"initial params must have shape ({spec.param_dim},)")
    state = ServerState(w0, 0, round_config.seed)
    summ = _FedSummState()
    disc: dict[int, adapt_mod.DiscrepancyState] = {}
    prev_loss: dict[int, float] = {}
    use_dp = dp_config is not None and dp_config.enabled

    history = []
    for t in range(1, round_config.total_rounds + 1):
        state.round = t
        try:
            record = _one_round(state, round_config, algo, dp_config if use_dp else None, parts, spec,
                                adapter_config, summ, disc, prev_loss, eval_data)
        except FedSummError as exc:
            raise RunError(str(exc), t) from exc
        except (FloatingPointError, ValueError) as exc:
            raise RunError(str(exc), t) from exc
        history.append(record)
        if on_round is not None:
            on_round(record)
    return history


def _one_round(state, rc, algo, dp_config, parts, spec, adapter_config, summ, disc, prev_loss, eval_data):
    t = state.round
    participants = sample_clients(state, rc.clients, rc.sample_fraction)
    w_broadcast = state.global_params
    rate = adapter_config.correction_rate if adapter_config is not None else 1.0

    reports = []
    for c in participants:
        correction = summ.pending.get(c) if algo == "fedsumm" else None
        reports.append(client_update(c, w_broadcast, correction, parts[c], spec, rc.local_steps,
                                     rc.batch_size, rc.learning_rate, (rc.seed, t), rate))

    modulation, order = {}, []
    if algo == "fedsumm":
        pers = adapt_mod.personalize(reports, summ.store, disc, adapter_config, prev_loss)
        summ.store = pers.store
        summ.pending.update(pers.corrections)
        modulation, order = pers.modulation, pers.store.client_ids()

    telemetry = None
    if dp_config is not None:
        deltas = {r.client_id: r.params - w_broadcast for r in reports}
        w_next, telemetry = dp_mod.private_aggregate(deltas, w_broadcast, dp_config, t)
    else:
        w_next = fedavg_aggregate(reports, rc.weighting)

    for r in reports:
        disc[r.client_id] = adapt_mod.update_discrepancy(disc.get(r.client_id, adapt_mod.DiscrepancyState()), r.params, w_next)
        prev_loss[r.client_id] = r.loss
    state.global_params = w_next

    global_loss = models.loss(spec, w_next, eval_data)
    return RoundMetrics(
        round=t,
        global_loss=global_loss,
        per_client_loss={r.client_id: r.loss for r in reports},
        rho_per_client={c: disc[c].rho for c in sorted(disc)},
        perplexity=math.exp(global_loss) if spec.is_classifier else None,
        global_params=w_next.copy(),
        participants=list(participants),
        modulation=modulation,
        store_order=order,
        dp_telemetry=telemetry,
    )
