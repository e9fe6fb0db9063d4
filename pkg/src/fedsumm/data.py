"""Synthetic heterogeneous client datasets and JSONL dataset files."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataFormatError
from .models import Dataset, ModelSpec

SCHEMES = ("iid", "label-skew", "concept-shift")

# Distinct RNG stream tags so data, teacher and per-client draws never share state.
_TEACHER, _CLIENT = 1, 2


@dataclass(frozen=True)
class HeterogeneityConfig:
    scheme: str = "iid"
    skew: float = 0.0
    clients: int = 10
    examples_per_client: int = 100
    seed: int = 0
    noise: float = 0.1

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ConfigError(f"unknown scheme {self.scheme!r}", "data.scheme")
        if not 0.0 <= self.skew <= 1.0:
            raise ConfigError("must lie in [0, 1]", "data.skew")
        if self.clients < 2:
            raise ConfigError("need at least 2 clients", "data.clients")
        if self.examples_per_client < 1:
            raise ConfigError("must be positive", "data.examples_per_client")
        if self.noise < 0:
            raise ConfigError("must be non-negative", "data.noise")

    @property
    def concentration(self) -> float:
        """Dirichlet concentration for label skew: 10.05 at skew 0, 0.05 at skew 1."""
        return (1.0 - self.skew) * 10.0 + 0.05


@dataclass(frozen=True)
class Partition:
    client_id: int
    examples: Dataset

    def __len__(self) -> int:
        return len(self.examples)


def _rng(seed: int, *tags: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, *tags]))


def _teacher(spec: ModelSpec, rng: np.random.Generator):
    """Ground-truth linear map used to label every scheme."""
    scale = 1.0 / math.sqrt(spec.input_dim)
    weights = rng.standard_normal((spec.output_dim, spec.input_dim)) * scale * 3.0
    bias = rng.standard_normal(spec.output_dim) * 0.5
    return weights, bias


def _class_means(spec: ModelSpec, rng: np.random.Generator) -> np.ndarray:
    return rng.standard_normal((spec.output_dim, spec.input_dim)) * 1.5


def _label(spec, weights, bias, x, rng, noise):
    out = x @ weights.T + bias
    if spec.is_classifier:
        # Gumbel-max: a draw from softmax(out / max(noise, tiny)).
        temp = max(noise, 1e-12)
        gumbel = -np.log(-np.log(rng.random(out.shape)))
        return np.argmax(out / temp + gumbel, axis=1).astype(np.int64)
    return out + noise * rng.standard_normal(out.shape)


def generate(config: HeterogeneityConfig, spec: ModelSpec) -> list[Partition]:
    """Draw ``config.clients`` balanced partitions.

    * ``iid``: every client samples from one shared distribution.
    * ``label-skew`` (classifiers only): client class proportions come from
      ``Dirichlet(concentration)``; features are drawn around per-class means.
    * ``concept-shift``: features share one distribution but each client labels
      them with its own teacher ``theta_0 + skew * u_c``, so pairwise teacher
      distance grows linearly with ``skew``.

    Example indices are global: client ``c`` owns ``c*n .. c*n + n - 1``.
    """
    n, d = config.examples_per_client, spec.input_dim
    teacher_rng = _rng(config.seed, _TEACHER)
    weights, bias = _teacher(spec, teacher_rng)
    shifts = teacher_rng.standard_normal((config.clients, spec.output_dim, d + 1))
    means = _class_means(spec, teacher_rng) if spec.is_classifier else None

    if config.scheme == "label-skew" and not spec.is_classifier:
        raise ConfigError("label-skew needs a cross-entropy model", "data.scheme")

    if config.scheme == "label-skew":
        proportions = teacher_rng.dirichlet(np.full(spec.output_dim, config.concentration), size=config.clients)

    parts = []
    for c in range(config.clients):
        rng = _rng(config.seed, _CLIENT, c)
        index = np.arange(c * n, (c + 1) * n, dtype=np.int64)
        if config.scheme == "label-skew":
            y = rng.choice(spec.output_dim, size=n, p=proportions[c]).astype(np.int64)
            x = means[y] + rng.standard_normal((n, d))
        else:
            x = rng.standard_normal((n, d))
            w, b = weights, bias
            if config.scheme == "concept-shift":
                w = weights + config.skew * shifts[c, :, :d]
                b = bias + config.skew * shifts[c, :, d]
            if spec.is_classifier and config.scheme == "iid":
                y = rng.integers(spec.output_dim, size=n).astype(np.int64)
                x = means[y] + rng.standard_normal((n, d))
            else:
                y = _label(spec, w, b, x, rng, config.noise)
        parts.append(Partition(c, Dataset(x, y, index)))
    return parts


def union(partitions) -> Dataset:
    return Dataset.concat(p.examples for p in sorted(partitions, key=lambda p: p.client_id))


def ratio_split(dataset: Dataset, ratio: float) -> tuple[Dataset, Dataset]:
    """Split by example index: the first ``floor(ratio * n)`` indices go left."""
    if not 0.0 < ratio < 1.0:
        raise ConfigError("split ratio must lie in (0, 1)")
    ds = dataset.canonical()
    cut = int(math.floor(ratio * len(ds)))
    return ds.take(np.arange(cut)), ds.take(np.arange(cut, len(ds)))


def write_jsonl(partitions, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for part in sorted(partitions, key=lambda p: p.client_id):
            ds = part.examples.canonical()
            for row in range(len(ds)):
                target = ds.targets[row]
                target = target.tolist() if np.ndim(target) else target.item()
                record = {"client_id": part.client_id, "features": ds.features[row].tolist(), "target": target}
                fh.write(json.dumps(record) + "\n")


def load_jsonl(path) -> list[Partition]:
    """Read one example per line; partitions come back sorted by client id.

    Example index is the 0-based record position in the file, so a file
    written by :func:`write_jsonl` from generated data reloads identically.
    """
    rows: dict[int, list] = {}
    width = None
    target_kind = None
    position = 0
    text = Path(path).read_text(encoding="utf-8")
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
            cid, features, target = record["client_id"], record["features"], record["target"]
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise DataFormatError(f"malformed record ({exc})", lineno) from None
        if not isinstance(cid, int) or isinstance(cid, bool):
            raise DataFormatError("client_id must be an integer", lineno)
        if not isinstance(features, list) or not all(_is_number(v) for v in features):
            raise DataFormatError("features must be an array of numbers", lineno)
        if width is None:
            width = len(features)
        elif len(features) != width:
            raise DataFormatError(f"expected {width} features, found {len(features)}", lineno)
        kind = "vector" if isinstance(target, list) else "class"
        if kind == "class" and not (isinstance(target, int) and not isinstance(target, bool)):
            raise DataFormatError("target must be an integer or an array of numbers", lineno)
        if kind == "vector" and not all(_is_number(v) for v in target):
            raise DataFormatError("target array must hold numbers", lineno)
        if target_kind is None:
            target_kind = kind
        elif kind != target_kind:
            raise DataFormatError("mixed class and vector targets", lineno)
        rows.setdefault(cid, []).append((position, features, target))
        position += 1
    if not rows:
        raise DataFormatError("no examples")

    parts = []
    for cid in sorted(rows):
        idx, feats, targets = zip(*rows[cid])
        dtype = np.int64 if target_kind == "class" else np.float64
        parts.append(Partition(cid, Dataset(np.array(feats, dtype=np.float64), np.array(targets, dtype=dtype), np.array(idx))))
    return parts


def _is_number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)
