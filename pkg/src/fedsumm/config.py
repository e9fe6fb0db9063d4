"""Experiment and sweep configuration.

Configs are JSON objects.  Unknown keys anywhere are errors, every missing
key takes the dataclass default, and :meth:`ExperimentConfig.to_dict` emits
the fully-resolved form that :func:`load_experiment` reads back unchanged.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

from .adapter import AdapterConfig
from .data import HeterogeneityConfig
from .dp import DpConfig
from .errors import ConfigError
from .models import ModelSpec
from .protocol import ALGOS, RoundConfig

SWEEP_VARIABLES = ("rounds", "clients", "epsilon", "skew")
_TOP_KEYS = {"run_label", "algo", "seed", "target_loss", "output_dir", "rounds", "model", "data", "adapter", "dp"}
_ROUND_KEYS = {"total_rounds", "clients", "sample_fraction", "local_steps", "batch_size", "learning_rate", "weighting"}
_MODEL_KEYS = {"kind", "input_dim", "output_dim", "hidden_dim", "loss_kind"}
_DATA_KEYS = {"scheme", "skew", "examples_per_client", "noise", "path"}
_ADAPTER_KEYS = {"epsilon", "norm_tolerance", "correction_rate"}
_DP_KEYS = {"noise_multiplier", "delta", "enabled"}


@dataclass(frozen=True)
class ExperimentConfig:
    algo: str
    round_config: RoundConfig
    model: ModelSpec
    heterogeneity: HeterogeneityConfig
    adapter_config: AdapterConfig | None = None
    dp_config: DpConfig | None = None
    data_path: str | None = None
    target_loss: float | None = None
    output_dir: str | None = None
    run_label: str = "run"
    seed: int = 0

    def to_dict(self) -> dict:
        rc = dataclasses.asdict(self.round_config)
        rc.pop("seed")
        het = dataclasses.asdict(self.heterogeneity)
        data = {k: het[k] for k in ("scheme", "skew", "examples_per_client", "noise")}
        data["path"] = self.data_path
        out = {
            "run_label": self.run_label,
            "algo": self.algo,
            "seed": self.seed,
            "target_loss": self.target_loss,
            "output_dir": self.output_dir,
            "rounds": rc,
            "model": dataclasses.asdict(self.model),
            "data": data,
            "adapter": dataclasses.asdict(self.adapter_config) if self.adapter_config else None,
        }
        if self.dp_config is not None:
            dp = dataclasses.asdict(self.dp_config)
            dp.pop("seed")
            out["dp"] = dp
        else:
            out["dp"] = None
        return out

    def config_hash(self) -> str:
        """SHA-256 over the resolved config, ignoring where output goes."""
        d = self.to_dict()
        d.pop("output_dir")
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def _section(raw, name: str, allowed: set) -> dict:
    if raw is None:
        return {}
    if not isinstance(raw, dict):
        raise ConfigError("must be an object", name)
    unknown = sorted(set(raw) - allowed)
    if unknown:
        raise ConfigError(f"unknown key {unknown[0]!r}", f"{name}.{unknown[0]}" if name else unknown[0])
    return dict(raw)


def _typed(section: dict, name: str, types: dict) -> dict:
    for key, kind in types.items():
        if key in section and section[key] is not None:
            value = section[key]
            ok = isinstance(value, kind) and not (isinstance(value, bool) and bool not in _as_tuple(kind))
            if not ok:
                raise ConfigError(f"expected {_type_name(kind)}, got {value!r}", f"{name}.{key}")
    return section


def _as_tuple(kind):
    return kind if isinstance(kind, tuple) else (kind,)


def _type_name(kind) -> str:
    return " or ".join(k.__name__ for k in _as_tuple(kind))


_NUM = (int, float)


def experiment_from_dict(raw: dict, seed: int | None = None, output_dir: str | None = None) -> ExperimentConfig:
    top = _section(raw, "", _TOP_KEYS)
    _typed(top, "config", {"run_label": str, "algo": str, "seed": int, "target_loss": _NUM, "output_dir": str})
    algo = top.get("algo", "fedavg")
    if algo not in ALGOS:
        raise ConfigError(f"must be one of {ALGOS}", "algo")
    if seed is None:
        seed = top.get("seed", 0)
    if not 0 <= seed < 2**64:
        raise ConfigError("must be an unsigned 64-bit integer", "seed")

    rounds = _typed(_section(top.get("rounds"), "rounds", _ROUND_KEYS), "rounds", {
        "total_rounds": int, "clients": int, "sample_fraction": _NUM, "local_steps": int,
        "batch_size": int, "learning_rate": _NUM, "weighting": str})
    model = _typed(_section(top.get("model"), "model", _MODEL_KEYS), "model", {
        "kind": str, "input_dim": int, "output_dim": int, "hidden_dim": int, "loss_kind": str})
    data = _typed(_section(top.get("data"), "data", _DATA_KEYS), "data", {
        "scheme": str, "skew": _NUM, "examples_per_client": int, "noise": _NUM, "path": str})

    model.setdefault("kind", "linear")
    model.setdefault("input_dim", 5)
    model.setdefault("output_dim", 1)
    round_config = RoundConfig(seed=seed, **rounds)
    spec = ModelSpec(**model)
    data_path = data.pop("path", None)
    het = HeterogeneityConfig(clients=round_config.clients, seed=seed, **data)

    adapter_raw = top.get("adapter")
    if algo == "fedavg" and adapter_raw is not None:
        raise ConfigError("adapter settings only apply to algo=fedsumm", "adapter")
    adapter = None
    if algo == "fedsumm":
        adapter = AdapterConfig(**_typed(_section(adapter_raw, "adapter", _ADAPTER_KEYS), "adapter", {
            "epsilon": _NUM, "norm_tolerance": _NUM, "correction_rate": _NUM}))

    dp = None
    if top.get("dp") is not None:
        dp_raw = _typed(_section(top["dp"], "dp", _DP_KEYS), "dp", {
            "noise_multiplier": _NUM, "delta": _NUM, "enabled": bool})
        dp = DpConfig(seed=seed, **dp_raw)

    return ExperimentConfig(
        algo=algo,
        round_config=round_config,
        model=spec,
        heterogeneity=het,
        adapter_config=adapter,
        dp_config=dp,
        data_path=data_path,
        target_loss=top.get("target_loss"),
        output_dir=output_dir if output_dir is not None else top.get("output_dir"),
        run_label=top.get("run_label", "run"),
        seed=seed,
    )


def read_json(path) -> dict:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"no such file {path}", "config") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON ({exc})", "config") from None
    if not isinstance(raw, dict):
        raise ConfigError("top level must be an object", "config")
    return raw


def load_experiment(path, seed: int | None = None, output_dir: str | None = None) -> ExperimentConfig:
    cfg = experiment_from_dict(read_json(path), seed, output_dir)
    if cfg.data_path is not None and not Path(cfg.data_path).is_absolute():
        cfg = dataclasses.replace(cfg, data_path=str((Path(path).parent / cfg.data_path).resolve()))
    return cfg


@dataclass(frozen=True)
class SweepSpec:
    variable: str
    values: tuple
    base: dict
    algos: tuple = ()

    def __post_init__(self):
        if self.variable not in SWEEP_VARIABLES:
            raise ConfigError(f"must be one of {SWEEP_VARIABLES}", "variable")
        if not self.values:
            raise ConfigError("must list at least one value", "values")
        for v in self.values:
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ConfigError(f"non-numeric value {v!r}", "values")
        if any(b <= a for a, b in zip(self.values, self.values[1:])):
            raise ConfigError("must be strictly increasing", "values")
        for a in self.algos:
            if a not in ALGOS:
                raise ConfigError(f"unknown algorithm {a!r}", "algos")
        if self.variable == "epsilon" and "fedavg" in self.cell_algos():
            raise ConfigError("epsilon sweeps only apply to fedsumm", "algos")

    def cell_algos(self) -> tuple:
        return self.algos or (self.base.get("algo", "fedavg"),)

    def cell_seed(self, base_seed: int, value) -> int:
        """Sub-seed per value; round-count sweeps share the base seed so runs stay prefix-consistent."""
        if self.variable == "rounds":
            return base_seed
        digest = hashlib.sha256(f"{base_seed}:{self.variable}:{value!r}".encode()).digest()
        return int.from_bytes(digest[:8], "little")

    def cell_config(self, value, algo: str, output_dir: str | None = None) -> ExperimentConfig:
        raw = json.loads(json.dumps(self.base))
        raw["algo"] = algo
        if algo == "fedavg":
            raw.pop("adapter", None)
        section, key = {
            "rounds": ("rounds", "total_rounds"),
            "clients": ("rounds", "clients"),
            "epsilon": ("adapter", "epsilon"),
            "skew": ("data", "skew"),
        }[self.variable]
        if raw.get(section) is None:
            raw[section] = {}
        raw[section][key] = value
        raw["seed"] = self.cell_seed(raw.get("seed", 0), value)
        raw["run_label"] = f"{raw.get('run_label', 'sweep')}-{self.variable}={value}-{algo}"
        return experiment_from_dict(raw, output_dir=output_dir)


def load_sweep(path) -> SweepSpec:
    raw = _section(read_json(path), "", {"variable", "values", "algos", "base", "base_config"})
    if "base" in raw and "base_config" in raw:
        raise ConfigError("give either base or base_config, not both", "base")
    if "base_config" in raw:
        base = read_json(Path(path).parent / raw["base_config"])
    else:
        base = raw.get("base", {})
    if not isinstance(base, dict):
        raise ConfigError("must be an object", "base")
    if (base.get("data") or {}).get("path") and not Path(base["data"]["path"]).is_absolute():
        base = json.loads(json.dumps(base))
        base["data"]["path"] = str((Path(path).parent / base["data"]["path"]).resolve())
    values = raw.get("values", [])
    if not isinstance(values, list):
        raise ConfigError("must be a list", "values")
    algos = raw.get("algos", [])
    if not isinstance(algos, list):
        raise ConfigError("must be a list", "algos")
    return SweepSpec(raw.get("variable", ""), tuple(values), base, tuple(algos))
