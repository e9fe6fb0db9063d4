"""Deterministic simulator for FedAvg and FedSUMM personalized federated learning."""

from .adapter import AdapterConfig, DiscrepancyState, MemoryGradientStore
from .data import HeterogeneityConfig, Partition, generate, load_jsonl, write_jsonl
from .dp import DpConfig
from .errors import ConfigError, DataFormatError, NumericalError, ProtocolError, RunError
from .metrics import RoundMetrics, RougeScore, perplexity, rouge_l, rouge_n
from .models import Dataset, ModelSpec
from .protocol import RoundConfig, run_experiment

__all__ = [
    "AdapterConfig", "ConfigError", "DataFormatError", "Dataset", "DiscrepancyState", "DpConfig",
    "HeterogeneityConfig", "MemoryGradientStore", "ModelSpec", "NumericalError", "Partition",
    "ProtocolError", "RoundConfig", "RoundMetrics", "RougeScore", "RunError", "generate",
    "load_jsonl", "perplexity", "rouge_l", "rouge_n", "run_experiment", "write_jsonl",
]
