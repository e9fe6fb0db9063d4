"""Exception hierarchy shared by every module."""

from __future__ import annotations


class FedSummError(Exception):
    """Base class for all package errors."""


class ConfigError(FedSummError, ValueError):
    """Invalid configuration or inconsistent dimensions.

    ``field`` names the offending configuration key when one is known.
    """

    def __init__(self, message: str, field: str | None = None):
        self.field = field
        super().__init__(f"{field}: {message}" if field else message)


class NumericalError(FedSummError, ArithmeticError):
    """A computation produced (or was fed) a non-finite value."""

    def __init__(self, message: str, index: int | None = None):
        self.index = index
        suffix = f" (parameter index {index})" if index is not None else ""
        super().__init__(message + suffix)


class ProtocolError(FedSummError, RuntimeError):
    """Federated protocol contract violated (unknown client, bad rank, dim mismatch)."""

    def __init__(self, message: str, client_id: int | None = None):
        self.client_id = client_id
        super().__init__(message if client_id is None else f"client {client_id}: {message}")


class DataFormatError(FedSummError, ValueError):
    """Malformed or inconsistent dataset file."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(message if line is None else f"line {line}: {message}")


class UnsupportedMetricError(FedSummError, ValueError):
    """Metric requested for a model it is not defined on."""


class RunError(FedSummError, RuntimeError):
    """Failure inside an experiment, tagged with the round it happened in."""

    def __init__(self, message: str, round: int):
        self.round = round
        super().__init__(f"round {round}: {message}")
