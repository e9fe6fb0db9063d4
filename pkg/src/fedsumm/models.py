"""Small differentiable models with analytic loss and gradient.

Parameters always live in one flat float64 vector.  Layouts:

* ``linear`` / ``logistic``: ``W`` (output_dim x input_dim, row-major) then ``b`` (output_dim).
* ``mlp``: ``W1`` (hidden x input), ``b1`` (hidden), ``W2`` (output x hidden), ``b2`` (output),
  tanh hidden activation.

Losses are batch means of per-example losses.  Squared error is the plain
sum of squared residuals over outputs (no 1/2 factor); cross-entropy is in nats.
Every batch is reordered by ascending example index before any reduction,
so results do not depend on the order the caller happened to pass rows in.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, NumericalError

KINDS = ("linear", "logistic", "mlp")
LOSS_KINDS = ("squared-error", "cross-entropy")


@dataclass(frozen=True)
class ModelSpec:
    kind: str
    input_dim: int
    output_dim: int
    hidden_dim: int = 0
    loss_kind: str | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown model kind {self.kind!r}", "model.kind")
        if self.loss_kind is None:
            default = "squared-error" if self.kind == "linear" else "cross-entropy"
            object.__setattr__(self, "loss_kind", default)
        if self.loss_kind not in LOSS_KINDS:
            raise ConfigError(f"unknown loss kind {self.loss_kind!r}", "model.loss_kind")
        if self.input_dim < 1:
            raise ConfigError("must be positive", "model.input_dim")
        if self.output_dim < 1:
            raise ConfigError("must be positive", "model.output_dim")
        if self.kind == "mlp":
            if self.hidden_dim < 1:
                raise ConfigError("mlp needs hidden_dim >= 1", "model.hidden_dim")
        elif self.hidden_dim != 0:
            raise ConfigError("only mlp models take a hidden layer", "model.hidden_dim")
        if self.kind == "linear" and self.loss_kind != "squared-error":
            raise ConfigError("linear models use squared-error", "model.loss_kind")
        if self.kind == "logistic" and self.loss_kind != "cross-entropy":
            raise ConfigError("logistic models use cross-entropy", "model.loss_kind")
        if self.loss_kind == "cross-entropy" and self.output_dim < 2:
            raise ConfigError("cross-entropy needs at least 2 classes", "model.output_dim")

    @property
    def param_dim(self) -> int:
        i, o, h = self.input_dim, self.output_dim, self.hidden_dim
        if self.kind == "mlp":
            return h * i + h + o * h + o
        return o * i + o

    @property
    def is_classifier(self) -> bool:
        return self.loss_kind == "cross-entropy"


@dataclass(frozen=True, eq=False)
class Dataset:
    """A batch of examples.

    ``targets`` holds class indices (int, shape ``(n,)``) for cross-entropy
    models and real vectors (float, shape ``(n, output_dim)``) for squared error.
    ``index`` carries each example's global identity and fixes reduction order.
    """

    features: np.ndarray
    targets: np.ndarray
    index: np.ndarray = field(default=None)

    def __post_init__(self):
        x = np.asarray(self.features, dtype=np.float64)
        if x.ndim != 2:
            raise ConfigError(f"features must be 2-D, got shape {x.shape}")
        y = np.asarray(self.targets)
        if y.shape[0] != x.shape[0]:
            raise ConfigError("features and targets disagree on example count")
        idx = np.arange(x.shape[0]) if self.index is None else np.asarray(self.index, dtype=np.int64)
        if idx.shape != (x.shape[0],):
            raise ConfigError("index must have one entry per example")
        object.__setattr__(self, "features", x)
        object.__setattr__(self, "targets", y)
        object.__setattr__(self, "index", idx)

    def __len__(self) -> int:
        return self.features.shape[0]

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            np.array_equal(self.features, other.features)
            and np.array_equal(self.targets, other.targets)
            and np.array_equal(self.index, other.index)
        )

    def take(self, rows) -> "Dataset":
        rows = np.asarray(rows)
        return Dataset(self.features[rows], self.targets[rows], self.index[rows])

    def canonical(self) -> "Dataset":
        """Rows sorted by ascending example index (no copy when already sorted)."""
        if len(self) < 2 or np.all(self.index[1:] > self.index[:-1]):
            return self
        return self.take(np.argsort(self.index, kind="stable"))

    @staticmethod
    def concat(parts) -> "Dataset":
        parts = list(parts)
        return Dataset(
            np.concatenate([p.features for p in parts]),
            np.concatenate([p.targets for p in parts]),
            np.concatenate([p.index for p in parts]),
        )


def init_params(spec: ModelSpec, seed: int = 0) -> np.ndarray:
    """Zeros for linear/logistic; scaled Gaussian weights and zero biases for the MLP."""
    if spec.kind != "mlp":
        return np.zeros(spec.param_dim)
    rng = np.random.default_rng(seed)
    i, h, o = spec.input_dim, spec.hidden_dim, spec.output_dim
    w1 = rng.standard_normal((h, i)) / np.sqrt(i)
    w2 = rng.standard_normal((o, h)) / np.sqrt(h)
    return np.concatenate([w1.ravel(), np.zeros(h), w2.ravel(), np.zeros(o)])


def _unpack(spec: ModelSpec, w: np.ndarray):
    i, o, h = spec.input_dim, spec.output_dim, spec.hidden_dim
    if spec.kind == "mlp":
        a = h * i
        w1 = w[:a].reshape(h, i)
        b1 = w[a : a + h]
        w2 = w[a + h : a + h + o * h].reshape(o, h)
        b2 = w[a + h + o * h :]
        return w1, b1, w2, b2
    return w[: o * i].reshape(o, i), w[o * i :]


def _check(spec: ModelSpec, w, batch: Dataset) -> np.ndarray:
    w = np.asarray(w, dtype=np.float64)
    if w.shape != (spec.param_dim,):
        raise ConfigError(f"parameter vector has shape {w.shape}, model needs ({spec.param_dim},)")
    if len(batch) == 0:
        raise ConfigError("batch is empty")
    if batch.features.shape[1] != spec.input_dim:
        raise ConfigError(
            f"features have {batch.features.shape[1]} columns, model expects {spec.input_dim}"
        )
    y = batch.targets
    if spec.is_classifier:
        if y.ndim != 1 or not np.issubdtype(y.dtype, np.integer):
            raise ConfigError("cross-entropy targets must be a 1-D array of class indices")
        if y.min() < 0 or y.max() >= spec.output_dim:
            raise ConfigError(f"class index outside [0, {spec.output_dim})")
    elif y.shape != (len(batch), spec.output_dim):
        if not (spec.output_dim == 1 and y.shape == (len(batch),)):
            raise ConfigError(f"regression targets need shape (n, {spec.output_dim})")
    bad = np.flatnonzero(~np.isfinite(w))
    if bad.size:
        raise NumericalError("non-finite parameter", int(bad[0]))
    return w


def _regression_targets(spec: ModelSpec, y: np.ndarray) -> np.ndarray:
    y = np.asarray(y, dtype=np.float64)
    return y.reshape(-1, spec.output_dim)


def predict(spec: ModelSpec, w: np.ndarray, features: np.ndarray) -> np.ndarray:
    """Raw outputs: logits for classifiers, predictions for regression."""
    w = np.asarray(w, dtype=np.float64)
    if spec.kind == "mlp":
        w1, b1, w2, b2 = _unpack(spec, w)
        return np.tanh(features @ w1.T + b1) @ w2.T + b2
    wm, b = _unpack(spec, w)
    return features @ wm.T + b


def _log_softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=1, keepdims=True))


def _forward_backward(spec: ModelSpec, w: np.ndarray, batch: Dataset, want_grad: bool):
    batch = batch.canonical()
    x, n = batch.features, len(batch)
    if spec.kind == "mlp":
        w1, b1, w2, b2 = _unpack(spec, w)
        hidden = np.tanh(x @ w1.T + b1)
        out = hidden @ w2.T + b2
    else:
        wm, b = _unpack(spec, w)
        out = x @ wm.T + b

    if spec.is_classifier:
        logp = _log_softmax(out)
        y = batch.targets
        loss = -np.sum(logp[np.arange(n), y]) / n
        if want_grad:
            dout = np.exp(logp)
            dout[np.arange(n), y] -= 1.0
            dout /= n
    else:
        resid = out - _regression_targets(spec, batch.targets)
        loss = np.sum(np.sum(resid * resid, axis=1)) / n
        if want_grad:
            dout = (2.0 / n) * resid

    if not want_grad:
        return float(loss), None

    if spec.kind == "mlp":
        dw2 = dout.T @ hidden
        db2 = dout.sum(axis=0)
        dz = (dout @ w2) * (1.0 - hidden * hidden)
        dw1 = dz.T @ x
        db1 = dz.sum(axis=0)
        grad = np.concatenate([dw1.ravel(), db1, dw2.ravel(), db2])
    else:
        grad = np.concatenate([(dout.T @ x).ravel(), dout.sum(axis=0)])
    return float(loss), grad


def _finite_or_raise(loss: float, grad: np.ndarray | None):
    if grad is not None:
        bad = np.flatnonzero(~np.isfinite(grad))
        if bad.size:
            raise NumericalError("non-finite gradient", int(bad[0]))
    if not np.isfinite(loss):
        raise NumericalError("non-finite loss")


def loss(spec: ModelSpec, w, batch: Dataset) -> float:
    w = _check(spec, w, batch)
    value, _ = _forward_backward(spec, w, batch, want_grad=False)
    _finite_or_raise(value, None)
    return value


def gradient(spec: ModelSpec, w, batch: Dataset) -> np.ndarray:
    return loss_and_gradient(spec, w, batch)[1]


def loss_and_gradient(spec: ModelSpec, w, batch: Dataset) -> tuple[float, np.ndarray]:
    w = _check(spec, w, batch)
    value, grad = _forward_backward(spec, w, batch, want_grad=True)
    _finite_or_raise(value, grad)
    return value, grad


def sgd_step(spec: ModelSpec, w, batch: Dataset, eta: float) -> np.ndarray:
    """One gradient step; returns a new vector and leaves ``w`` untouched."""
    if eta < 0:
        raise ConfigError("learning rate must be non-negative")
    w = np.asarray(w, dtype=np.float64)
    return w - eta * gradient(spec, w, batch)
