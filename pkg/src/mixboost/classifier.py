"""Probabilistic binary classifiers trainable on soft labels.

The MLP is a plain numpy implementation (ReLU hidden layers, softmax output,
mean cross-entropy, mini-batch Adam). It is the model retrained inside the
augmentation loop, so it must accept non one-hot targets.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field

import numpy as np

from .dataset import Dataset

LOG_EPS = 1e-12


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class MlpConfig:
    hidden_layers: tuple[int, ...] = (256, 256)
    learning_rate: float = 1e-4
    batch_size: int = 500
    epochs: int = 300
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "hidden_layers", tuple(int(h) for h in self.hidden_layers))
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if any(h < 1 for h in self.hidden_layers):
            raise ValueError("hidden layer widths must be >= 1")


@dataclass
class AdamState:
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)

    @classmethod
    def for_params(cls, params: list[np.ndarray]) -> AdamState:
        return cls(m=[np.zeros_like(p) for p in params], v=[np.zeros_like(p) for p in params])

    def update(self, params: list[np.ndarray], grads: list[np.ndarray], lr: float) -> None:
        self.step += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1**self.step
        c2 = 1.0 - b2**self.step
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            p -= lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def cross_entropy(probs: np.ndarray, targets: np.ndarray) -> float:
    return float(-(targets * np.log(probs + LOG_EPS)).sum(axis=1).mean())


class MLP:
    """Fully connected network with ReLU hidden units and a 2-way softmax.

    ``params`` alternates weight matrices and bias vectors:
    ``[W1, b1, W2, b2, ...]`` with ``Wk`` of shape (fan_in, fan_out).
    """

    def __init__(self, layer_sizes, seed=0):
        self.layer_sizes = tuple(int(s) for s in layer_sizes)
        rng = np.random.default_rng(seed)
        self.params = []
        for fan_in, fan_out in zip(self.layer_sizes[:-1], self.layer_sizes[1:]):
            limit = math.sqrt(6.0 / (fan_in + fan_out))
            self.params.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
            self.params.append(np.zeros(fan_out))
        self.loss_history: list[float] = []

    @property
    def n_features(self) -> int:
        return self.layer_sizes[0]

    def _check_width(self, x):
        if x.shape[-1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got {x.shape[-1]}")

    def logits(self, x: np.ndarray) -> np.ndarray:
        h = x
        n_layers = len(self.params) // 2
        for k in range(n_layers):
            h = h @ self.params[2 * k] + self.params[2 * k + 1]
            if k < n_layers - 1:
                h = np.maximum(h, 0.0)
        return h

    def predict_proba(self, features) -> np.ndarray:
        x = np.asarray(features, dtype=float)
        self._check_width(x)
        if x.ndim == 1:
            return softmax(self.logits(x[None, :]))[0]
        return softmax(self.logits(x))

    def loss(self, x: np.ndarray, y: np.ndarray) -> float:
        return cross_entropy(softmax(self.logits(x)), y)

    def loss_and_grads(self, x: np.ndarray, y: np.ndarray) -> tuple[float, list[np.ndarray]]:
        n_layers = len(self.params) // 2
        acts = [x]
        pre = []
        h = x
        for k in range(n_layers):
            z = h @ self.params[2 * k] + self.params[2 * k + 1]
            pre.append(z)
            h = np.maximum(z, 0.0) if k < n_layers - 1 else z
            acts.append(h)
        p = softmax(h)
        loss = cross_entropy(p, y)

        # d(mean CE)/d(logits); exact for log(p), the 1e-12 floor is ignored
        delta = (p * y.sum(axis=1, keepdims=True) - y) / x.shape[0]
        grads = [None] * len(self.params)
        for k in range(n_layers - 1, -1, -1):
            grads[2 * k] = acts[k].T @ delta
            grads[2 * k + 1] = delta.sum(axis=0)
            if k > 0:
                delta = (delta @ self.params[2 * k].T) * (pre[k - 1] > 0)
        return loss, grads

    def get_flat(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self.params])

    def dumps(self) -> str:
        """Debug dump: layer sizes on the first line, then one row-major tensor per line."""
        lines = [" ".join(str(s) for s in self.layer_sizes)]
        lines += [" ".join(repr(float(v)) for v in p.ravel()) for p in self.params]
        return "\n".join(lines) + "\n"


def mlp_fit(config: MlpConfig, train: Dataset, init: MLP | None = None) -> MLP:
    """Train an MLP on ``train`` by mini-batch Adam on mean cross-entropy.

    ``init`` warm-starts from a copy of an existing model instead of a fresh
    initialization. The per-epoch shuffle order depends only on ``config.seed``.
    """
    if len(train) == 0:
        raise ValueError("cannot fit on an empty dataset")
    x, y = train.features, train.labels
    if init is not None:
        if init.n_features != train.n_features:
            raise ValueError(f"warm-start model expects {init.n_features} features, got {train.n_features}")
        model = copy.deepcopy(init)
        model.loss_history = []
    else:
        model = MLP((train.n_features, *config.hidden_layers, 2), seed=config.seed)
    shuffle_rng = np.random.default_rng([config.seed, 1])
    adam = AdamState.for_params(model.params)
    n = len(train)
    bs = config.batch_size
    for epoch in range(config.epochs):
        order = shuffle_rng.permutation(n)
        total = 0.0
        for b, start in enumerate(range(0, n, bs)):
            rows = order[start:start + bs]
            loss, grads = model.loss_and_grads(x[rows], y[rows])
            if not math.isfinite(loss):
                raise TrainingError(f"non-finite loss at epoch {epoch}, batch {b}")
            adam.update(model.params, grads, config.learning_rate)
            total += loss * len(rows)
        model.loss_history.append(total / n)
    return model


def mlp_predict_proba(model: MLP, features) -> np.ndarray:
    return model.predict_proba(features)


def knn_predict_proba(train: Dataset, k: int, features) -> np.ndarray:
    """Class frequencies among the k nearest training rows (Euclidean).

    Equal distances are resolved in favour of the lower row index.
    """
    if len(train) == 0:
        raise ValueError("empty training set")
    if not 1 <= k <= len(train):
        raise ValueError(f"k must be in [1, {len(train)}], got {k}")
    if not train.is_one_hot:
        raise ValueError("kNN requires one-hot training labels")
    q = np.asarray(features, dtype=float)
    single = q.ndim == 1
    q = np.atleast_2d(q)
    d2 = ((q[:, None, :] - train.features[None, :, :]) ** 2).sum(axis=2)
    nearest = np.argsort(d2, axis=1, kind="stable")[:, :k]
    out = train.labels[nearest].mean(axis=1)
    return out[0] if single else out


@dataclass
class KnnModel:
    """Lazy kNN wrapper exposing the same ``predict_proba`` surface as ``MLP``."""

    train: Dataset
    k: int = 5

    def predict_proba(self, features) -> np.ndarray:
        return knn_predict_proba(self.train, min(self.k, len(self.train)), features)


def gradient_check(
    model: MLP,
    batch: Dataset,
    h: float = 1e-5,
    n_checks: int | None = 50,
    seed: int = 0,
    param_index: int | None = None,
) -> float:
    """Max relative error between backprop and central finite differences.

    Checks ``n_checks`` randomly chosen scalar parameters (all of them when
    ``None``), optionally restricted to ``model.params[param_index]``.
    """
    if len(batch) == 0:
        raise ValueError("empty batch")
    x, y = batch.features, batch.labels
    _, grads = model.loss_and_grads(x, y)
    coords = []
    tensors = range(len(model.params)) if param_index is None else [param_index]
    for t in tensors:
        coords += [(t, j) for j in range(model.params[t].size)]
    if n_checks is not None and n_checks < len(coords):
        pick = np.random.default_rng(seed).choice(len(coords), size=n_checks, replace=False)
        coords = [coords[i] for i in pick]

    worst = 0.0
    for t, j in coords:
        flat = model.params[t].reshape(-1)
        orig = flat[j]
        flat[j] = orig + h
        up = model.loss(x, y)
        flat[j] = orig - h
        down = model.loss(x, y)
        flat[j] = orig
        numeric = (up - down) / (2 * h)
        analytic = grads[t].reshape(-1)[j]
        denom = max(abs(numeric) + abs(analytic), 1e-8)
        worst = max(worst, abs(numeric - analytic) / denom)
    return worst
