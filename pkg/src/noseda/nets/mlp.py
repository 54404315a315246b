"""Two-hidden-layer (256 + 256) ReLU network on flattened windows.

Manual gradients; dropout with inverted scaling on both hidden layers during
training.  Matches the LSTM's training loop conventions (Adam, shuffled
mini-batches, seeded determinism, zero-initialized softmax head).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..serialize import array_from_json, array_to_json
from .common import (
    Adam,
    N_CLASSES,
    TrainConfig,
    cross_entropy_from_logits,
    dropout_mask,
    labels_to_indices,
    minibatch_indices,
    one_hot,
    softmax,
    uniform_init,
    write_trace_csv,
)

HIDDEN_SIZES = (256, 256)


@dataclass(frozen=True)
class MlpParams:
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    w3: np.ndarray
    b3: np.ndarray

    def __post_init__(self):
        if self.w1.shape[1] != self.w2.shape[0] or self.w2.shape[1] != self.w3.shape[0]:
            raise ValueError("inconsistent hidden-layer shapes")

    @property
    def input_dim(self) -> int:
        return self.w1.shape[0]

    @property
    def n_classes(self) -> int:
        return self.b3.shape[0]

    def arrays(self) -> tuple[np.ndarray, ...]:
        return (self.w1, self.b1, self.w2, self.b2, self.w3, self.b3)

    def to_json_dict(self) -> dict:
        keys = ("w1", "b1", "w2", "b2", "w3", "b3")
        return {k: array_to_json(a) for k, a in zip(keys, self.arrays())}

    @classmethod
    def from_json_dict(cls, obj: dict) -> "MlpParams":
        return cls(*(array_from_json(obj[k]) for k in ("w1", "b1", "w2", "b2", "w3", "b3")))


def mlp_init(input_dim: int, hidden=HIDDEN_SIZES, n_classes: int = N_CLASSES, seed: int = 0) -> MlpParams:
    rng = np.random.default_rng(seed)
    h1, h2 = hidden
    return MlpParams(
        w1=uniform_init(rng, (input_dim, h1), input_dim),
        b1=np.zeros(h1),
        w2=uniform_init(rng, (h1, h2), h1),
        b2=np.zeros(h2),
        w3=np.zeros((h2, n_classes)),
        b3=np.zeros(n_classes),
    )


def _check_input(params: MlpParams, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != params.input_dim:
        raise ValueError(f"expected (n, {params.input_dim}) inputs, got {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError("non-finite values in input")
    return X


def _forward(params: MlpParams, X: np.ndarray, drop1=None, drop2=None):
    a1 = np.maximum(X @ params.w1 + params.b1, 0.0)
    if drop1 is not None:
        a1 = a1 * drop1
    a2 = np.maximum(a1 @ params.w2 + params.b2, 0.0)
    if drop2 is not None:
        a2 = a2 * drop2
    logits = a2 @ params.w3 + params.b3
    return logits, {"a1": a1, "a2": a2, "drop1": drop1, "drop2": drop2}


def mlp_predict_proba(params: MlpParams, X: np.ndarray) -> np.ndarray:
    logits, _ = _forward(params, _check_input(params, X))
    return softmax(logits)


def mlp_predict(params: MlpParams, x: np.ndarray) -> np.ndarray:
    """Class-probability vector for one flattened window."""
    return mlp_predict_proba(params, np.asarray(x)[None])[0]


def mlp_predict_labels(params: MlpParams, X: np.ndarray) -> np.ndarray:
    return np.argmax(mlp_predict_proba(params, X), axis=1) + 1


def mlp_loss(params: MlpParams, X: np.ndarray, labels: np.ndarray) -> float:
    y = labels_to_indices(labels, params.n_classes)
    logits, _ = _forward(params, _check_input(params, X))
    return cross_entropy_from_logits(logits, y)


def mlp_loss_grad(params: MlpParams, X: np.ndarray, labels: np.ndarray, drop1=None, drop2=None):
    X = _check_input(params, X)
    y = labels_to_indices(labels, params.n_classes)
    B = X.shape[0]
    logits, cache = _forward(params, X, drop1, drop2)
    loss = cross_entropy_from_logits(logits, y)

    dlogits = (softmax(logits) - one_hot(y, params.n_classes)) / B
    d_w3 = cache["a2"].T @ dlogits
    d_b3 = dlogits.sum(axis=0)
    da2 = dlogits @ params.w3.T
    if cache["drop2"] is not None:
        da2 = da2 * cache["drop2"]
    da2 = da2 * (cache["a2"] > 0)
    d_w2 = cache["a1"].T @ da2
    d_b2 = da2.sum(axis=0)
    da1 = da2 @ params.w2.T
    if cache["drop1"] is not None:
        da1 = da1 * cache["drop1"]
    da1 = da1 * (cache["a1"] > 0)
    d_w1 = X.T @ da1
    d_b1 = da1.sum(axis=0)
    return loss, (d_w1, d_b1, d_w2, d_b2, d_w3, d_b3)


def mlp_train(
    X: np.ndarray,
    labels: np.ndarray,
    config: TrainConfig = TrainConfig(),
    hidden=HIDDEN_SIZES,
    return_trace: bool = False,
):
    """Train on flattened windows; labels in 1..4.  Deterministic given the seed."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError(f"expected (n, d) inputs, got {X.shape}")
    if X.shape[0] == 0:
        raise ValueError("empty training set")
    y = np.asarray(labels, dtype=np.int64)
    labels_to_indices(y)
    n, d = X.shape

    rng = np.random.default_rng(config.seed)
    params = mlp_init(d, hidden=hidden, seed=int(rng.integers(2**63)))
    arrays = params.arrays()
    opt = Adam(arrays, lr=config.learning_rate)
    h1, h2 = params.b1.shape[0], params.b2.shape[0]
    trace = []
    for _ in range(config.epochs):
        total = 0.0
        for idx in minibatch_indices(n, config.batch_size, rng):
            drop1 = dropout_mask(rng, (len(idx), h1), config.dropout)
            drop2 = dropout_mask(rng, (len(idx), h2), config.dropout)
            loss, grads = mlp_loss_grad(params, X[idx], y[idx], drop1, drop2)
            opt.step(arrays, grads)
            total += loss * len(idx)
        trace.append(total / n)
    if config.trace_path:
        write_trace_csv(config.trace_path, trace)
    if return_trace:
        return params, trace
    return params
