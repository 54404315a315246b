"""Shared pieces for the hand-rolled models: config, Adam, activations, batching."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

N_CLASSES = 4


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 100
    dropout: float = 0.2
    learning_rate: float = 1e-3
    batch_size: int = 32
    seed: int = 0
    trace_path: str | None = None  # per-epoch mean losses written here as CSV

    def __post_init__(self):
        if not (0.0 <= self.dropout < 1.0):
            raise ValueError(f"dropout must be in [0, 1), got {self.dropout}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")


def write_trace_csv(path, trace) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("epoch,loss\n")
        for i, loss in enumerate(trace, start=1):
            fh.write(f"{i},{loss!r}\n")


class Adam:
    """Adam with bias correction; updates parameter arrays in place."""

    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]

    def step(self, params, grads) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * g * g
            m_hat = m / (1 - b1**self.t)
            v_hat = v / (1 - b2**self.t)
            p -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


def log_softmax(z: np.ndarray) -> np.ndarray:
    m = z.max(axis=-1, keepdims=True)
    return z - m - np.log(np.exp(z - m).sum(axis=-1, keepdims=True))


def softmax(z: np.ndarray) -> np.ndarray:
    return np.exp(log_softmax(z))


def one_hot(idx: np.ndarray, k: int) -> np.ndarray:
    out = np.zeros((len(idx), k))
    out[np.arange(len(idx)), idx] = 1.0
    return out


def cross_entropy_from_logits(logits: np.ndarray, y_idx: np.ndarray) -> float:
    lp = log_softmax(logits)
    return float(-lp[np.arange(len(y_idx)), y_idx].mean())


def uniform_init(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    s = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-s, s, size=shape)


def labels_to_indices(labels: np.ndarray, n_classes: int = N_CLASSES) -> np.ndarray:
    """Map class labels 1..n to 0-based indices, validating the range."""
    y = np.asarray(labels, dtype=np.int64)
    if y.size == 0:
        raise ValueError("empty training set")
    if y.min() < 1 or y.max() > n_classes:
        raise ValueError(f"labels must lie in 1..{n_classes}, got range [{y.min()}, {y.max()}]")
    return y - 1


def minibatch_indices(n: int, batch_size: int, rng: np.random.Generator):
    """Yield shuffled index arrays covering all n samples once."""
    order = rng.permutation(n)
    for start in range(0, n, batch_size):
        yield order[start : start + batch_size]


def dropout_mask(rng: np.random.Generator, shape, p: float) -> np.ndarray | None:
    """Inverted-scaling mask: entries are 0 or 1/(1-p).  None when p == 0."""
    if p == 0.0:
        return None
    return (rng.random(shape) >= p) / (1.0 - p)


def flatten_arrays(arrays) -> np.ndarray:
    return np.concatenate([np.asarray(a).ravel() for a in arrays])


def unflatten_arrays(vec: np.ndarray, shapes) -> list[np.ndarray]:
    out = []
    pos = 0
    for shape in shapes:
        size = int(np.prod(shape))
        out.append(vec[pos : pos + size].reshape(shape).copy())
        pos += size
    return out
