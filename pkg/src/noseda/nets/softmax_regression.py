"""Multinomial softmax regression trained by full-batch descent with backtracking.

Small-sample workhorse: it is the gate that routes windows to cluster
experts (a 16-sample regime) and the linear baseline over 4 classes.
Labels here are 0-based class indices and the class count is explicit,
since the gate's classes are cluster ids, not quality labels.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..serialize import array_from_json, array_to_json
from .common import log_softmax, one_hot, softmax

ARMIJO_C = 1e-4
MIN_STEP = 1e-12


@dataclass(frozen=True)
class SoftmaxRegressionParams:
    weights: np.ndarray  # (C, d)
    bias: np.ndarray  # (C,)

    def __post_init__(self):
        if not (np.all(np.isfinite(self.weights)) and np.all(np.isfinite(self.bias))):
            raise ValueError("non-finite parameters")
        if self.weights.shape[0] != self.bias.shape[0]:
            raise ValueError("weights and bias disagree on class count")

    @property
    def n_classes(self) -> int:
        return self.bias.shape[0]

    @property
    def input_dim(self) -> int:
        return self.weights.shape[1]

    def arrays(self) -> tuple[np.ndarray, ...]:
        return (self.weights, self.bias)

    def to_json_dict(self) -> dict:
        return {"weights": array_to_json(self.weights), "bias": array_to_json(self.bias)}

    @classmethod
    def from_json_dict(cls, obj: dict) -> "SoftmaxRegressionParams":
        return cls(weights=array_from_json(obj["weights"]), bias=array_from_json(obj["bias"]))


def _logits(weights: np.ndarray, bias: np.ndarray, X: np.ndarray) -> np.ndarray:
    return X @ weights.T + bias


def softmax_predict_proba(params: SoftmaxRegressionParams, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != params.input_dim:
        raise ValueError(f"expected (n, {params.input_dim}) inputs, got {X.shape}")
    return softmax(_logits(params.weights, params.bias, X))


def softmax_predict(params: SoftmaxRegressionParams, x: np.ndarray) -> np.ndarray:
    """Class-probability vector for a single feature vector."""
    return softmax_predict_proba(params, np.asarray(x)[None])[0]


def softmax_loss(params: SoftmaxRegressionParams, X: np.ndarray, y_idx: np.ndarray, l2: float = 0.0) -> float:
    return _objective(params.weights, params.bias, np.asarray(X, dtype=np.float64), np.asarray(y_idx), l2)


def _objective(weights, bias, X, y_idx, l2) -> float:
    lp = log_softmax(_logits(weights, bias, X))
    nll = -lp[np.arange(len(y_idx)), y_idx].mean()
    return float(nll + 0.5 * l2 * (weights**2).sum())


def _gradient(weights, bias, X, y_idx, l2):
    n = X.shape[0]
    P = softmax(_logits(weights, bias, X))
    R = (P - one_hot(y_idx, bias.shape[0])) / n
    return R.T @ X + l2 * weights, R.sum(axis=0)


def softmax_loss_grad(params: SoftmaxRegressionParams, X: np.ndarray, y_idx: np.ndarray, l2: float = 0.0):
    X = np.asarray(X, dtype=np.float64)
    y_idx = np.asarray(y_idx)
    loss = _objective(params.weights, params.bias, X, y_idx, l2)
    gw, gb = _gradient(params.weights, params.bias, X, y_idx, l2)
    return loss, (gw, gb)


def softmax_train(
    X: np.ndarray,
    labels: np.ndarray,
    n_classes: int,
    l2: float = 1e-4,
    max_iter: int = 500,
    tol: float = 1e-6,
    return_trace: bool = False,
):
    """Minimize L2-regularized cross-entropy (weights only) from a zero init.

    Full-batch gradient descent with Armijo backtracking, so the loss trace
    is nonincreasing.  Stops when the gradient norm drops below ``tol``, the
    line search stalls, or after ``max_iter`` accepted steps.  ``labels`` are
    0-based indices into ``n_classes`` classes.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError(f"expected a nonempty (n, d) matrix, got shape {X.shape}")
    if y.shape[0] != X.shape[0]:
        raise ValueError("labels do not match inputs")
    if y.min() < 0 or y.max() >= n_classes:
        raise ValueError(f"labels must lie in 0..{n_classes - 1}")

    weights = np.zeros((n_classes, X.shape[1]))
    bias = np.zeros(n_classes)
    loss = _objective(weights, bias, X, y, l2)
    trace = [loss]
    for _ in range(max_iter):
        gw, gb = _gradient(weights, bias, X, y, l2)
        gnorm2 = float((gw**2).sum() + (gb**2).sum())
        if np.sqrt(gnorm2) < tol:
            break
        # shrink the step until the Armijo decrease condition holds
        step = 1.0
        while step >= MIN_STEP:
            cand = _objective(weights - step * gw, bias - step * gb, X, y, l2)
            if cand <= loss - ARMIJO_C * step * gnorm2:
                break
            step *= 0.5
        if step < MIN_STEP:
            break
        weights -= step * gw
        bias -= step * gb
        loss = cand
        trace.append(loss)

    params = SoftmaxRegressionParams(weights=weights, bias=bias)
    if return_trace:
        return params, trace
    return params
