"""Central finite-difference validation of the hand-derived gradients.

Run with dropout disabled and double precision.  ``grad_check`` works on any
objective over a flat parameter vector; the per-family helpers build such
objectives from a params object and one labeled sample (or small batch).
"""

from __future__ import annotations

import numpy as np

from .common import flatten_arrays, unflatten_arrays
from .lstm import LstmParams, lstm_loss_grad
from .mlp import MlpParams, mlp_loss_grad
from .softmax_regression import SoftmaxRegressionParams, softmax_loss_grad


def grad_check(objective, theta: np.ndarray, eps: float = 1e-5) -> float:
    """Max relative error between the analytic gradient and central differences.

    ``objective(theta) -> (value, grad)``.  Per-coordinate relative error is
    |g_a - g_n| / (|g_a| + |g_n| + 1e-12).
    """
    _, analytic = objective(theta)
    analytic = np.asarray(analytic, dtype=np.float64)
    if not np.all(np.isfinite(analytic)):
        raise ValueError("non-finite analytic gradient")
    numeric = np.empty_like(analytic)
    theta = theta.astype(np.float64).copy()
    for j in range(theta.size):
        orig = theta[j]
        theta[j] = orig + eps
        up, _ = objective(theta)
        theta[j] = orig - eps
        down, _ = objective(theta)
        theta[j] = orig
        numeric[j] = (up - down) / (2.0 * eps)
    rel = np.abs(analytic - numeric) / (np.abs(analytic) + np.abs(numeric) + 1e-12)
    return float(rel.max())


def _vector_objective(loss_grad, params_cls, like, *args):
    shapes = [a.shape for a in like.arrays()]

    def objective(vec):
        p = params_cls(*unflatten_arrays(vec, shapes))
        loss, grads = loss_grad(p, *args)
        return loss, flatten_arrays(grads)

    return objective


def lstm_objective(params: LstmParams, window: np.ndarray, label: int):
    obj = _vector_objective(lstm_loss_grad, LstmParams, params, np.asarray(window)[None], np.asarray([label]))
    return obj, flatten_arrays(params.arrays())


def mlp_objective(params: MlpParams, x: np.ndarray, label: int):
    obj = _vector_objective(mlp_loss_grad, MlpParams, params, np.asarray(x)[None], np.asarray([label]))
    return obj, flatten_arrays(params.arrays())


def softmax_objective(params: SoftmaxRegressionParams, x: np.ndarray, y_idx: int, l2: float = 0.0):
    obj = _vector_objective(
        softmax_loss_grad, SoftmaxRegressionParams, params, np.asarray(x)[None], np.asarray([y_idx]), l2
    )
    return obj, flatten_arrays(params.arrays())
