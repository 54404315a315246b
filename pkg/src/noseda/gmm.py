"""Diagonal-covariance Gaussian mixture fitted by EM.

Clusters flattened 2-frame windows of the source domain; each cluster later
gets its own recurrent expert.  Diagonal covariances because the flattened
window dimension (2d, typically 18) is large relative to the few thousand
available points.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

VAR_FLOOR = 1e-6
_WEIGHT_FLOOR = 1e-12


@dataclass(frozen=True)
class GmmParams:
    weights: np.ndarray  # (k,)
    means: np.ndarray  # (k, p)
    variances: np.ndarray  # (k, p)

    def __post_init__(self):
        if abs(float(self.weights.sum()) - 1.0) > 1e-9:
            raise ValueError("mixture weights must sum to 1")
        if np.any(self.weights <= 0):
            raise ValueError("mixture weights must be positive")
        if np.any(self.variances < VAR_FLOOR):
            raise ValueError(f"variances below floor {VAR_FLOOR}")

    @property
    def k(self) -> int:
        return self.weights.shape[0]

    @property
    def p(self) -> int:
        return self.means.shape[1]

    def to_json_dict(self) -> dict:
        return {
            "k": self.k,
            "weights": self.weights.tolist(),
            "means": self.means.tolist(),
            "variances": self.variances.tolist(),
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "GmmParams":
        return cls(
            weights=np.asarray(obj["weights"], dtype=np.float64),
            means=np.asarray(obj["means"], dtype=np.float64),
            variances=np.asarray(obj["variances"], dtype=np.float64),
        )


def _check_input(X: np.ndarray, p: int | None = None) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if not np.all(np.isfinite(X)):
        raise ValueError("non-finite values in input")
    if p is not None and X.shape[1] != p:
        raise ValueError(f"input has dimension {X.shape[1]}, model expects {p}")
    return X


def _log_joint(params: GmmParams, X: np.ndarray) -> np.ndarray:
    """(n, k) matrix of log(pi_k) + log N(x_i ; mu_k, diag(var_k))."""
    const = -0.5 * np.log(2.0 * np.pi * params.variances).sum(axis=1)  # (k,)
    quad = -0.5 * (((X[:, None, :] - params.means) ** 2) / params.variances).sum(axis=2)
    return np.log(params.weights) + const + quad


def _logsumexp_rows(a: np.ndarray) -> np.ndarray:
    m = a.max(axis=1)
    return m + np.log(np.exp(a - m[:, None]).sum(axis=1))


def gmm_posterior(params: GmmParams, x: np.ndarray) -> np.ndarray:
    """Responsibilities p(component | x), log-sum-exp stabilized."""
    X = _check_input(x, params.p)
    lj = _log_joint(params, X)
    resp = np.exp(lj - _logsumexp_rows(lj)[:, None])
    return resp[0] if np.asarray(x).ndim == 1 else resp


def gmm_assign(params: GmmParams, X: np.ndarray) -> np.ndarray:
    """Hard cluster ids: argmax posterior, ties to the lower component id."""
    X = _check_input(X, params.p)
    lj = _log_joint(params, X)
    return np.argmax(lj, axis=1)


def gmm_log_likelihood(params: GmmParams, X: np.ndarray) -> float:
    X = _check_input(X, params.p)
    return float(_logsumexp_rows(_log_joint(params, X)).sum())


def _farthest_point_means(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    # First center random, each next one maximizes min distance to the chosen set.
    first = int(rng.integers(X.shape[0]))
    chosen = [first]
    d2 = ((X - X[first]) ** 2).sum(axis=1)
    for _ in range(1, k):
        j = int(np.argmax(d2))
        chosen.append(j)
        d2 = np.minimum(d2, ((X - X[j]) ** 2).sum(axis=1))
    return X[chosen].copy()


def gmm_fit(
    X: np.ndarray,
    k: int = 2,
    max_iter: int = 200,
    tol: float = 1e-6,
    seed: int = 0,
    return_trace: bool = False,
):
    """Fit a k-component diagonal GMM with EM.

    Seeding is farthest-point from a seeded RNG (single restart), so the fit
    is deterministic given (X, k, seed).  Stops when the log-likelihood
    improves by less than ``tol`` or after ``max_iter`` iterations; variances
    are floored at 1e-6 every M-step.

    Returns GmmParams, or (GmmParams, trace) with the per-iteration
    log-likelihood trace when ``return_trace`` is set.
    """
    X = _check_input(X)
    n, p = X.shape
    if n < k:
        raise ValueError(f"need at least k={k} points, got {n}")
    rng = np.random.default_rng(seed)

    means = _farthest_point_means(X, k, rng)
    variances = np.tile(np.maximum(X.var(axis=0), VAR_FLOOR), (k, 1))
    weights = np.full(k, 1.0 / k)

    trace: list[float] = []
    prev_ll = -np.inf
    for _ in range(max_iter):
        params = GmmParams(weights=weights, means=means, variances=variances)
        lj = _log_joint(params, X)
        per_point = _logsumexp_rows(lj)
        ll = float(per_point.sum())
        trace.append(ll)
        if ll - prev_ll < tol:
            break
        prev_ll = ll
        resp = np.exp(lj - per_point[:, None])  # E-step

        # M-step
        nk = resp.sum(axis=0)
        alive = nk > _WEIGHT_FLOOR
        new_means = means.copy()
        new_vars = variances.copy()
        new_means[alive] = (resp.T @ X)[alive] / nk[alive, None]
        ex2 = (resp.T @ (X**2))[alive] / nk[alive, None]
        new_vars[alive] = np.maximum(ex2 - new_means[alive] ** 2, VAR_FLOOR)
        weights = np.maximum(nk / n, _WEIGHT_FLOOR)
        weights = weights / weights.sum()
        means, variances = new_means, new_vars

    params = GmmParams(weights=weights, means=means, variances=variances)
    if return_trace:
        return params, trace
    return params
