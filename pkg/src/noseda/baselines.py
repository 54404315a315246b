"""Non-neural baselines: SAMME AdaBoost over decision stumps and a four-way
self-growing 1-nearest-neighbour classifier.

Both operate on flattened window vectors; callers flatten 2 x d windows
before training (see ``ingest.flatten_windows``).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)

_EPS_ERR = 1e-16


@dataclass(frozen=True)
class Stump:
    """Depth-1 split: predict left_class where x[feature] <= threshold, else right_class."""

    feature: int
    threshold: float
    left_class: int
    right_class: int

    def predict(self, X: np.ndarray) -> np.ndarray:
        side = X[:, self.feature] <= self.threshold
        return np.where(side, self.left_class, self.right_class)


@dataclass(frozen=True)
class AdaBoostModel:
    stumps: tuple[Stump, ...]
    alphas: tuple[float, ...]
    classes: tuple[int, ...]
    stump_errors: tuple[float, ...]  # weighted training error of each accepted stump

    def to_json_dict(self) -> dict:
        return {
            "classes": list(self.classes),
            "alphas": list(self.alphas),
            "stump_errors": list(self.stump_errors),
            "stumps": [
                {"feature": s.feature, "threshold": s.threshold, "left": s.left_class, "right": s.right_class}
                for s in self.stumps
            ],
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "AdaBoostModel":
        return cls(
            stumps=tuple(
                Stump(feature=s["feature"], threshold=s["threshold"], left_class=s["left"], right_class=s["right"])
                for s in obj["stumps"]
            ),
            alphas=tuple(obj["alphas"]),
            classes=tuple(obj["classes"]),
            stump_errors=tuple(obj["stump_errors"]),
        )


def _best_stump(X: np.ndarray, y: np.ndarray, w: np.ndarray, classes: tuple[int, ...]):
    """Exhaustive midpoint-threshold search; each side votes its weighted-majority class.

    Returns (stump, weighted_error, predictions) or None when no feature splits.
    """
    n, p = X.shape
    k = len(classes)
    class_idx = np.searchsorted(classes, y)
    wc = np.zeros((n, k))
    wc[np.arange(n), class_idx] = w
    total = wc.sum(axis=0)  # (k,)

    best = None
    for f in range(p):
        order = np.argsort(X[:, f], kind="stable")
        xs = X[order, f]
        splits = np.flatnonzero(xs[:-1] < xs[1:])
        if splits.size == 0:
            continue
        left = np.cumsum(wc[order], axis=0)[splits]  # (m, k)
        right = total - left
        li = np.argmax(left, axis=1)
        ri = np.argmax(right, axis=1)
        err = 1.0 - (left[np.arange(len(splits)), li] + right[np.arange(len(splits)), ri])
        j = int(np.argmin(err))
        if best is None or err[j] < best[0]:
            thr = 0.5 * (xs[splits[j]] + xs[splits[j] + 1])
            best = (float(err[j]), Stump(f, thr, classes[li[j]], classes[ri[j]]))
    if best is None:
        return None
    err, stump = best
    return stump, err, stump.predict(X)


def adaboost_train(X: np.ndarray, labels: np.ndarray, n_estimators: int = 100) -> AdaBoostModel:
    """SAMME boosting of decision stumps.

    Stops early when the best stump's weighted error reaches the multi-class
    chance margin 1 - 1/K (weak-learner failure) or hits zero (the sample
    weights would collapse).
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ValueError(f"inconsistent training data shapes {X.shape} vs {y.shape}")
    classes = tuple(sorted(set(y.tolist())))
    k = len(classes)
    if k < 2:
        raise ValueError("AdaBoost needs at least 2 classes in the training data")

    n = X.shape[0]
    w = np.full(n, 1.0 / n)
    stumps, alphas, errors = [], [], []
    for _ in range(n_estimators):
        found = _best_stump(X, y, w, classes)
        if found is None:
            log.warning("no splittable feature; stopping at %d stumps", len(stumps))
            break
        stump, err, pred = found
        if err >= 1.0 - 1.0 / k:
            log.debug("stump error %.4f at chance margin; stopping at %d stumps", err, len(stumps))
            break
        alpha = np.log((1.0 - err) / max(err, _EPS_ERR)) + np.log(k - 1.0)
        stumps.append(stump)
        alphas.append(float(alpha))
        errors.append(err)
        if err <= 0.0:
            break  # perfect stump; reweighting would zero out every sample
        w = w * np.exp(alpha * (pred != y))
        w = w / w.sum()
    return AdaBoostModel(stumps=tuple(stumps), alphas=tuple(alphas), classes=classes, stump_errors=tuple(errors))


def adaboost_votes(model: AdaBoostModel, X: np.ndarray) -> np.ndarray:
    """(n, K) matrix of alpha-weighted class votes."""
    X = np.asarray(X, dtype=np.float64)
    votes = np.zeros((X.shape[0], len(model.classes)))
    for stump, alpha in zip(model.stumps, model.alphas):
        pred = stump.predict(X)
        votes[np.arange(X.shape[0]), np.searchsorted(model.classes, pred)] += alpha
    return votes


def adaboost_predict(model: AdaBoostModel, x: np.ndarray) -> int:
    """Predicted class for one vector; vote ties go to the lower class id."""
    votes = adaboost_votes(model, np.asarray(x)[None])[0]
    return int(model.classes[int(np.argmax(votes))])


def adaboost_predict_many(model: AdaBoostModel, X: np.ndarray) -> np.ndarray:
    votes = adaboost_votes(model, X)
    return np.asarray(model.classes)[np.argmax(votes, axis=1)]


def _dist(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.sqrt(((a - b) ** 2).sum()))


def nearest_neighbor(pool: np.ndarray, x: np.ndarray) -> tuple[int, float]:
    """Exact Euclidean 1-NN in a (m, p) pool; ties to the lower member index."""
    pool = np.asarray(pool, dtype=np.float64)
    if pool.ndim != 2 or pool.shape[0] == 0:
        raise ValueError("pool must be a nonempty (m, p) matrix")
    d = np.sqrt(((pool - np.asarray(x, dtype=np.float64)) ** 2).sum(axis=1))
    i = int(np.argmin(d))
    return i, float(d[i])


def _min_pairwise(pool: np.ndarray, block: int = 512) -> float:
    """Minimum pairwise Euclidean distance; +inf for a singleton pool."""
    m = pool.shape[0]
    if m < 2:
        return float("inf")
    best = float("inf")
    for start in range(0, m, block):
        chunk = pool[start : start + block]
        d2 = ((chunk[:, None, :] - pool[None, :, :]) ** 2).sum(axis=2)
        rows = np.arange(chunk.shape[0])
        d2[rows, start + rows] = np.inf  # self distances
        best = min(best, float(np.sqrt(d2.min())))
    return best


@dataclass
class NnSsState:
    """Per-class member pools plus each pool's minimum intra-class distance."""

    pools: dict[int, np.ndarray]
    deltas: dict[int, float]
    growth: dict[int, int] = field(default_factory=dict)


def ss_init(X: np.ndarray, labels: np.ndarray) -> NnSsState:
    """Group flattened source windows into the four class pools.

    Every class 1..4 must appear; delta_c is the minimum pairwise distance
    within pool c (infinite for singleton pools).
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    missing = [c for c in (1, 2, 3, 4) if not np.any(y == c)]
    if missing:
        raise ValueError(f"source data lacks classes {missing}; all four are required")
    pools = {c: X[y == c].copy() for c in (1, 2, 3, 4)}
    deltas = {c: _min_pairwise(pools[c]) for c in (1, 2, 3, 4)}
    return NnSsState(pools=pools, deltas=deltas, growth={c: 0 for c in (1, 2, 3, 4)})


def ss_classify_stream(state: NnSsState, X_test: np.ndarray) -> list[int]:
    """Classify test vectors in order, growing pools along the way.

    Each vector goes to the class whose nearest pool member is globally
    closest (ties to the lower class id).  When that distance is below the
    winning class's delta, the vector joins the pool and delta shrinks by the
    incremental minimum over distances to the new member.  Mutates ``state``.
    """
    X_test = np.asarray(X_test, dtype=np.float64)
    preds: list[int] = []
    for x in X_test:
        best_c, best_d = None, None
        for c in (1, 2, 3, 4):
            _, d = nearest_neighbor(state.pools[c], x)
            if best_d is None or d < best_d:
                best_c, best_d = c, d
        preds.append(best_c)
        if best_d < state.deltas[best_c]:
            pool = state.pools[best_c]
            new_min = float(np.sqrt(((pool - x) ** 2).sum(axis=1).min()))
            state.pools[best_c] = np.vstack([pool, x])
            state.deltas[best_c] = min(state.deltas[best_c], new_min)
            state.growth[best_c] = state.growth.get(best_c, 0) + 1
    return preds
