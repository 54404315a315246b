"""The hierarchical few-shot adaptation pipeline.

Stages, in optimization order: cluster the source windows with a GMM; train
one LSTM expert per cluster on that cluster's windows alone; route each
labeled target shot to the expert giving its true label the most probability
(falling back to the cluster whose label histogram favors that label when no
expert predicts it correctly); train a softmax-regression gate from shot
features to the routed cluster ids; retrain a fresh expert per cluster on its
source windows plus its assigned shots.  Inference gates an unseen window to
a cluster and answers with that cluster's retrained expert.

A model-selection protocol wraps the whole fit: ten seeded runs scored on the
shots themselves, then five evaluation refits reporting mean test accuracy.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .gmm import GmmParams, gmm_assign, gmm_fit
from .ingest import StandardizationStats, WindowSample, flatten_windows, stack_windows
from .nets.common import TrainConfig
from .nets.lstm import LstmParams, lstm_loss, lstm_predict, lstm_predict_proba, lstm_train
from .nets.softmax_regression import (
    SoftmaxRegressionParams,
    softmax_loss,
    softmax_predict_proba,
    softmax_train,
)

log = logging.getLogger(__name__)

_STAGE_IDS = {"gmm": 0, "expert": 1, "adapt": 2, "gate": 3}

_CONSTANT_GATE_LOGIT = -1e3


def stage_seed(base_seed: int, stage: str, index: int = 0) -> int:
    """Deterministic per-stage RNG seed derived from the run seed."""
    ss = np.random.SeedSequence((int(base_seed), _STAGE_IDS[stage], int(index)))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


@dataclass(frozen=True)
class ClusterExpert:
    cluster_id: int
    expert_before: LstmParams  # trained on this cluster's source windows alone
    expert_after: LstmParams | None  # fresh net retrained with the assigned shots
    source_label_histogram: np.ndarray  # counts of labels 1..4, shape (4,)

    def to_json_dict(self) -> dict:
        return {
            "cluster_id": self.cluster_id,
            "expert_before": self.expert_before.to_json_dict(),
            "expert_after": None if self.expert_after is None else self.expert_after.to_json_dict(),
            "source_label_histogram": [int(v) for v in self.source_label_histogram],
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "ClusterExpert":
        return cls(
            cluster_id=int(obj["cluster_id"]),
            expert_before=LstmParams.from_json_dict(obj["expert_before"]),
            expert_after=None if obj["expert_after"] is None else LstmParams.from_json_dict(obj["expert_after"]),
            source_label_histogram=np.asarray(obj["source_label_histogram"], dtype=np.int64),
        )


@dataclass(frozen=True)
class GateModel:
    params: SoftmaxRegressionParams
    n_clusters: int

    def predict_proba(self, flats: np.ndarray) -> np.ndarray:
        return softmax_predict_proba(self.params, flats)

    def to_json_dict(self) -> dict:
        return {"n_clusters": self.n_clusters, "params": self.params.to_json_dict()}

    @classmethod
    def from_json_dict(cls, obj: dict) -> "GateModel":
        return cls(params=SoftmaxRegressionParams.from_json_dict(obj["params"]), n_clusters=int(obj["n_clusters"]))


@dataclass(frozen=True)
class HierarchicalModel:
    gmm: GmmParams
    experts: tuple[ClusterExpert, ...]
    gate: GateModel
    stats: StandardizationStats
    shot_assignments: tuple[int, ...]  # cluster id per shot, in shot order
    fit_seed: int | None = None

    def __post_init__(self):
        if len(self.experts) != self.gmm.k:
            raise ValueError(f"{len(self.experts)} experts for a {self.gmm.k}-component mixture")

    def to_json_dict(self) -> dict:
        return {
            "gmm": self.gmm.to_json_dict(),
            "experts": [e.to_json_dict() for e in self.experts],
            "gate": self.gate.to_json_dict(),
            "stats": self.stats.to_json_dict(),
            "shot_assignments": [int(a) for a in self.shot_assignments],
            "fit_seed": self.fit_seed,
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "HierarchicalModel":
        return cls(
            gmm=GmmParams.from_json_dict(obj["gmm"]),
            experts=tuple(ClusterExpert.from_json_dict(e) for e in obj["experts"]),
            gate=GateModel.from_json_dict(obj["gate"]),
            stats=StandardizationStats.from_json_dict(obj["stats"]),
            shot_assignments=tuple(int(a) for a in obj["shot_assignments"]),
            fit_seed=obj.get("fit_seed"),
        )


@dataclass(frozen=True)
class SelectionReport:
    shot_accuracies: tuple[float, ...]  # one per selection run
    selected_run: int
    eval_accuracies: tuple[float, ...]  # one per evaluation refit (mean over target files)
    mean_test_accuracy: float
    eval_file_accuracies: tuple[tuple[float, ...], ...]  # (evals, files) detail

    def __post_init__(self):
        if self.shot_accuracies and self.selected_run != int(np.argmax(self.shot_accuracies)):
            raise ValueError("selected run must be the shot-accuracy argmax (earliest tie)")

    def to_json_dict(self) -> dict:
        return {
            "shot_accuracies": list(self.shot_accuracies),
            "selected_run": self.selected_run,
            "eval_accuracies": list(self.eval_accuracies),
            "mean_test_accuracy": self.mean_test_accuracy,
            "eval_file_accuracies": [list(row) for row in self.eval_file_accuracies],
        }


def _histogram(labels: np.ndarray) -> np.ndarray:
    return np.bincount(labels, minlength=5)[1:5]


def _train_cluster_experts(
    windows: Sequence[WindowSample], assignment: np.ndarray, k: int, config: TrainConfig
) -> list[ClusterExpert]:
    experts = []
    for c in range(k):
        idx = np.flatnonzero(assignment == c)
        if idx.size == 0:
            raise ValueError(f"cluster {c} received no source windows; retry with a different seed")
        X, y = stack_windows([windows[i] for i in idx])
        cfg = replace(config, seed=stage_seed(config.seed, "expert", c))
        params = lstm_train(X, y, cfg)
        experts.append(
            ClusterExpert(cluster_id=c, expert_before=params, expert_after=None, source_label_histogram=_histogram(y))
        )
    return experts


def fit_source(source_windows: Sequence[WindowSample], k: int = 2, config: TrainConfig = TrainConfig()):
    """Cluster the source and train the per-cluster experts (pre-adaptation).

    Returns (GmmParams, experts); each expert carries its cluster's label
    histogram for the routing fallback.
    """
    flats = flatten_windows(source_windows)
    if flats.shape[0] < k:
        raise ValueError(f"need at least k={k} source windows, got {flats.shape[0]}")
    params = gmm_fit(flats, k=k, seed=stage_seed(config.seed, "gmm"))
    assignment = gmm_assign(params, flats)
    return params, _train_cluster_experts(source_windows, assignment, k, config)


def route_few_shot(experts: Sequence[ClusterExpert], shots: Sequence[WindowSample]) -> tuple[int, ...]:
    """Assign each labeled shot to a cluster.

    Primary rule: the expert giving the shot's true label the highest
    probability, provided at least one expert actually predicts that label.
    Fallback: the cluster whose source label histogram counts that label most
    often.  All ties go to the lower cluster id.
    """
    X, y = stack_windows(shots)
    y_idx = y - 1
    probs = np.stack([lstm_predict_proba(e.expert_before, X) for e in experts])  # (k, n, C)
    p_true = probs[:, np.arange(len(shots)), y_idx]  # (k, n)
    predicts_true = probs.argmax(axis=2) == y_idx[None, :]  # (k, n)
    hist = np.stack([e.source_label_histogram for e in experts])  # (k, 4)

    assignments = []
    for j in range(len(shots)):
        if predicts_true[:, j].any():
            assignments.append(int(np.argmax(p_true[:, j])))
        else:
            assignments.append(int(np.argmax(hist[:, y_idx[j]])))
    return tuple(assignments)


def adapt_experts(
    experts: Sequence[ClusterExpert],
    source_windows_by_cluster: Sequence[Sequence[WindowSample]],
    shots: Sequence[WindowSample],
    assignments: Sequence[int],
    config: TrainConfig,
) -> list[ClusterExpert]:
    """Retrain a fresh expert per cluster on its source windows plus assigned shots.

    The pre-adaptation experts are kept untouched on the returned objects; a
    cluster with no assigned shots simply retrains on its source windows.
    """
    if len(assignments) != len(shots):
        raise ValueError("assignments must cover all shots")
    out = []
    for e in experts:
        train = list(source_windows_by_cluster[e.cluster_id])
        train += [s for s, a in zip(shots, assignments) if a == e.cluster_id]
        X, y = stack_windows(train)
        cfg = replace(config, seed=stage_seed(config.seed, "adapt", e.cluster_id))
        out.append(replace(e, expert_after=lstm_train(X, y, cfg)))
    return out


def fit_gate(
    shots: Sequence[WindowSample],
    assignments: Sequence[int],
    n_clusters: int,
    l2: float = 1e-4,
    max_iter: int = 500,
    tol: float = 1e-6,
) -> GateModel:
    """Train the shot-features -> cluster-id router.

    When every shot lands in one cluster the gate degenerates to a constant
    classifier for that cluster.
    """
    if not shots:
        raise ValueError("cannot fit a gate without shots")
    flats = flatten_windows(shots)
    y = np.asarray(assignments, dtype=np.int64)
    distinct = set(y.tolist())
    if len(distinct) == 1:
        c = distinct.pop()
        bias = np.full(n_clusters, _CONSTANT_GATE_LOGIT)
        bias[c] = 0.0
        params = SoftmaxRegressionParams(weights=np.zeros((n_clusters, flats.shape[1])), bias=bias)
        return GateModel(params=params, n_clusters=n_clusters)
    return GateModel(params=softmax_train(flats, y, n_clusters, l2=l2, max_iter=max_iter, tol=tol), n_clusters=n_clusters)


def fit(
    source_windows: Sequence[WindowSample],
    shots: Sequence[WindowSample],
    k: int = 2,
    config: TrainConfig = TrainConfig(),
    stats: StandardizationStats | None = None,
    gate_l2: float = 1e-4,
) -> HierarchicalModel:
    """Run all stages once and assemble the full model."""
    flats = flatten_windows(source_windows)
    if flats.shape[0] < k:
        raise ValueError(f"need at least k={k} source windows, got {flats.shape[0]}")
    gmm_params = gmm_fit(flats, k=k, seed=stage_seed(config.seed, "gmm"))
    assignment = gmm_assign(gmm_params, flats)
    experts = _train_cluster_experts(source_windows, assignment, k, config)
    shot_assignments = route_few_shot(experts, shots)
    gate = fit_gate(shots, shot_assignments, k, l2=gate_l2)
    by_cluster = [[w for w, a in zip(source_windows, assignment) if a == c] for c in range(k)]
    experts = adapt_experts(experts, by_cluster, shots, shot_assignments, config)
    if stats is None:
        stats = StandardizationStats.identity(source_windows[0].x.shape[1])
    return HierarchicalModel(
        gmm=gmm_params,
        experts=tuple(experts),
        gate=gate,
        stats=stats,
        shot_assignments=shot_assignments,
        fit_seed=config.seed,
    )


def predict(model: HierarchicalModel, window) -> int:
    """Gate the window to a cluster, answer with that cluster's adapted expert."""
    x = window.x if isinstance(window, WindowSample) else np.asarray(window, dtype=np.float64)
    return int(predict_batch(model, x[None])[0])


def predict_batch(model: HierarchicalModel, windows) -> np.ndarray:
    """Vectorized ``predict`` over (n, 2, d) windows or a WindowSample list."""
    if isinstance(windows, np.ndarray):
        X = windows.astype(np.float64, copy=False)
    else:
        X, _ = stack_windows(windows)
    flats = X.reshape(X.shape[0], -1)
    clusters = np.argmax(model.gate.predict_proba(flats), axis=1)
    out = np.empty(X.shape[0], dtype=np.int64)
    for c in np.unique(clusters):
        idx = np.flatnonzero(clusters == c)
        expert = model.experts[int(c)].expert_after
        if expert is None:
            raise ValueError(f"cluster {c} expert has not been adapted")
        out[idx] = lstm_predict(expert, X[idx])
    return out


def fit_selected(
    source_windows: Sequence[WindowSample],
    shots: Sequence[WindowSample],
    test_pools: Sequence[Sequence[WindowSample]],
    k: int = 2,
    runs: int = 10,
    evals: int = 5,
    config: TrainConfig = TrainConfig(),
    stats: StandardizationStats | None = None,
    gate_l2: float = 1e-4,
    eval_mode: str = "refit",
) -> tuple[HierarchicalModel, SelectionReport]:
    """The full selection protocol around ``fit``.

    Fits ``runs`` times with seeds config.seed + 0..runs-1, scores each run by
    its accuracy on the shots themselves (through its own gate and adapted
    experts), and keeps the argmax run.  Then reports test accuracy from
    ``evals`` further fits with fresh seeds ("refit" mode, the default) or
    from re-evaluating the selected model ("repredict" mode, where a
    deterministic model yields identical entries).  Test labels are touched
    only by the accuracy bookkeeping, never by any fit.
    """
    if eval_mode not in ("refit", "repredict"):
        raise ValueError(f"unknown eval_mode {eval_mode!r}")
    if runs < 1 or evals < 1:
        raise ValueError("need at least one selection run and one evaluation")
    shot_X, shot_y = stack_windows(shots)
    pools = [stack_windows(p) for p in test_pools if len(p) > 0]
    if len(pools) != len(test_pools):
        log.warning("ignoring %d empty test pool(s)", len(test_pools) - len(pools))

    best_model = None
    shot_accs: list[float] = []
    for r in range(runs):
        m = fit(source_windows, shots, k, replace(config, seed=config.seed + r), stats, gate_l2)
        acc = float(np.mean(predict_batch(m, shot_X) == shot_y))
        shot_accs.append(acc)
        if best_model is None or acc > max(shot_accs[:-1], default=-1.0):
            best_model = m

    eval_accs: list[float] = []
    eval_file_accs: list[tuple[float, ...]] = []
    for j in range(evals):
        if eval_mode == "refit":
            m = fit(source_windows, shots, k, replace(config, seed=config.seed + runs + j), stats, gate_l2)
        else:
            m = best_model
        file_accs = tuple(float(np.mean(predict_batch(m, X) == y)) for X, y in pools)
        eval_file_accs.append(file_accs)
        eval_accs.append(float(np.mean(file_accs)) if file_accs else float("nan"))

    report = SelectionReport(
        shot_accuracies=tuple(shot_accs),
        selected_run=int(np.argmax(shot_accs)),
        eval_accuracies=tuple(eval_accs),
        mean_test_accuracy=float(np.mean(eval_accs)) if eval_accs else float("nan"),
        eval_file_accuracies=tuple(eval_file_accs),
    )
    return best_model, report


@dataclass(frozen=True)
class ObjectiveValues:
    """The three staged training objectives, evaluated on fitted parameters."""

    source_expert_loss: float  # mean CE of pre-adaptation experts on their own clusters
    gate_loss: float  # mean CE of the gate on the routed shots
    adapted_expert_loss: float  # mean CE of adapted experts on source + shots

    @property
    def staged(self) -> tuple[float, float, float]:
        """The composite objective: the three values in stage order."""
        return (self.source_expert_loss, self.gate_loss, self.adapted_expert_loss)


def evaluate_objective(
    model: HierarchicalModel, source_windows: Sequence[WindowSample], shots: Sequence[WindowSample]
) -> ObjectiveValues:
    flats = flatten_windows(source_windows)
    assignment = gmm_assign(model.gmm, flats)
    X, y = stack_windows(source_windows)

    total_before = 0.0
    total_after = 0.0
    n_after = 0
    shot_X, shot_y = (stack_windows(shots) if shots else (None, None))
    shot_assign = np.asarray(model.shot_assignments, dtype=np.int64)
    for e in model.experts:
        idx = np.flatnonzero(assignment == e.cluster_id)
        if idx.size:
            total_before += lstm_loss(e.expert_before, X[idx], y[idx]) * idx.size
        # adapted experts are scored on the same augmented set they trained on
        Xa = [X[idx]] if idx.size else []
        ya = [y[idx]] if idx.size else []
        if shots:
            sel = np.flatnonzero(shot_assign == e.cluster_id)
            if sel.size:
                Xa.append(shot_X[sel])
                ya.append(shot_y[sel])
        if Xa:
            Xc = np.concatenate(Xa)
            yc = np.concatenate(ya)
            total_after += lstm_loss(e.expert_after, Xc, yc) * len(yc)
            n_after += len(yc)

    e1 = total_before / len(source_windows)
    e2 = softmax_loss(model.gate.params, flatten_windows(shots), shot_assign, l2=0.0) if shots else 0.0
    e3 = total_after / n_after
    return ObjectiveValues(source_expert_loss=e1, gate_loss=float(e2), adapted_expert_loss=e3)


def model_to_json_bytes(model: HierarchicalModel) -> bytes:
    return json.dumps(model.to_json_dict(), sort_keys=True).encode("utf-8")


def model_digest(model: HierarchicalModel) -> str:
    return hashlib.sha256(model_to_json_bytes(model)).hexdigest()


def save_model(model: HierarchicalModel, path) -> None:
    with open(path, "wb") as fh:
        fh.write(model_to_json_bytes(model))


def load_model(path) -> HierarchicalModel:
    with open(path, "r", encoding="utf-8") as fh:
        return HierarchicalModel.from_json_dict(json.load(fh))
