"""Experiment harness: configs, the seeded two-domain synthetic generator,
accuracy metrics, and matrix-style reporting.

An experiment is one (source, target) dataset pair and one method.  The
target contributes 4 labeled windows per class to training; everything else
is the held-out test pool, scored per target file and averaged unweighted.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import baselines, pipeline
from .ingest import (
    DEFAULT_DROP,
    SensorFrame,
    SequenceDataset,
    StandardizationStats,
    WindowSample,
    apply_standardizer,
    fit_standardizer,
    flatten_windows,
    harmonize,
    load_dataset,
    make_windows,
    sample_few_shot,
    stack_windows,
)
from .nets.common import TrainConfig
from .nets.lstm import lstm_predict, lstm_train
from .nets.mlp import mlp_predict_labels, mlp_train
from .nets.softmax_regression import softmax_predict_proba, softmax_train

log = logging.getLogger(__name__)

METHODS = ("ours", "lr", "adaboost", "ss", "dnn", "lstm")

_METHOD_DISPLAY = {"lr": "LR", "adaboost": "AB", "ss": "SS", "dnn": "DNN", "lstm": "LSTM", "ours": "Ours"}
_REPORT_ORDER = ("lr", "adaboost", "ss", "dnn", "lstm", "ours")


def accuracy(predictions, labels) -> float:
    """Fraction of exact matches."""
    p = np.asarray(predictions)
    y = np.asarray(labels)
    if p.shape != y.shape:
        raise ValueError(f"length mismatch: {p.shape} vs {y.shape}")
    if p.size == 0:
        raise ValueError("empty prediction list")
    return float(np.mean(p == y))


def macro_accuracy(predictions, labels) -> float:
    """Mean per-class recall over the classes present in ``labels``."""
    p = np.asarray(predictions)
    y = np.asarray(labels)
    if p.shape != y.shape or p.size == 0:
        raise ValueError("predictions and labels must be nonempty and equal-length")
    recalls = [float(np.mean(p[y == c] == c)) for c in sorted(set(y.tolist()))]
    return float(np.mean(recalls))


# ---------------------------------------------------------------------------
# Synthetic two-domain generator


@dataclass(frozen=True)
class SyntheticDomainSpec:
    """Seeded generator of a (source, target) pair with controllable shifts.

    Labels are drawn blockwise from each domain's priors (runs of
    ``block_length`` frames share a class, mimicking slow quality decay).
    Features come from per-class Gaussians.  Latent sub-groups displace the
    whole feature cloud by ``subgroup_separation`` along the unit vector
    ``subgroup_direction`` (default: the last feature axis) per sub-group,
    and may additionally remap which class uses which mean row
    (``subgroup_label_permutations``), creating genuinely different local
    feature-label relationships.  Target features are offset by ``shift``.
    """

    class_means: np.ndarray  # (4, d)
    class_scales: np.ndarray  # (4,)
    source_priors: np.ndarray  # (4,)
    target_priors: np.ndarray  # (4,)
    shift: np.ndarray  # (d,)
    source_length: int = 2000
    target_length: int = 2000
    source_subgroups: int = 1
    target_subgroups: int = 1
    subgroup_separation: float = 0.0
    subgroup_direction: np.ndarray | None = None
    subgroup_label_permutations: tuple[tuple[int, ...], ...] | None = None
    block_length: int = 10
    seed: int = 0

    def __post_init__(self):
        for name in ("source_priors", "target_priors"):
            pr = getattr(self, name)
            if pr.shape != (4,) or abs(float(pr.sum()) - 1.0) > 1e-9 or np.any(pr < 0):
                raise ValueError(f"{name} must be a 4-simplex")
        if self.class_means.shape[0] != 4 or self.class_scales.shape != (4,):
            raise ValueError("need per-class means (4, d) and scales (4,)")
        if np.any(self.class_scales <= 0):
            raise ValueError("class scales must be positive")
        if self.source_length < 2 or self.target_length < 2:
            raise ValueError("domain lengths must be >= 2")
        if self.block_length < 1:
            raise ValueError("block_length must be >= 1")
        if self.shift.shape != (self.class_means.shape[1],):
            raise ValueError("shift must match the feature dimension")
        if self.subgroup_direction is not None:
            if self.subgroup_direction.shape != (self.class_means.shape[1],):
                raise ValueError("subgroup_direction must match the feature dimension")
            norm = float(np.linalg.norm(self.subgroup_direction))
            if abs(norm - 1.0) > 1e-9:
                raise ValueError("subgroup_direction must be a unit vector")
        if self.subgroup_label_permutations is not None:
            for perm in self.subgroup_label_permutations:
                if sorted(perm) != [0, 1, 2, 3]:
                    raise ValueError(f"{perm} is not a permutation of 0..3")

    @property
    def n_features(self) -> int:
        return self.class_means.shape[1]

    @classmethod
    def create(
        cls,
        class_means,
        class_scales,
        source_priors,
        target_priors,
        shift=0.0,
        **kwargs,
    ) -> "SyntheticDomainSpec":
        """Array-coercing constructor; a scalar ``shift`` broadcasts over features."""
        class_means = np.asarray(class_means, dtype=np.float64)
        shift = np.asarray(shift, dtype=np.float64)
        if shift.ndim == 0:
            shift = np.full(class_means.shape[1], float(shift))
        perms = kwargs.pop("subgroup_label_permutations", None)
        if perms is not None:
            perms = tuple(tuple(int(i) for i in p) for p in perms)
        direction = kwargs.pop("subgroup_direction", None)
        if direction is not None:
            direction = np.asarray(direction, dtype=np.float64)
            direction = direction / np.linalg.norm(direction)
        return cls(
            subgroup_direction=direction,
            class_means=class_means,
            class_scales=np.asarray(class_scales, dtype=np.float64),
            source_priors=np.asarray(source_priors, dtype=np.float64),
            target_priors=np.asarray(target_priors, dtype=np.float64),
            shift=shift,
            subgroup_label_permutations=perms,
            **kwargs,
        )

    def to_json_dict(self) -> dict:
        return {
            "class_means": self.class_means.tolist(),
            "class_scales": self.class_scales.tolist(),
            "source_priors": self.source_priors.tolist(),
            "target_priors": self.target_priors.tolist(),
            "shift": self.shift.tolist(),
            "source_length": self.source_length,
            "target_length": self.target_length,
            "source_subgroups": self.source_subgroups,
            "target_subgroups": self.target_subgroups,
            "subgroup_separation": self.subgroup_separation,
            "subgroup_direction": None if self.subgroup_direction is None else self.subgroup_direction.tolist(),
            "subgroup_label_permutations": (
                None
                if self.subgroup_label_permutations is None
                else [list(p) for p in self.subgroup_label_permutations]
            ),
            "block_length": self.block_length,
            "seed": self.seed,
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "SyntheticDomainSpec":
        kwargs = dict(obj)
        return cls.create(
            class_means=kwargs.pop("class_means"),
            class_scales=kwargs.pop("class_scales"),
            source_priors=kwargs.pop("source_priors"),
            target_priors=kwargs.pop("target_priors"),
            shift=kwargs.pop("shift", 0.0),
            **kwargs,
        )


def _generate_domain(spec: SyntheticDomainSpec, name: str, priors, length, subgroups, shifted, rng):
    d = spec.n_features
    shift = spec.shift if shifted else np.zeros(d)
    frames = []
    sub_ids = np.empty(length, dtype=np.int64)
    t = 0
    while t < length:
        c = int(rng.choice(4, p=priors))
        g = int(rng.integers(subgroups)) if subgroups > 1 else 0
        row = c
        if spec.subgroup_label_permutations is not None:
            row = spec.subgroup_label_permutations[g][c]
        mu = spec.class_means[row] + shift
        if spec.subgroup_direction is None:
            mu[-1] += g * spec.subgroup_separation
        else:
            mu = mu + g * spec.subgroup_separation * spec.subgroup_direction
        n_block = min(spec.block_length, length - t)
        F = rng.normal(mu, spec.class_scales[c], size=(n_block, d))
        for i in range(n_block):
            frames.append(SensorFrame(t=t + i, features=F[i], label=c + 1))
            sub_ids[t + i] = g
        t += n_block
    names = tuple(f"g{i}" for i in range(d))
    return SequenceDataset(name=name, frames=tuple(frames), feature_names=names), sub_ids


def synthesize_domains(spec: SyntheticDomainSpec, return_latents: bool = False):
    """Draw the (source, target) pair; optionally also the latent sub-group ids."""
    src_rng = np.random.default_rng(np.random.SeedSequence((spec.seed, 0)))
    tgt_rng = np.random.default_rng(np.random.SeedSequence((spec.seed, 1)))
    source, src_sub = _generate_domain(
        spec, "source", spec.source_priors, spec.source_length, spec.source_subgroups, False, src_rng
    )
    target, tgt_sub = _generate_domain(
        spec, "target", spec.target_priors, spec.target_length, spec.target_subgroups, True, tgt_rng
    )
    if return_latents:
        return source, target, src_sub, tgt_sub
    return source, target


def write_dataset_csv(ds: SequenceDataset, path, label_column: str = "label") -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(ds.feature_names) + [label_column])
        for fr in ds.frames:
            writer.writerow([repr(float(v)) for v in fr.features] + [fr.label])


# ---------------------------------------------------------------------------
# Experiment runner


@dataclass(frozen=True)
class ExperimentConfig:
    source: tuple[str, ...]  # files or directories of CSVs
    target: tuple[str, ...]
    method: str
    name: str | None = None
    k: int = 2
    per_class: int = 4
    runs: int = 10
    evals: int = 5
    seed: int = 0
    output: str | None = None
    standardize: bool = True
    label_column: str = "label"
    drop_columns: tuple[str, ...] = DEFAULT_DROP
    epochs: int = 100
    dropout: float = 0.2
    learning_rate: float = 1e-3
    batch_size: int = 32
    l2: float = 1e-4
    n_estimators: int = 100
    eval_mode: str = "refit"

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; supported: {METHODS}")

    def train_config(self, seed: int | None = None) -> TrainConfig:
        return TrainConfig(
            epochs=self.epochs,
            dropout=self.dropout,
            learning_rate=self.learning_rate,
            batch_size=self.batch_size,
            seed=self.seed if seed is None else seed,
        )

    def to_json_dict(self) -> dict:
        return {
            "source": list(self.source),
            "target": list(self.target),
            "method": self.method,
            "name": self.name,
            "k": self.k,
            "per_class": self.per_class,
            "runs": self.runs,
            "evals": self.evals,
            "seed": self.seed,
            "output": self.output,
            "standardize": self.standardize,
            "label_column": self.label_column,
            "drop_columns": list(self.drop_columns),
            "epochs": self.epochs,
            "dropout": self.dropout,
            "learning_rate": self.learning_rate,
            "batch_size": self.batch_size,
            "l2": self.l2,
            "n_estimators": self.n_estimators,
            "eval_mode": self.eval_mode,
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "ExperimentConfig":
        obj = dict(obj)
        for key in ("source", "target"):
            val = obj[key]
            obj[key] = (val,) if isinstance(val, str) else tuple(val)
        if "drop_columns" in obj:
            obj["drop_columns"] = tuple(obj["drop_columns"])
        return cls(**obj)


@dataclass(frozen=True)
class ExperimentResult:
    pair: str
    method: str
    file_names: tuple[str, ...]
    file_accuracies: tuple[float, ...]
    pair_accuracy: float
    file_macro_accuracies: tuple[float, ...]
    pair_macro_accuracy: float
    elapsed_seconds: float
    model_digest: str
    config: dict
    selection: dict | None = None

    def __post_init__(self):
        for a in self.file_accuracies + (self.pair_accuracy,):
            if not (0.0 <= a <= 1.0):
                raise ValueError(f"accuracy {a} outside [0, 1]")

    def to_json_dict(self) -> dict:
        return {
            "pair": self.pair,
            "method": self.method,
            "file_names": list(self.file_names),
            "file_accuracies": list(self.file_accuracies),
            "pair_accuracy": self.pair_accuracy,
            "file_macro_accuracies": list(self.file_macro_accuracies),
            "pair_macro_accuracy": self.pair_macro_accuracy,
            "elapsed_seconds": self.elapsed_seconds,
            "model_digest": self.model_digest,
            "config": self.config,
            "selection": self.selection,
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "ExperimentResult":
        return cls(
            pair=obj["pair"],
            method=obj["method"],
            file_names=tuple(obj["file_names"]),
            file_accuracies=tuple(obj["file_accuracies"]),
            pair_accuracy=obj["pair_accuracy"],
            file_macro_accuracies=tuple(obj["file_macro_accuracies"]),
            pair_macro_accuracy=obj["pair_macro_accuracy"],
            elapsed_seconds=obj["elapsed_seconds"],
            model_digest=obj["model_digest"],
            config=obj["config"],
            selection=obj.get("selection"),
        )


def _load_domain(paths: Sequence[str], config: ExperimentConfig) -> list[SequenceDataset]:
    datasets: list[SequenceDataset] = []
    for path in paths:
        datasets.extend(load_dataset(path, config.label_column))
    return [harmonize(ds, config.drop_columns) for ds in datasets]


def _digest(obj: dict) -> str:
    return hashlib.sha256(json.dumps(obj, sort_keys=True).encode("utf-8")).hexdigest()


def _pool_file_index(test_indices: Sequence[int], file_sizes: Sequence[int]) -> list[int]:
    bounds = np.cumsum(file_sizes)
    return [int(np.searchsorted(bounds, i, side="right")) for i in test_indices]


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    """Ingest both domains, fit the configured method, score each target file.

    Baselines lr/adaboost/dnn/lstm train on source windows plus the few
    labeled target shots; ss trains on the source alone and grows during the
    per-file test stream; ours runs the full selection protocol.  Test-pool
    labels are consumed exclusively by accuracy bookkeeping.
    """
    t0 = time.perf_counter()
    source_sets = _load_domain(config.source, config)
    target_sets = _load_domain(config.target, config)

    d = len(source_sets[0].feature_names)
    stats = fit_standardizer(source_sets) if config.standardize else StandardizationStats.identity(d)
    source_sets = [apply_standardizer(ds, stats) for ds in source_sets]
    target_sets = [apply_standardizer(ds, stats) for ds in target_sets]

    source_windows: list[WindowSample] = []
    for ds in source_sets:
        source_windows.extend(make_windows(ds))

    target_window_lists = [make_windows(ds) for ds in target_sets]
    union: list[WindowSample] = [w for lst in target_window_lists for w in lst]
    split = sample_few_shot(union, per_class=config.per_class, seed=config.seed)

    file_sizes = [len(lst) for lst in target_window_lists]
    owners = _pool_file_index(split.test_indices, file_sizes)
    test_pools: list[list[WindowSample]] = [[] for _ in target_sets]
    for w, owner in zip(split.test_pool, owners):
        test_pools[owner].append(w)

    model_bytes, file_accs, file_macros, selection = _run_method(
        config, source_windows, list(split.shots), test_pools, stats
    )

    file_names = tuple(ds.name for ds in target_sets)
    pair = config.name or f"{'+'.join(Path(p).stem for p in config.source)}-{'+'.join(Path(p).stem for p in config.target)}"
    result = ExperimentResult(
        pair=pair,
        method=config.method,
        file_names=file_names,
        file_accuracies=tuple(file_accs),
        pair_accuracy=float(np.mean(file_accs)),
        file_macro_accuracies=tuple(file_macros),
        pair_macro_accuracy=float(np.mean(file_macros)),
        elapsed_seconds=time.perf_counter() - t0,
        model_digest=hashlib.sha256(model_bytes).hexdigest(),
        config=config.to_json_dict(),
        selection=selection,
    )
    if config.output:
        Path(config.output).parent.mkdir(parents=True, exist_ok=True)
        with open(config.output, "w", encoding="utf-8") as fh:
            json.dump(result.to_json_dict(), fh, indent=2)
    return result


def _run_method(config, source_windows, shots, test_pools, stats):
    """Returns (model_bytes, per-file accuracies, per-file macro accuracies, selection dict)."""
    method = config.method
    pools_Xy = [stack_windows(p) for p in test_pools]

    if method == "ours":
        model, report = pipeline.fit_selected(
            source_windows,
            shots,
            test_pools,
            k=config.k,
            runs=config.runs,
            evals=config.evals,
            config=config.train_config(),
            stats=stats,
            gate_l2=config.l2,
            eval_mode=config.eval_mode,
        )
        per_file = np.asarray(report.eval_file_accuracies)  # (evals, files)
        file_accs = [float(a) for a in per_file.mean(axis=0)]
        # macro accuracy is a selected-model diagnostic, not part of the protocol
        file_macros = [macro_accuracy(pipeline.predict_batch(model, X), y) for X, y in pools_Xy]
        return pipeline.model_to_json_bytes(model), file_accs, file_macros, report.to_json_dict()

    if method == "ss":
        src_X = flatten_windows(source_windows)
        _, src_y = stack_windows(source_windows)
        state = baselines.ss_init(src_X, src_y)
        model_bytes = json.dumps(
            {
                "pools": {str(c): state.pools[c].tolist() for c in state.pools},
                "deltas": {str(c): state.deltas[c] for c in state.deltas},
            },
            sort_keys=True,
        ).encode("utf-8")
        file_accs, file_macros = [], []
        for pool in test_pools:
            fresh = baselines.NnSsState(
                pools={c: state.pools[c].copy() for c in state.pools},
                deltas=dict(state.deltas),
                growth=dict(state.growth),
            )
            X, y = stack_windows(pool)
            preds = baselines.ss_classify_stream(fresh, X.reshape(X.shape[0], -1))
            file_accs.append(accuracy(preds, y))
            file_macros.append(macro_accuracy(preds, y))
        return model_bytes, file_accs, file_macros, None

    # remaining baselines train on source plus the labeled shots
    train_windows = list(source_windows) + list(shots)
    X, y = stack_windows(train_windows)
    flats = X.reshape(X.shape[0], -1)

    if method == "lstm":
        params = lstm_train(X, y, config.train_config())
        predict = lambda Xf: lstm_predict(params, Xf)
        model_bytes = json.dumps(params.to_json_dict(), sort_keys=True).encode("utf-8")
    elif method == "dnn":
        params = mlp_train(flats, y, config.train_config())
        predict = lambda Xf: mlp_predict_labels(params, Xf.reshape(Xf.shape[0], -1))
        model_bytes = json.dumps(params.to_json_dict(), sort_keys=True).encode("utf-8")
    elif method == "lr":
        params = softmax_train(flats, y - 1, 4, l2=config.l2)
        predict = lambda Xf: np.argmax(softmax_predict_proba(params, Xf.reshape(Xf.shape[0], -1)), axis=1) + 1
        model_bytes = json.dumps(params.to_json_dict(), sort_keys=True).encode("utf-8")
    elif method == "adaboost":
        model = baselines.adaboost_train(flats, y, n_estimators=config.n_estimators)
        predict = lambda Xf: baselines.adaboost_predict_many(model, Xf.reshape(Xf.shape[0], -1))
        model_bytes = json.dumps(model.to_json_dict(), sort_keys=True).encode("utf-8")
    else:  # pragma: no cover - guarded by ExperimentConfig
        raise ValueError(f"unknown method {method!r}")

    file_accs, file_macros = [], []
    for Xf, yf in pools_Xy:
        preds = predict(Xf)
        file_accs.append(accuracy(preds, yf))
        file_macros.append(macro_accuracy(preds, yf))
    return model_bytes, file_accs, file_macros, None


# ---------------------------------------------------------------------------
# Reporting


def emit_report(results: Sequence[ExperimentResult], out_base) -> tuple[Path, Path]:
    """Write all results as JSON plus a pairs-by-methods accuracy matrix.

    The matrix has one row per source-target pair, one column per method
    (accuracies in percent), and a closing Avg row of unweighted column
    means.
    """
    if not results:
        raise ValueError("no results to report")
    out_base = Path(out_base)
    out_base.parent.mkdir(parents=True, exist_ok=True)
    json_path = out_base.with_suffix(".json")
    table_path = out_base.with_suffix(".md")

    with open(json_path, "w", encoding="utf-8") as fh:
        json.dump({"results": [r.to_json_dict() for r in results]}, fh, indent=2)

    pairs: list[str] = []
    cells: dict[tuple[str, str], float] = {}
    methods_present: list[str] = []
    for r in results:
        if r.pair not in pairs:
            pairs.append(r.pair)
        if r.method not in methods_present:
            methods_present.append(r.method)
        cells[(r.pair, r.method)] = r.pair_accuracy
    methods = [m for m in _REPORT_ORDER if m in methods_present]

    def fmt(v: float | None) -> str:
        return "" if v is None else f"{100.0 * v:.2f}"

    lines = ["| Source-Target | " + " | ".join(_METHOD_DISPLAY[m] for m in methods) + " |"]
    lines.append("|" + "---|" * (len(methods) + 1))
    for pair in pairs:
        row = [fmt(cells.get((pair, m))) for m in methods]
        lines.append(f"| {pair} | " + " | ".join(row) + " |")
    avg_cells = []
    for m in methods:
        vals = [cells[(p, m)] for p in pairs if (p, m) in cells]
        avg_cells.append(fmt(float(np.mean(vals)) if vals else None))
    lines.append("| Avg | " + " | ".join(avg_cells) + " |")
    table_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return json_path, table_path


# ---------------------------------------------------------------------------
# Full grid over the three beef datasets (user-supplied)


def beef_pairs(root) -> list[tuple[str, list[str], list[str]]]:
    """The 21 source-target pairs of the full cross-dataset grid."""
    root = Path(root)
    d1 = sorted(str(p) for p in (root / "dataset1").glob("*.csv"))
    d2 = sorted(str(p) for p in (root / "dataset2").glob("*.csv"))
    d3 = sorted(str(p) for p in (root / "dataset3").glob("*.csv"))
    if len(d1) != 5 or len(d2) != 1 or len(d3) != 12:
        raise FileNotFoundError(
            f"expected dataset1=5, dataset2=1, dataset3=12 csv files under {root}; "
            f"found {len(d1)}/{len(d2)}/{len(d3)}"
        )
    pairs = [("1_{1-5}-2", d1, d2)]
    for i, f in enumerate(d1, start=1):
        pairs.append((f"1_{i}-3_{{1-12}}", [f], d3))
    pairs.append(("2-1_{1-5}", d2, d1))
    pairs.append(("2-3_{1-12}", d2, d3))
    for i, f in enumerate(d3, start=1):
        pairs.append((f"3_{i}-1_{{1-5}}", [f], d1))
    pairs.append(("3_{1-12}-2", d3, d2))
    return pairs


def beef_grid(root, out_dir, methods: Sequence[str] = METHODS, seed: int = 0, **overrides) -> list[ExperimentResult]:
    """Run every (pair, method) cell over the user-supplied beef datasets.

    Writes one result JSON per cell plus a combined report under ``out_dir``.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    results = []
    for pair_name, sources, targets in beef_pairs(root):
        for method in methods:
            cfg = ExperimentConfig(
                source=tuple(sources),
                target=tuple(targets),
                method=method,
                name=pair_name,
                seed=seed,
                output=str(out_dir / f"{pair_name.replace('/', '_')}__{method}.json"),
                **overrides,
            )
            log.info("running %s / %s", pair_name, method)
            results.append(run_experiment(cfg))
    emit_report(results, out_dir / "report")
    return results
