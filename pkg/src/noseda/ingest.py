"""Loading, harmonizing, standardizing, windowing and splitting sensor CSV data.

A dataset is an ordered sequence of per-minute sensor frames with a 4-class
quality label.  Classification operates on length-2 windows labeled by their
last timestep, so every file of N frames yields N-1 windows.  Windows never
cross file boundaries.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np

log = logging.getLogger(__name__)

CLASS_LABELS = (1, 2, 3, 4)

# Channels removed so the gas-sensor feature set is uniform across datasets.
DEFAULT_DROP = ("humidity", "temperature", "MQ7", "MQ138", "MQ137")

STD_FLOOR = 1e-8


@dataclass(frozen=True)
class SensorFrame:
    """One per-minute reading: minute index, gas-channel vector, quality label."""

    t: int
    features: np.ndarray
    label: int


@dataclass(frozen=True)
class SequenceDataset:
    name: str
    frames: tuple[SensorFrame, ...]
    feature_names: tuple[str, ...]

    def __post_init__(self):
        d = len(self.feature_names)
        prev_t = None
        for i, fr in enumerate(self.frames):
            if fr.features.shape != (d,):
                raise ValueError(
                    f"{self.name}: frame {i} has {fr.features.shape[0] if fr.features.ndim == 1 else fr.features.shape} features, expected {d}"
                )
            if fr.label not in CLASS_LABELS:
                raise ValueError(f"{self.name}: frame {i} label {fr.label} not in {CLASS_LABELS}")
            if prev_t is not None and fr.t <= prev_t:
                raise ValueError(f"{self.name}: frames not ordered by t at index {i}")
            prev_t = fr.t

    def __len__(self) -> int:
        return len(self.frames)

    @cached_property
    def feature_matrix(self) -> np.ndarray:
        """(N, d) float64 matrix of all frame features."""
        return np.asarray([fr.features for fr in self.frames], dtype=np.float64)

    @cached_property
    def labels(self) -> np.ndarray:
        return np.asarray([fr.label for fr in self.frames], dtype=np.int64)


@dataclass(frozen=True)
class WindowSample:
    """A 2-timestep slice of a sequence, labeled by its final frame."""

    x: np.ndarray  # (2, d)
    y: int
    origin_t: int

    def __post_init__(self):
        if self.x.ndim != 2 or self.x.shape[0] != 2:
            raise ValueError(f"window must be 2 x d, got shape {self.x.shape}")
        if self.y not in CLASS_LABELS:
            raise ValueError(f"window label {self.y} not in {CLASS_LABELS}")

    @cached_property
    def flat(self) -> np.ndarray:
        """Flattened (2d,) feature vector, the clustering/gating representation."""
        return self.x.ravel()


@dataclass(frozen=True)
class FewShotSplit:
    shots: tuple[WindowSample, ...]
    test_pool: tuple[WindowSample, ...]
    n_classes: int
    # Positions of shots / test windows in the input list, for bookkeeping
    # (e.g. mapping test windows back to their source file).
    shot_indices: tuple[int, ...]
    test_indices: tuple[int, ...]


@dataclass(frozen=True)
class StandardizationStats:
    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        if np.any(self.std <= 0):
            raise ValueError("standardization std must be positive")

    @classmethod
    def identity(cls, d: int) -> "StandardizationStats":
        return cls(mean=np.zeros(d), std=np.ones(d))

    def to_json_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_json_dict(cls, obj: dict) -> "StandardizationStats":
        return cls(
            mean=np.asarray(obj["mean"], dtype=np.float64),
            std=np.asarray(obj["std"], dtype=np.float64),
        )


def load_csv(path, label_column: str = "label") -> SequenceDataset:
    """Read one CSV file into a SequenceDataset.

    The header names the columns; every column except ``label_column`` is a
    numeric feature.  Labels must be integers in 1..4; the first offending
    data row (1-based) is reported otherwise.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"dataset file not found: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if label_column not in header:
            raise ValueError(f"{path}: no column named {label_column!r} in header {header}")
        label_idx = header.index(label_column)
        feature_names = tuple(h for i, h in enumerate(header) if i != label_idx)
        frames = []
        for row_no, row in enumerate(reader, start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise ValueError(f"{path}: row {row_no} has {len(row)} cells, expected {len(header)}")
            raw_label = row[label_idx].strip()
            try:
                label = int(float(raw_label))
            except ValueError:
                raise ValueError(f"{path}: row {row_no}: non-integer label {raw_label!r}") from None
            if label not in CLASS_LABELS or float(raw_label) != label:
                raise ValueError(f"{path}: row {row_no}: label {raw_label} outside {{1..4}}")
            feats = np.empty(len(feature_names))
            j = 0
            for i, cell in enumerate(row):
                if i == label_idx:
                    continue
                try:
                    feats[j] = float(cell)
                except ValueError:
                    raise ValueError(
                        f"{path}: row {row_no}: non-numeric value {cell!r} in column {header[i]!r}"
                    ) from None
                j += 1
            frames.append(SensorFrame(t=row_no - 1, features=feats, label=label))
    if not frames:
        raise ValueError(f"{path}: no data rows")
    return SequenceDataset(name=path.stem, frames=tuple(frames), feature_names=feature_names)


def load_dataset(path, label_column: str = "label") -> list[SequenceDataset]:
    """Load a dataset from a single CSV file or a directory of CSV files.

    Directory contents are taken in lexicographic order, one SequenceDataset
    per file.
    """
    path = Path(path)
    if path.is_dir():
        files = sorted(path.glob("*.csv"))
        if not files:
            raise FileNotFoundError(f"no .csv files in directory {path}")
        return [load_csv(f, label_column) for f in files]
    return [load_csv(path, label_column)]


def harmonize(ds: SequenceDataset, drop: Sequence[str] = DEFAULT_DROP) -> SequenceDataset:
    """Remove the named feature columns where present (case-insensitive).

    Absent names are skipped silently (logged).  Idempotent.
    """
    drop_lower = {name.lower() for name in drop}
    keep = [i for i, name in enumerate(ds.feature_names) if name.lower() not in drop_lower]
    if len(keep) == len(ds.feature_names):
        if drop:
            log.debug("%s: none of %s present, nothing dropped", ds.name, sorted(drop_lower))
        return ds
    dropped = [n for n in ds.feature_names if n.lower() in drop_lower]
    absent = sorted(drop_lower - {n.lower() for n in ds.feature_names})
    log.info("%s: dropped columns %s (absent: %s)", ds.name, dropped, absent)
    names = tuple(ds.feature_names[i] for i in keep)
    frames = tuple(
        SensorFrame(t=fr.t, features=fr.features[keep], label=fr.label) for fr in ds.frames
    )
    return SequenceDataset(name=ds.name, frames=frames, feature_names=names)


def fit_standardizer(data) -> StandardizationStats:
    """Per-feature mean and population (N-divisor) std over one or more datasets.

    Stds are floored at 1e-8 so degenerate channels stay usable.
    """
    if isinstance(data, SequenceDataset):
        datasets = [data]
    else:
        datasets = list(data)
    if not datasets or sum(len(ds) for ds in datasets) == 0:
        raise ValueError("cannot fit standardizer on empty data")
    X = np.concatenate([ds.feature_matrix for ds in datasets], axis=0)
    if X.shape[0] < 2:
        raise ValueError(f"need at least 2 frames to standardize, got {X.shape[0]}")
    mean = X.mean(axis=0)
    std = np.maximum(X.std(axis=0), STD_FLOOR)
    return StandardizationStats(mean=mean, std=std)


def apply_standardizer(ds: SequenceDataset, stats: StandardizationStats) -> SequenceDataset:
    d = len(ds.feature_names)
    if stats.mean.shape != (d,):
        raise ValueError(f"standardizer is {stats.mean.shape[0]}-dimensional, dataset has d={d}")
    Z = (ds.feature_matrix - stats.mean) / stats.std
    frames = tuple(
        SensorFrame(t=fr.t, features=Z[i], label=fr.label) for i, fr in enumerate(ds.frames)
    )
    return SequenceDataset(name=ds.name, frames=frames, feature_names=ds.feature_names)


def make_windows(ds: SequenceDataset) -> list[WindowSample]:
    """Slice a sequence into N-1 overlapping 2-frame windows.

    Window i stacks frames (i, i+1) and carries the label of frame i+1.
    """
    n = len(ds)
    if n < 2:
        raise ValueError(f"{ds.name}: need at least 2 frames to window, got {n}")
    F = ds.feature_matrix
    return [
        WindowSample(x=np.stack((F[i], F[i + 1])), y=ds.frames[i + 1].label, origin_t=ds.frames[i + 1].t)
        for i in range(n - 1)
    ]


def stack_windows(windows: Sequence[WindowSample]) -> tuple[np.ndarray, np.ndarray]:
    """Stack WindowSamples into an (n, 2, d) feature array and an (n,) label array."""
    if not windows:
        raise ValueError("no windows to stack")
    X = np.stack([w.x for w in windows])
    y = np.asarray([w.y for w in windows], dtype=np.int64)
    return X, y


def flatten_windows(windows: Sequence[WindowSample]) -> np.ndarray:
    """(n, 2d) matrix of flattened windows."""
    if not windows:
        raise ValueError("no windows to flatten")
    return np.stack([w.flat for w in windows])


def sample_few_shot(
    windows: Sequence[WindowSample], per_class: int = 4, seed: int = 0
) -> FewShotSplit:
    """Draw ``per_class`` labeled windows per present class, uniformly without
    replacement; everything else becomes the held-out test pool.

    Classes with fewer than ``per_class`` windows contribute all of theirs
    (logged).  Deterministic under a fixed seed.
    """
    if not windows:
        raise ValueError("cannot split an empty window list")
    if per_class < 1:
        raise ValueError(f"per_class must be >= 1, got {per_class}")
    rng = np.random.default_rng(seed)
    labels = np.asarray([w.y for w in windows])
    classes = sorted(set(labels.tolist()))
    shot_idx: list[int] = []
    for c in classes:
        idx = np.flatnonzero(labels == c)
        if idx.size < per_class:
            log.warning("class %d has only %d windows (< %d); taking all", c, idx.size, per_class)
            chosen = idx
        else:
            chosen = rng.choice(idx, size=per_class, replace=False)
        shot_idx.extend(sorted(int(i) for i in chosen))
    shot_set = set(shot_idx)
    test_idx = [i for i in range(len(windows)) if i not in shot_set]
    return FewShotSplit(
        shots=tuple(windows[i] for i in shot_idx),
        test_pool=tuple(windows[i] for i in test_idx),
        n_classes=len(classes),
        shot_indices=tuple(shot_idx),
        test_indices=tuple(test_idx),
    )
