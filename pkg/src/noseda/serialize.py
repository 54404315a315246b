"""Shape-tagged JSON encoding for numpy arrays used by all model families."""

from __future__ import annotations

import numpy as np


def array_to_json(a: np.ndarray) -> dict:
    a = np.asarray(a, dtype=np.float64)
    return {"shape": list(a.shape), "data": a.ravel().tolist()}


def array_from_json(obj: dict) -> np.ndarray:
    data = np.asarray(obj["data"], dtype=np.float64)
    return data.reshape(obj["shape"])
