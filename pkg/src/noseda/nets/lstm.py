"""Many-to-one LSTM over 2-timestep windows, with hand-derived BPTT gradients.

Hidden size is 4 cells.  Gate pre-activations are fused into one (d, 4h)
input matrix and one (h, 4h) recurrent matrix with column blocks ordered
[input | forget | output | candidate]; input/forget/output gates are
sigmoid, candidate and cell output are tanh.  Only the final hidden state
feeds the softmax head, and dropout (inverted scaling) is applied to that
state during training only.
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
    sigmoid,
    softmax,
    uniform_init,
    write_trace_csv,
)

HIDDEN_DIM = 4


@dataclass(frozen=True)
class LstmParams:
    wx: np.ndarray  # (d, 4h) input weights, blocks [i | f | o | g]
    wh: np.ndarray  # (h, 4h) recurrent weights, same blocks
    b: np.ndarray  # (4h,) gate biases
    w_out: np.ndarray  # (h, C) classification head
    b_out: np.ndarray  # (C,)

    @property
    def input_dim(self) -> int:
        return self.wx.shape[0]

    @property
    def hidden_dim(self) -> int:
        return self.wh.shape[0]

    @property
    def n_classes(self) -> int:
        return self.b_out.shape[0]

    def arrays(self) -> tuple[np.ndarray, ...]:
        return (self.wx, self.wh, self.b, self.w_out, self.b_out)

    def to_json_dict(self) -> dict:
        keys = ("wx", "wh", "b", "w_out", "b_out")
        return {k: array_to_json(a) for k, a in zip(keys, self.arrays())}

    @classmethod
    def from_json_dict(cls, obj: dict) -> "LstmParams":
        return cls(*(array_from_json(obj[k]) for k in ("wx", "wh", "b", "w_out", "b_out")))


def lstm_init(input_dim: int, hidden_dim: int = HIDDEN_DIM, n_classes: int = N_CLASSES, seed: int = 0) -> LstmParams:
    """Seeded uniform(-1/sqrt(fan_in), +) init for gates; zero head and biases.

    The zero head keeps untrained outputs uniform and makes training exactly
    equivariant under a relabeling of the classes.
    """
    rng = np.random.default_rng(seed)
    return LstmParams(
        wx=uniform_init(rng, (input_dim, 4 * hidden_dim), input_dim),
        wh=uniform_init(rng, (hidden_dim, 4 * hidden_dim), hidden_dim),
        b=np.zeros(4 * hidden_dim),
        w_out=np.zeros((hidden_dim, n_classes)),
        b_out=np.zeros(n_classes),
    )


def _check_windows(params: LstmParams, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 3 or X.shape[1] != 2 or X.shape[2] != params.input_dim:
        raise ValueError(f"expected windows of shape (n, 2, {params.input_dim}), got {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError("non-finite values in input windows")
    return X


def _forward(params: LstmParams, X: np.ndarray, drop: np.ndarray | None = None):
    """Batched forward pass.  Returns (probs, cache) with everything BPTT needs."""
    B = X.shape[0]
    h = params.hidden_dim
    hs = np.zeros((B, h))
    cs = np.zeros((B, h))
    steps = []
    for t in range(2):
        xt = X[:, t, :]
        z = xt @ params.wx + hs @ params.wh + params.b
        i = sigmoid(z[:, :h])
        f = sigmoid(z[:, h : 2 * h])
        o = sigmoid(z[:, 2 * h : 3 * h])
        g = np.tanh(z[:, 3 * h :])
        c_new = f * cs + i * g
        hc = np.tanh(c_new)
        h_new = o * hc
        steps.append({"x": xt, "h_prev": hs, "c_prev": cs, "i": i, "f": f, "o": o, "g": g, "c": c_new, "hc": hc})
        hs, cs = h_new, c_new
    h_final = hs if drop is None else hs * drop
    logits = h_final @ params.w_out + params.b_out
    cache = {"steps": steps, "h_last": hs, "h_final": h_final, "logits": logits, "drop": drop}
    return softmax(logits), cache


def lstm_forward(params: LstmParams, window: np.ndarray, dropout_mask: np.ndarray | None = None) -> np.ndarray:
    """Class-probability 4-vector for one 2 x d window.

    ``dropout_mask``, when given, is an already-scaled multiplicative mask on
    the final hidden state (training use only).
    """
    window = np.asarray(window, dtype=np.float64)
    X = _check_windows(params, window[None])
    drop = None if dropout_mask is None else np.asarray(dropout_mask)[None]
    probs, _ = _forward(params, X, drop)
    return probs[0]


def lstm_predict_proba(params: LstmParams, X: np.ndarray) -> np.ndarray:
    X = _check_windows(params, X)
    probs, _ = _forward(params, X)
    return probs


def lstm_predict(params: LstmParams, X: np.ndarray) -> np.ndarray:
    """Predicted class labels in 1..C."""
    return np.argmax(lstm_predict_proba(params, X), axis=1) + 1


def lstm_loss(params: LstmParams, X: np.ndarray, labels: np.ndarray) -> float:
    """Mean cross-entropy of the model on (X, labels), dropout off."""
    X = _check_windows(params, X)
    y = labels_to_indices(labels, params.n_classes)
    _, cache = _forward(params, X)
    return cross_entropy_from_logits(cache["logits"], y)


def lstm_loss_grad(params: LstmParams, X: np.ndarray, labels: np.ndarray, drop: np.ndarray | None = None):
    """Mean cross-entropy and its gradient w.r.t. every parameter array.

    Full backprop through time over the two steps; gradients are returned in
    the order of ``LstmParams.arrays()``.
    """
    X = _check_windows(params, X)
    y = labels_to_indices(labels, params.n_classes)
    B = X.shape[0]
    h = params.hidden_dim
    probs, cache = _forward(params, X, drop)
    loss = cross_entropy_from_logits(cache["logits"], y)

    dlogits = (probs - one_hot(y, params.n_classes)) / B
    d_w_out = cache["h_final"].T @ dlogits
    d_b_out = dlogits.sum(axis=0)
    dh = dlogits @ params.w_out.T
    if cache["drop"] is not None:
        dh = dh * cache["drop"]

    d_wx = np.zeros_like(params.wx)
    d_wh = np.zeros_like(params.wh)
    d_b = np.zeros_like(params.b)
    dc_next = np.zeros((B, h))
    for t in (1, 0):
        s = cache["steps"][t]
        do = dh * s["hc"]
        dc = dh * s["o"] * (1.0 - s["hc"] ** 2) + dc_next
        di = dc * s["g"]
        dg = dc * s["i"]
        df = dc * s["c_prev"]
        dz = np.concatenate(
            [
                di * s["i"] * (1.0 - s["i"]),
                df * s["f"] * (1.0 - s["f"]),
                do * s["o"] * (1.0 - s["o"]),
                dg * (1.0 - s["g"] ** 2),
            ],
            axis=1,
        )
        d_wx += s["x"].T @ dz
        d_wh += s["h_prev"].T @ dz
        d_b += dz.sum(axis=0)
        dh = dz @ params.wh.T
        dc_next = dc * s["f"]

    return loss, (d_wx, d_wh, d_b, d_w_out, d_b_out)


def lstm_train(
    X: np.ndarray,
    labels: np.ndarray,
    config: TrainConfig = TrainConfig(),
    hidden_dim: int = HIDDEN_DIM,
    return_trace: bool = False,
):
    """Train from scratch with Adam over shuffled mini-batches.

    X: (n, 2, d) windows; labels in 1..4.  Deterministic given the config
    seed.  Returns the final-epoch params, plus the per-epoch mean-loss trace
    when ``return_trace`` is set.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 3 or X.shape[1] != 2:
        raise ValueError(f"expected (n, 2, d) windows, got {X.shape}")
    y = np.asarray(labels, dtype=np.int64)
    if X.shape[0] == 0:
        raise ValueError("empty training set")
    labels_to_indices(y)  # validate range up front
    n, _, d = X.shape

    rng = np.random.default_rng(config.seed)
    params = lstm_init(d, hidden_dim=hidden_dim, seed=int(rng.integers(2**63)))
    arrays = params.arrays()
    opt = Adam(arrays, lr=config.learning_rate)
    trace = []
    for _ in range(config.epochs):
        total = 0.0
        for idx in minibatch_indices(n, config.batch_size, rng):
            drop = dropout_mask(rng, (len(idx), params.hidden_dim), config.dropout)
            loss, grads = lstm_loss_grad(params, X[idx], y[idx], drop)
            opt.step(arrays, grads)
            total += loss * len(idx)
        trace.append(total / n)
    if config.trace_path:
        write_trace_csv(config.trace_path, trace)
    if return_trace:
        return params, trace
    return params
