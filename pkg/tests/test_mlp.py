import numpy as np
import pytest

from noseda.nets import TrainConfig, mlp_predict, mlp_train
from noseda.nets.mlp import MlpParams, mlp_init, mlp_predict_labels, mlp_predict_proba


def xor_set(rng, n=200):
    X = rng.uniform(-1, 1, size=(n, 2))
    y = np.where(X[:, 0] * X[:, 1] > 0, 1, 2)
    return X, y


class TestForward:
    def test_zero_init_head_gives_uniform(self):
        params = mlp_init(3, hidden=(8, 8), seed=0)
        out = mlp_predict(params, np.array([0.3, -1.0, 2.0]))
        assert np.allclose(out, 0.25, atol=1e-12)

    def test_predict_sums_to_one(self, rng):
        params = mlp_init(4, hidden=(16, 16), seed=1)
        probs = mlp_predict_proba(params, rng.normal(size=(20, 4)))
        assert np.allclose(probs.sum(axis=1), 1.0, atol=1e-9)

    def test_inconsistent_shapes_rejected(self):
        with pytest.raises(ValueError):
            MlpParams(
                w1=np.zeros((3, 8)), b1=np.zeros(8),
                w2=np.zeros((9, 8)), b2=np.zeros(8),
                w3=np.zeros((8, 4)), b3=np.zeros(4),
            )


class TestTrain:
    def test_xor_pattern(self, rng):
        X, y = xor_set(rng)
        cfg = TrainConfig(epochs=100, dropout=0.2, learning_rate=0.01, batch_size=32, seed=0)
        params = mlp_train(X, y, cfg)
        assert (mlp_predict_labels(params, X) == y).mean() >= 0.95

    def test_deterministic(self, rng):
        X, y = xor_set(rng, n=60)
        cfg = TrainConfig(epochs=5, dropout=0.2, learning_rate=0.01, batch_size=16, seed=3)
        _, t1 = mlp_train(X, y, cfg, hidden=(32, 32), return_trace=True)
        _, t2 = mlp_train(X, y, cfg, hidden=(32, 32), return_trace=True)
        assert t1 == t2

    def test_default_hidden_sizes(self, rng):
        X, y = xor_set(rng, n=40)
        cfg = TrainConfig(epochs=2, dropout=0.2, learning_rate=0.01, batch_size=16, seed=0)
        params = mlp_train(X, y, cfg)
        assert params.b1.shape == (256,)
        assert params.b2.shape == (256,)

    def test_empty_errors(self):
        with pytest.raises(ValueError):
            mlp_train(np.zeros((0, 3)), np.zeros(0), TrainConfig())
