import math

import numpy as np
import pytest

from noseda.baselines import (
    AdaBoostModel,
    Stump,
    adaboost_predict,
    adaboost_predict_many,
    adaboost_train,
    nearest_neighbor,
    ss_classify_stream,
    ss_init,
)


def skewed_checkerboard(rng, heavy=180, light=20):
    # diagonal tiles are heavy so an additive vote function can reach 0.9+;
    # a balanced checkerboard caps axis-aligned stump ensembles at 0.75
    Xs, ys = [], []
    for n, x0, y0, cls in [(heavy, 0, 0, 1), (heavy, 1, 1, 1), (light, 0, 1, 2), (light, 1, 0, 2)]:
        Xs.append(rng.uniform([x0, y0], [x0 + 1, y0 + 1], size=(n, 2)))
        ys.append(np.full(n, cls))
    return np.vstack(Xs), np.concatenate(ys)


class TestAdaBoostTrain:
    def test_sign_split_needs_one_stump(self, rng):
        x = rng.uniform(-1, 1, size=(100, 1))
        x = x[np.abs(x[:, 0]) > 0.05]
        y = np.where(x[:, 0] > 0, 2, 1)
        model = adaboost_train(x, y, n_estimators=100)
        assert len(model.stumps) == 1
        assert (adaboost_predict_many(model, x) == y).all()

    def test_accepted_errors_below_chance_margin(self, rng):
        X = rng.normal(size=(120, 3))
        y = rng.integers(1, 5, size=120)
        X[:, 0] += y  # some signal
        model = adaboost_train(X, y, n_estimators=50)
        k = len(model.classes)
        assert all(err < 1 - 1 / k for err in model.stump_errors)

    def test_checkerboard(self, rng):
        X, y = skewed_checkerboard(rng)
        model = adaboost_train(X, y, n_estimators=100)
        acc = (adaboost_predict_many(model, X) == y).mean()
        assert acc >= 0.9

    def test_single_class_rejected(self):
        with pytest.raises(ValueError):
            adaboost_train(np.zeros((5, 1)), np.ones(5, dtype=int))

    def test_accuracy_monotone_in_estimators(self, rng):
        X, y = skewed_checkerboard(rng)
        accs = []
        for n in (1, 10, 100):
            m = adaboost_train(X, y, n_estimators=n)
            accs.append((adaboost_predict_many(m, X) == y).mean())
        assert accs[-1] >= accs[0]


class TestAdaBoostPredict:
    def hand_model(self):
        stumps = (
            Stump(feature=0, threshold=0.0, left_class=1, right_class=3),
            Stump(feature=1, threshold=0.5, left_class=2, right_class=3),
            Stump(feature=0, threshold=-1.0, left_class=4, right_class=2),
            Stump(feature=1, threshold=0.2, left_class=1, right_class=4),
        )
        alphas = (0.9, 0.4, 1.1, 0.35)
        return AdaBoostModel(stumps=stumps, alphas=alphas, classes=(1, 2, 3, 4), stump_errors=(0,) * 4)

    def test_single_stump_side_vote(self):
        model = AdaBoostModel(
            stumps=(Stump(feature=0, threshold=1.0, left_class=2, right_class=4),),
            alphas=(1.0,), classes=(2, 4), stump_errors=(0.1,),
        )
        assert adaboost_predict(model, np.array([0.0])) == 2
        assert adaboost_predict(model, np.array([2.0])) == 4

    def test_equal_votes_tie_to_lower_class(self):
        model = AdaBoostModel(
            stumps=(
                Stump(feature=0, threshold=0.0, left_class=1, right_class=3),
                Stump(feature=0, threshold=0.0, left_class=3, right_class=1),
            ),
            alphas=(0.7, 0.7), classes=(1, 3), stump_errors=(0.2, 0.2),
        )
        assert adaboost_predict(model, np.array([-1.0])) == 1
        assert adaboost_predict(model, np.array([1.0])) == 1

    def test_matches_hand_summed_vote_table(self, rng):
        model = self.hand_model()
        for _ in range(5):
            x = rng.normal(size=2)
            votes = {c: 0.0 for c in model.classes}
            for stump, alpha in zip(model.stumps, model.alphas):
                side = x[stump.feature] <= stump.threshold
                votes[stump.left_class if side else stump.right_class] += alpha
            best = max(votes.values())
            expected = min(c for c, v in votes.items() if v == best)
            assert adaboost_predict(model, x) == expected

    def test_invariant_to_stump_order(self, rng):
        model = self.hand_model()
        order = rng.permutation(len(model.stumps))
        shuffled = AdaBoostModel(
            stumps=tuple(model.stumps[i] for i in order),
            alphas=tuple(model.alphas[i] for i in order),
            classes=model.classes,
            stump_errors=model.stump_errors,
        )
        X = rng.normal(size=(40, 2))
        assert np.array_equal(adaboost_predict_many(model, X), adaboost_predict_many(shuffled, X))

    def test_json_round_trip(self, rng):
        X, y = skewed_checkerboard(rng, heavy=40, light=10)
        model = adaboost_train(X, y, n_estimators=10)
        clone = AdaBoostModel.from_json_dict(model.to_json_dict())
        probe = rng.normal(size=(20, 2))
        assert np.array_equal(adaboost_predict_many(model, probe), adaboost_predict_many(clone, probe))


class TestNearestNeighbor:
    def test_two_member_pool(self):
        idx, dist = nearest_neighbor(np.array([[3.0], [7.0]]), np.array([4.0]))
        assert (idx, dist) == (0, 1.0)

    def test_tie_goes_to_lower_index(self):
        idx, _ = nearest_neighbor(np.array([[-1.0], [1.0]]), np.array([0.0]))
        assert idx == 0

    def test_matches_linear_scan(self, rng):
        pool = rng.normal(size=(60, 4))
        for _ in range(1000):
            x = rng.normal(size=4)
            best_i, best_d = None, None
            for i, m in enumerate(pool):
                d = math.sqrt(float(((m - x) ** 2).sum()))
                if best_d is None or d < best_d:
                    best_i, best_d = i, d
            got_i, got_d = nearest_neighbor(pool, x)
            assert got_i == best_i
            assert got_d == best_d

    def test_empty_pool(self):
        with pytest.raises(ValueError):
            nearest_neighbor(np.zeros((0, 2)), np.zeros(2))


def four_class_init(extra_class1):
    """Class 1 carries the interesting pool; 2-4 are far-away singletons."""
    X = np.vstack([extra_class1, [[100.0]], [[200.0]], [[300.0]]])
    y = np.array([1] * len(extra_class1) + [2, 3, 4])
    return ss_init(X, y)


def brute_min_pairwise(pool):
    m = len(pool)
    if m < 2:
        return float("inf")
    best = float("inf")
    for i in range(m):
        for j in range(i + 1, m):
            best = min(best, math.sqrt(float(((pool[i] - pool[j]) ** 2).sum())))
    return best


class TestSsInit:
    def test_two_point_pool_delta(self):
        state = four_class_init([[0.0], [2.0]])
        assert state.deltas[1] == 2.0

    def test_singleton_delta_infinite(self):
        state = four_class_init([[0.0], [2.0]])
        assert state.deltas[2] == float("inf")
        assert state.deltas[3] == float("inf")

    def test_missing_classes_listed(self):
        with pytest.raises(ValueError, match=r"\[2, 4\]"):
            ss_init(np.zeros((2, 1)), np.array([1, 3]))

    def test_delta_matches_brute_force(self, rng):
        for _ in range(10):
            pools = [rng.normal(size=(int(rng.integers(1, 12)), 3)) for _ in range(4)]
            X = np.vstack(pools)
            y = np.concatenate([np.full(len(p), c + 1) for c, p in enumerate(pools)])
            state = ss_init(X, y)
            for c in (1, 2, 3, 4):
                assert state.deltas[c] == brute_min_pairwise(state.pools[c])


class TestSsStream:
    def test_coincident_point_grows_pool(self):
        state = four_class_init([[0.0], [2.0]])
        preds = ss_classify_stream(state, np.array([[0.0]]))
        assert preds == [1]
        assert len(state.pools[1]) == 3
        assert state.deltas[1] == 0.0

    def test_far_outlier_not_added(self):
        state = four_class_init([[0.0], [2.0]])
        sizes = {c: len(state.pools[c]) for c in state.pools}
        preds = ss_classify_stream(state, np.array([[40.0]]))
        assert preds == [1]  # still nearest to the class-1 pool
        assert all(len(state.pools[c]) == sizes[c] for c in state.pools)

    def test_pool_class_tie_goes_to_lower_class(self):
        X = np.array([[-1.0], [1.0], [100.0], [200.0]])
        y = np.array([1, 2, 3, 4])
        state = ss_init(X, y)
        preds = ss_classify_stream(state, np.array([[0.0]]))
        assert preds == [1]

    def test_stream_matches_brute_force_replay(self, rng):
        pools = {c: [rng.normal(scale=2.0, size=3) for _ in range(int(rng.integers(1, 6)))] for c in (1, 2, 3, 4)}
        X = np.vstack([np.stack(pools[c]) for c in (1, 2, 3, 4)])
        y = np.concatenate([np.full(len(pools[c]), c) for c in (1, 2, 3, 4)])
        state = ss_init(X, y)
        stream = rng.normal(scale=2.0, size=(50, 3))

        # independent replay recomputing every delta from scratch
        replay = {c: [m.copy() for m in pools[c]] for c in (1, 2, 3, 4)}
        expected = []
        for x in stream:
            best_c, best_d = None, None
            for c in (1, 2, 3, 4):
                for m in replay[c]:
                    d = math.sqrt(float(((m - x) ** 2).sum()))
                    if best_d is None or d < best_d:
                        best_c, best_d = c, d
            expected.append(best_c)
            if best_d < brute_min_pairwise(replay[best_c]):
                replay[best_c].append(x.copy())

        got = ss_classify_stream(state, stream)
        assert got == expected
        for c in (1, 2, 3, 4):
            assert len(state.pools[c]) == len(replay[c])
            assert np.array_equal(state.pools[c], np.stack(replay[c]))
            assert state.deltas[c] == brute_min_pairwise(replay[c])

    def test_pools_never_shrink(self, rng):
        X = rng.normal(size=(20, 2))
        y = np.concatenate([np.full(5, c) for c in (1, 2, 3, 4)])
        state = ss_init(X, y)
        sizes = {c: len(state.pools[c]) for c in state.pools}
        ss_classify_stream(state, rng.normal(size=(30, 2)))
        assert all(len(state.pools[c]) >= sizes[c] for c in state.pools)
