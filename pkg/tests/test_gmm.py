import numpy as np
import pytest
from scipy import stats as scipy_stats

from noseda.gmm import GmmParams, gmm_assign, gmm_fit, gmm_log_likelihood, gmm_posterior


def two_blob_data(rng, n=200, centers=(-5.0, 5.0), d=2):
    half = n // 2
    X = np.concatenate([rng.normal(c, 1.0, size=(half, d)) for c in centers])
    true = np.repeat(np.arange(len(centers)), half)
    return X, true


class TestFit:
    def test_recovers_separated_means(self, rng):
        X, _ = two_blob_data(rng)
        params = gmm_fit(X, k=2, seed=0)
        got = np.sort(params.means[:, 0])
        assert abs(got[0] - (-5.0)) < 0.3
        assert abs(got[1] - 5.0) < 0.3

    def test_single_component_closed_form(self, rng):
        X = rng.normal(2.0, 3.0, size=(150, 4))
        params = gmm_fit(X, k=1, seed=0)
        assert np.allclose(params.means[0], X.mean(axis=0))
        assert np.allclose(params.variances[0], np.maximum(X.var(axis=0), 1e-6))
        assert params.weights[0] == 1.0

    def test_identical_points_hit_variance_floor(self):
        X = np.ones((20, 3))
        params = gmm_fit(X, k=2, seed=0)
        assert np.all(params.variances == 1e-6)
        assert np.all(np.isfinite(params.means))
        assert np.isfinite(gmm_log_likelihood(params, X))

    def test_deterministic(self, rng):
        X, _ = two_blob_data(rng)
        a = gmm_fit(X, k=2, seed=5)
        b = gmm_fit(X, k=2, seed=5)
        assert np.array_equal(a.means, b.means)
        assert np.array_equal(a.weights, b.weights)
        assert np.array_equal(a.variances, b.variances)

    def test_too_few_points(self):
        with pytest.raises(ValueError):
            gmm_fit(np.zeros((1, 2)), k=2)

    def test_non_finite_rejected(self):
        X = np.zeros((10, 2))
        X[3, 1] = np.nan
        with pytest.raises(ValueError):
            gmm_fit(X, k=2)

    @pytest.mark.parametrize("seed", range(20))
    def test_loglik_trace_nondecreasing(self, seed):
        r = np.random.default_rng(seed)
        k = int(r.integers(1, 4))
        X = np.concatenate(
            [r.normal(r.uniform(-6, 6), r.uniform(0.5, 2.0), size=(40, 3)) for _ in range(k + 1)]
        )
        _, trace = gmm_fit(X, k=k, seed=seed, return_trace=True)
        diffs = np.diff(trace)
        assert np.all(diffs >= -1e-9)

    def test_fit_invariants(self, rng):
        X = rng.normal(size=(100, 5))
        params = gmm_fit(X, k=3, seed=1)
        assert abs(params.weights.sum() - 1.0) < 1e-9
        assert np.all(params.weights > 0)
        assert np.all(params.variances >= 1e-6)


class TestPosterior:
    def symmetric_params(self):
        return GmmParams(
            weights=np.array([0.5, 0.5]),
            means=np.array([[-2.0, 0.0], [2.0, 0.0]]),
            variances=np.ones((2, 2)),
        )

    def test_matches_scipy_densities(self):
        params = GmmParams(
            weights=np.array([0.3, 0.7]),
            means=np.array([[-1.0, 2.0], [3.0, -0.5]]),
            variances=np.array([[0.5, 1.5], [2.0, 0.25]]),
        )
        x = np.array([0.7, 0.9])
        joint = np.array(
            [
                w * scipy_stats.multivariate_normal.pdf(x, mean=m, cov=np.diag(v))
                for w, m, v in zip(params.weights, params.means, params.variances)
            ]
        )
        expected = joint / joint.sum()
        assert np.allclose(gmm_posterior(params, x), expected, atol=1e-12)

    def test_concentrates_at_separated_mean(self):
        params = GmmParams(
            weights=np.array([0.5, 0.5]),
            means=np.array([[-5.0], [5.0]]),
            variances=np.ones((2, 1)),
        )
        assert gmm_posterior(params, np.array([-5.0]))[0] > 0.99

    def test_midpoint_is_half(self):
        resp = gmm_posterior(self.symmetric_params(), np.array([0.0, 0.0]))
        assert np.allclose(resp, [0.5, 0.5], atol=1e-6)

    def test_single_component(self):
        params = GmmParams(weights=np.array([1.0]), means=np.zeros((1, 2)), variances=np.ones((1, 2)))
        assert gmm_posterior(params, np.zeros(2)).tolist() == [1.0]

    def test_sums_to_one(self, rng):
        params = gmm_fit(rng.normal(size=(60, 3)), k=3, seed=0)
        resp = gmm_posterior(params, rng.normal(size=(10, 3)))
        assert np.allclose(resp.sum(axis=1), 1.0, atol=1e-9)
        assert np.all(resp >= 0)

    def test_permutation_equivariant(self, rng):
        params = gmm_fit(rng.normal(size=(80, 2)), k=3, seed=2)
        flipped = GmmParams(
            weights=params.weights[::-1].copy(),
            means=params.means[::-1].copy(),
            variances=params.variances[::-1].copy(),
        )
        x = rng.normal(size=2)
        assert np.allclose(gmm_posterior(params, x)[::-1], gmm_posterior(flipped, x), atol=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            gmm_posterior(self.symmetric_params(), np.zeros(3))


class TestAssign:
    def test_matches_generating_component(self, rng):
        X, true = two_blob_data(rng, n=400)
        params = gmm_fit(X, k=2, seed=0)
        assign = gmm_assign(params, X)
        agree = max((assign == true).mean(), (assign != true).mean())
        assert agree > 0.95

    def test_single_point_single_component(self):
        params = GmmParams(weights=np.array([1.0]), means=np.zeros((1, 2)), variances=np.ones((1, 2)))
        assert gmm_assign(params, np.zeros((1, 2))).tolist() == [0]

    def test_exact_tie_goes_to_lower_id(self):
        params = GmmParams(
            weights=np.array([0.5, 0.5]),
            means=np.array([[-1.0], [1.0]]),
            variances=np.ones((2, 1)),
        )
        assert gmm_assign(params, np.array([[0.0]]))[0] == 0


class TestLogLikelihood:
    def test_closed_form_at_mean(self):
        p = 3
        params = GmmParams(weights=np.array([1.0]), means=np.zeros((1, p)), variances=np.ones((1, p)))
        expected = -(p / 2) * np.log(2 * np.pi)
        assert gmm_log_likelihood(params, np.zeros((1, p))) == pytest.approx(expected, abs=1e-12)

    def test_outlier_lowers_per_point_average(self, rng):
        X = rng.normal(size=(50, 2))
        params = gmm_fit(X, k=1, seed=0)
        base = gmm_log_likelihood(params, X) / 50
        X_out = np.vstack([X, [50.0, 50.0]])
        assert gmm_log_likelihood(params, X_out) / 51 < base


class TestSerialization:
    def test_json_round_trip(self, rng):
        params = gmm_fit(rng.normal(size=(50, 4)), k=2, seed=3)
        clone = GmmParams.from_json_dict(params.to_json_dict())
        assert np.array_equal(clone.weights, params.weights)
        assert np.array_equal(clone.means, params.means)
        assert np.array_equal(clone.variances, params.variances)
        assert clone.to_json_dict()["k"] == 2
