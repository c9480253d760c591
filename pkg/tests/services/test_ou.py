import math

import numpy as np
import pytest

from zodmc.core.errors import ArgumentError
from zodmc.services.gmm import GmmSpec, standard_gaussian_spec
from zodmc.services.ou import (
    GmmFlow,
    gaussian_w2,
    gmm_score_at_time,
    ou_decay_bounds,
    ou_marginal,
    sample_ou_marginal,
)


class TestOuMarginal:
    def test_marginal_coefficients(self):
        m = ou_marginal(1.0)

        assert m.shrink == pytest.approx(math.exp(-1.0))
        assert m.noise_var == pytest.approx(1.0 - math.exp(-2.0))

    def test_negative_time(self):
        with pytest.raises(ArgumentError):
            ou_marginal(-0.1)

    def test_standard_gaussian_is_stationary(self):
        spec = standard_gaussian_spec(2)
        x = np.array([[0.3, -1.2], [2.0, 0.5]])

        for t in (0.05, 0.7, 3.0):
            np.testing.assert_allclose(gmm_score_at_time(spec, t, x), -x, atol=1e-12)

    def test_score_matches_finite_difference(self, d1_spec: GmmSpec):
        flow = GmmFlow(d1_spec)
        x = np.array([4.0, 5.0])
        h = 1e-5
        fd = np.array(
            [
                (flow.log_density(0.3, x + h * e)[0] - flow.log_density(0.3, x - h * e)[0])
                / (2 * h)
                for e in np.eye(2)
            ]
        )

        np.testing.assert_allclose(flow.score(0.3, x), fd, rtol=1e-5, atol=1e-7)

    def test_score_matches_finite_difference_at_random_points(
        self, d1_spec: GmmSpec, rng: np.random.Generator
    ):
        flow = GmmFlow(d1_spec)
        h = 1e-5
        for _ in range(50):
            t = float(rng.uniform(0.05, 3.0))
            x = rng.uniform(-5.0, 15.0, size=2)
            fd = np.array(
                [
                    (flow.log_density(t, x + h * e)[0] - flow.log_density(t, x - h * e)[0])
                    / (2 * h)
                    for e in np.eye(2)
                ]
            )

            np.testing.assert_allclose(flow.score(t, x), fd, rtol=1e-4, atol=1e-6)

    def test_sample_marginal_moments(self, d1_spec: GmmSpec, rng: np.random.Generator):
        t = 0.5
        x = sample_ou_marginal(d1_spec, t, 200_000, rng)
        expected_mean = math.exp(-t) * (d1_spec.weights @ d1_spec.means)

        np.testing.assert_allclose(x.mean(axis=0), expected_mean, atol=0.05)


class TestOuBounds:
    def test_w2_bound_value(self):
        w2, kl = ou_decay_bounds(1.0, 123.28, 2)
        expected = math.sqrt((1 - math.exp(-1)) ** 2 * 123.28 + (1 - math.exp(-2)) * 2)

        assert w2 == pytest.approx(expected)
        assert kl > 0

    def test_w2_bound_dominates_gaussian_w2(self):
        # N(m, s²I) 에서 출발한 OU 의 주변분포는 닫힌 형태로 알려져 있습니다
        mean, var, d = np.array([3.0, -1.0]), 0.5, 2
        m2sq = float(mean @ mean) + d * var
        for t in np.linspace(0.01, 5.0, 50):
            shrink = math.exp(-t)
            cov_t = (shrink**2 * var + 1 - shrink**2) * np.eye(d)
            exact = gaussian_w2(shrink * mean, cov_t, mean, var * np.eye(d))
            bound, _ = ou_decay_bounds(t, m2sq, d, with_kl=False)

            assert exact <= bound + 1e-12

    def test_kl_diverges_at_zero(self):
        with pytest.raises(ArgumentError):
            ou_decay_bounds(0.0, 1.0, 2)

    def test_gaussian_w2_translation(self):
        cov = np.array([[2.0, 0.3], [0.3, 1.0]])

        assert gaussian_w2(np.zeros(2), cov, np.array([3.0, 4.0]), cov) == pytest.approx(5.0)
