from dataclasses import replace

import numpy as np
import pytest

from zodmc.core.errors import ConfigurationError
from zodmc.services.gmm import GmmSpec
from zodmc.services.target import (
    QueryLedger,
    annulus_penalty,
    apply_annulus_penalty,
    eval_potential,
    make_gmm,
    make_mueller_brown,
    locate_mueller_center,
    make_quadratic,
    make_standard_gaussian,
    mueller_base_potential,
)


class TestQueryLedger:
    def test_counts_one_per_point(self, d1_spec: GmmSpec):
        target = make_gmm(d1_spec)
        ledger = QueryLedger()

        eval_potential(target, np.zeros(2), ledger, "optimization")
        eval_potential(target, np.zeros((7, 2)), ledger, "score-estimation")

        assert ledger.zeroth_order_count == 8
        assert ledger.by_phase["optimization"] == 1
        assert ledger.by_phase["score-estimation"] == 7

    def test_dimension_mismatch(self, d1_spec: GmmSpec):
        with pytest.raises(ConfigurationError):
            eval_potential(make_gmm(d1_spec), np.zeros(3), QueryLedger(), "baseline")

    def test_unknown_phase(self):
        with pytest.raises(ConfigurationError):
            QueryLedger().record("training")

    def test_snapshot_is_frozen(self):
        ledger = QueryLedger()
        ledger.record("baseline", 4)
        snap = ledger.snapshot()
        ledger.record("baseline", 1)

        assert snap.zeroth_order_count == 4


class TestTargets:
    def test_gmm_potential_is_negative_log_density(self, d1_spec: GmmSpec):
        target = make_gmm(d1_spec)
        x = np.array([[1.0, 2.0], [9.0, 9.0]])

        np.testing.assert_allclose(target.potential(x), -d1_spec.log_density(x))
        assert target.second_moment_hint == pytest.approx(123.08)

    def test_gmm_smoothness_from_narrowest_component(self, d1_spec: GmmSpec):
        # 두 번째 성분의 공분산 고유값 0.1 이 가장 작습니다
        assert make_gmm(d1_spec).smoothness_hint == pytest.approx(10.0)

    @pytest.mark.parametrize("dim", [1, 2, 5])
    def test_standard_gaussian_smoothness(self, dim):
        assert make_standard_gaussian(dim).smoothness_hint == pytest.approx(1.0)

    def test_quadratic(self):
        target = make_quadratic(3, center=np.ones(3), curvature=2.0)

        assert target.potential(np.ones((1, 3)))[0] == 0.0
        assert target.potential(np.zeros((1, 3)))[0] == pytest.approx(3.0)
        assert target.smoothness_hint == 2.0

    def test_rejects_negative_second_moment(self, d1_spec: GmmSpec):
        with pytest.raises(ConfigurationError):
            replace(make_gmm(d1_spec), second_moment_hint=-1.0)


class TestAnnulus:
    def test_penalty_value(self):
        x = np.array([[7.3, 0.0]])

        assert annulus_penalty(x, 5.0, 11.0, 8.0)[0] == pytest.approx(56.0)

    @pytest.mark.parametrize("r", [4.9, 11.5, 0.0])
    def test_no_penalty_outside(self, r):
        assert annulus_penalty(np.array([[0.0, r]]), 5.0, 11.0, 8.0)[0] == 0.0

    def test_penalized_target(self, d1_spec: GmmSpec):
        base = make_gmm(d1_spec)
        target = apply_annulus_penalty(base, 5.0, 11.0, 8.0)
        x = np.array([[7.3, 0.0], [0.0, 0.0]])

        np.testing.assert_allclose(target.potential(x) - base.potential(x), [56.0, 0.0])
        assert target.gmm is None
        assert target.parent is base
        assert target.metadata["annulus"]["outer"] == 11.0

    def test_rejects_inverted_radii(self, d1_spec: GmmSpec):
        with pytest.raises(ConfigurationError):
            apply_annulus_penalty(make_gmm(d1_spec), 11.0, 5.0, 8.0)


class TestMuellerBrown:
    def test_center_is_local_minimum(self):
        target = make_mueller_brown(beta=0.1)
        center = np.asarray(target.metadata["center"])
        base = mueller_base_potential(center)[0]

        for offset in np.array([[0.01, 0], [-0.01, 0], [0, 0.01], [0, -0.01]]):
            assert mueller_base_potential(center + offset)[0] > base

    @pytest.mark.parametrize("standard_form", [False, True])
    def test_center_has_zero_gradient(self, standard_form):
        center = locate_mueller_center(standard_form)
        h = 1e-6
        diffs = [
            mueller_base_potential(center + e, standard_form)[0]
            - mueller_base_potential(center - e, standard_form)[0]
            for e in h * np.eye(2)
        ]

        np.testing.assert_allclose(np.asarray(diffs) / (2 * h), 0.0, atol=1e-3)

    def test_center_location(self):
        np.testing.assert_allclose(locate_mueller_center(), [-0.05, 0.467], atol=0.01)

    def test_proposal_scale_follows_beta(self):
        wide = make_mueller_brown(beta=0.1, center=np.zeros(2))
        narrow = make_mueller_brown(beta=0.4, center=np.zeros(2))

        np.testing.assert_allclose(
            wide.metadata["proposal_scale"], np.sqrt(2.0 / (0.1 * np.array([35.0136, 59.8399])))
        )
        np.testing.assert_allclose(
            narrow.metadata["proposal_scale"], np.asarray(wide.metadata["proposal_scale"]) / 2
        )

    def test_potential_includes_quadratic(self):
        target = make_mueller_brown(beta=0.1, center=np.array([0.0, 0.5]))
        x = np.array([[1.0, 0.5]])

        expected = 0.1 * (mueller_base_potential(x)[0] + 35.0136)
        assert target.potential(x)[0] == pytest.approx(expected)

    def test_rejects_nonpositive_beta(self):
        with pytest.raises(ConfigurationError):
            make_mueller_brown(beta=0.0)
