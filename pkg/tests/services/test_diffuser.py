import math
from dataclasses import replace

import numpy as np
import pytest

from zodmc.core.errors import ArgumentError, ConfigurationError, SamplerAbortedError
from zodmc.services.diffuser import (
    DEFAULT_OPT_RESTARTS,
    ZodmcConfig,
    _resolve_opt_starts,
    ei_step,
    expected_query_complexity,
    locate_global_tracker,
    run_zodmc,
)
from zodmc.services.gmm import GmmSpec
from zodmc.services.rgo import MinimizerOptions
from zodmc.services.schedule import build_schedule
from zodmc.services.score import SampleCountPolicy
from zodmc.services.target import (
    QueryLedger,
    apply_annulus_penalty,
    make_gmm,
    make_mueller_brown,
    make_quadratic,
)


@pytest.fixture
def short_schedule():
    return build_schedule("constant", 2.0, 5, 0.01)


@pytest.fixture
def small_config(short_schedule):
    return ZodmcConfig(
        schedule=short_schedule,
        policy=SampleCountPolicy(kind="fixed", n_fixed=5),
        batch_size=40,
        seed=11,
        opt_starts=(np.zeros(2),),
    )


class TestEiStep:
    def test_noise_only(self):
        x = ei_step(np.zeros(2), np.zeros(2), math.log(2.0), np.array([1.0, 0.0]))

        np.testing.assert_allclose(x, [math.sqrt(3.0), 0.0])

    def test_vectorized(self):
        x = np.ones((4, 3))

        out = ei_step(x, -x, 0.1, np.zeros((4, 3)))

        np.testing.assert_allclose(out, (2 - math.exp(0.1)) * x)

    def test_rejects_nonpositive_gamma(self):
        with pytest.raises(ArgumentError):
            ei_step(np.zeros(2), np.zeros(2), 0.0, np.zeros(2))


class TestZodmcConfig:
    def test_rejects_empty_batch(self, short_schedule):
        with pytest.raises(ConfigurationError):
            ZodmcConfig(schedule=short_schedule, batch_size=0)

    def test_rejects_empty_starts(self, short_schedule):
        with pytest.raises(ConfigurationError):
            ZodmcConfig(schedule=short_schedule, opt_starts=())


class TestRunWithExactScore:
    def test_linear_score_variance_recursion(self):
        schedule = build_schedule("exp_decay", 2.0, 25, 5e-3)
        config = ZodmcConfig(schedule=schedule, batch_size=20_000, seed=1)

        batch = run_zodmc(make_quadratic(2), config, QueryLedger(), score_fn=lambda t, x: -x)

        # 점수가 -x 이면 각 단계는 v ← (2 - e^γ)²v + e^{2γ} - 1 로 분산을 옮깁니다
        v = 1.0
        for gamma in schedule.gammas:
            v = (2 - math.exp(gamma)) ** 2 * v + math.expm1(2 * gamma)
        np.testing.assert_allclose(batch.points.mean(axis=0), 0.0, atol=0.05)
        np.testing.assert_allclose(batch.points.var(axis=0), v, rtol=0.05)
        assert batch.ledger_snapshot.zeroth_order_count == 0


class TestRunZodmc:
    def test_basic_run(self, small_config):
        ledger = QueryLedger()

        batch = run_zodmc(make_quadratic(2), small_config, ledger)

        assert batch.points.shape == (40, 2)
        assert batch.steps_completed == 5
        assert not batch.truncated
        assert batch.per_step_acceptance.shape == (5,)
        assert ledger.by_phase["optimization"] > 0
        assert ledger.by_phase["score-estimation"] > 0
        assert batch.metadata["schedule"]["N"] == 5
        assert batch.vstar == pytest.approx(0.0, abs=1e-7)

    def test_same_seed_same_output(self, small_config):
        a = run_zodmc(make_quadratic(2), small_config, QueryLedger())
        b = run_zodmc(make_quadratic(2), small_config, QueryLedger())

        np.testing.assert_array_equal(a.points, b.points)

    def test_worker_count_does_not_change_output(self, small_config):
        serial = run_zodmc(make_quadratic(2), small_config, QueryLedger())
        threaded = run_zodmc(make_quadratic(2), replace(small_config, workers=4), QueryLedger())

        np.testing.assert_array_equal(serial.points, threaded.points)

    def test_observer_sees_every_state(self, small_config):
        seen = []

        run_zodmc(
            make_quadratic(2),
            small_config,
            QueryLedger(),
            observer=lambda k, t, x: seen.append((k, t, x.shape)),
        )

        assert [k for k, _, _ in seen] == list(range(6))
        assert seen[0][1] == pytest.approx(2.0)
        assert seen[-1][1] == pytest.approx(0.01)
        assert all(shape == (40, 2) for _, _, shape in seen)

    def test_budget_truncation(self, small_config):
        config = replace(small_config, max_total_queries=1)

        batch = run_zodmc(make_quadratic(2), config, QueryLedger())

        assert batch.truncated
        assert batch.steps_completed == 1

    def test_starved_rgo_aborts_with_diagnostics(self, short_schedule):
        target = make_quadratic(2, center=np.full(2, 50.0))
        config = ZodmcConfig(
            schedule=short_schedule,
            policy=SampleCountPolicy(kind="fixed", n_fixed=1),
            batch_size=2,
            opt_starts=(np.full(2, 50.0),),
            max_proposals=10,
        )
        # 최적화는 정확한 최솟값을 찾지만 궤적은 원점 근처라 수락 확률이 0 에 가깝습니다
        with pytest.raises(SamplerAbortedError) as exc_info:
            run_zodmc(target, config, QueryLedger())

        assert exc_info.value.diagnostics["step"] == 0
        assert exc_info.value.diagnostics["proposals_used"] == 10


    def test_sparse_acceptance_is_recorded(self, d1_spec: GmmSpec):
        config = ZodmcConfig(
            schedule=build_schedule("exp_decay", 2.0, 5, 0.05),
            policy=SampleCountPolicy(kind="proposals", proposals=50),
            batch_size=30,
            seed=3,
        )
        ledger = QueryLedger()

        batch = run_zodmc(make_gmm(d1_spec), config, ledger)

        assert batch.steps_completed == 5
        assert ledger.by_phase["score-estimation"] == 5 * 30 * 50
        assert np.all(np.isfinite(batch.points))
        per_step = batch.metadata["importance_fallbacks_per_step"]
        assert len(per_step) == 5
        assert batch.metadata["importance_fallbacks"] == sum(per_step) > 0


class TestOptStarts:
    def test_mixture_starts_include_means(self, short_schedule, d1_spec: GmmSpec):
        config = ZodmcConfig(schedule=short_schedule)
        seq = np.random.SeedSequence(0)

        starts = _resolve_opt_starts(make_gmm(d1_spec), config, seq)

        assert len(starts) == 1 + 4 + DEFAULT_OPT_RESTARTS
        np.testing.assert_array_equal(starts[0], np.zeros(2))
        np.testing.assert_array_equal(np.stack(starts[1:5]), d1_spec.means)

    def test_penalized_target_uses_parent_means(self, short_schedule, d1_spec: GmmSpec):
        target = apply_annulus_penalty(make_gmm(d1_spec), 5.0, 11.0, 8.0)

        starts = _resolve_opt_starts(
            target, ZodmcConfig(schedule=short_schedule), np.random.SeedSequence(0)
        )

        np.testing.assert_array_equal(np.stack(starts[1:5]), d1_spec.means)

    def test_draws_scale_with_second_moment(self, short_schedule, d1_spec: GmmSpec):
        config = ZodmcConfig(schedule=short_schedule)
        target = make_gmm(d1_spec)

        wide = _resolve_opt_starts(target, config, np.random.SeedSequence(0))[5:]
        unit = _resolve_opt_starts(make_mueller_brown(), config, np.random.SeedSequence(0))[1:]

        ratio = math.sqrt(target.second_moment_hint / 2)
        np.testing.assert_allclose(np.stack(wide), ratio * np.stack(unit))

    def test_explicit_starts_win(self, short_schedule, d1_spec: GmmSpec):
        config = ZodmcConfig(schedule=short_schedule, opt_starts=(np.ones(2),))

        starts = _resolve_opt_starts(make_gmm(d1_spec), config, np.random.SeedSequence(0))

        assert len(starts) == 1

    def test_default_starts_find_global_minimum(self, short_schedule, d1_spec: GmmSpec):
        target = make_gmm(d1_spec)
        starts = _resolve_opt_starts(
            target, ZodmcConfig(schedule=short_schedule), np.random.SeedSequence(0)
        )

        tracker = locate_global_tracker(target, starts, QueryLedger(), MinimizerOptions())

        peak = 0.2 / (2 * math.pi * math.sqrt(0.05))
        assert tracker.best_value == pytest.approx(-math.log(peak), abs=1e-3)
        np.testing.assert_allclose(tracker.best_point, [0.0, 11.0], atol=0.05)


class TestExpectedQueryComplexity:
    def test_fixed_policy_at_origin(self, short_schedule):
        policy = SampleCountPolicy(kind="fixed", n_fixed=3)
        states = np.zeros((5, 2))

        total = expected_query_complexity(short_schedule, 1.0, np.zeros(2), states, policy)

        expected = sum(3 * math.exp(2 * t) for t in short_schedule.forward_times())
        assert total == pytest.approx(expected)

    def test_proposals_policy_is_exact(self, short_schedule):
        policy = SampleCountPolicy(kind="proposals", proposals=100)
        states = np.zeros((5, 7, 2))

        total = expected_query_complexity(short_schedule, 1.0, np.zeros(2), states, policy)

        assert total == 5 * 7 * 100

    def test_rejects_wrong_shape(self, short_schedule):
        with pytest.raises(ArgumentError):
            expected_query_complexity(
                short_schedule, 1.0, np.zeros(2), np.zeros((4, 2)), SampleCountPolicy()
            )
