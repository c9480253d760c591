"""
점수 오차 / RGO 수락 수 측정 실험
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from zodmc.core.config import get_settings
from zodmc.core.errors import UnsupportedTargetError
from zodmc.schemas.experiment import AcceptanceStudyConfig, ScoreErrorStudyConfig
from zodmc.services.diffuser import ZodmcConfig, locate_global_tracker, run_zodmc
from zodmc.services.rgo import MinimizerOptions, MinTracker, expected_proposals, rgo_fire
from zodmc.services.score import (
    mc_score_estimator,
    posterior_variance_bound,
    sample_count,
    score_l2_error,
)
from zodmc.services.target import QueryLedger, Target
from zodmc.util.io import write_rows_csv


logger = logging.getLogger(__name__)

ACCEPTANCE_SCALE = 10_000


def _output_dir(name: str, config_dir: str | None, override: str | Path | None) -> Path:
    return Path(override or config_dir or get_settings().output_dir) / name


def run_score_error_study(
    config: ScoreErrorStudyConfig,
    seed: int | None = None,
    output_dir: str | Path | None = None,
    workers: int | None = None,
) -> Path:
    """격자의 각 시간 t 에서 E‖s(t, X) - ∇log p_t(X)‖² 를 측정해 CSV 로 남깁니다.

    시간마다 독립된 난수열과 V̂* 사본을 쓰므로 workers 개의 스레드로 나눠도 결과가 같습니다.
    """
    settings = get_settings()
    seed = config.seed if seed is None else seed
    workers = workers or settings.workers
    target = config.target.build(seed)
    if target.analytic_score_at_time is None or target.gmm is None:
        raise UnsupportedTargetError(
            f"'{target.name}' 목표는 해석적 점수가 없어 점수 오차 실험을 할 수 없습니다."
        )

    schedule = config.schedule.build()
    policy = config.policy.build(config.oracle_budget)
    times = schedule.forward_times().tolist()
    if config.include_delta:
        times.append(schedule.delta)

    ledger = QueryLedger()
    starts = [np.zeros(target.dim), *target.gmm.means]
    tracker = locate_global_tracker(target, starts, ledger, MinimizerOptions())
    seqs = np.random.SeedSequence(seed).spawn(len(times))
    trace_cov = target.covariance_trace_hint

    def measure(t: float, seq: np.random.SeedSequence) -> dict:
        rng = np.random.default_rng(seq)
        estimator = mc_score_estimator(
            target,
            tracker.snapshot(),
            policy,
            ledger,
            rng,
            batch_size=settings.rgo_batch_size,
            fallback_max_proposals=settings.max_proposals,
        )
        mean, std = score_l2_error(target, t, estimator, config.n_eval_points, rng)
        bound = None
        if trace_cov is not None and policy.kind in ("fixed", "theory"):
            bound = posterior_variance_bound(t, trace_cov, sample_count(policy, t, trace_cov))
        logger.info(f"t={t:.4g}: 점수 오차 {mean:.4g} ± {std:.4g}")
        return {"t": t, "mean": mean, "std": std, "bound": bound}

    with ThreadPoolExecutor(workers) as executor:
        rows = list(executor.map(measure, times, seqs))

    path = _output_dir(config.name, config.output_dir, output_dir) / "score_error.csv"
    write_rows_csv(path, ("t", "mean", "std", "bound"), rows)
    logger.info(f"점수 오차 실험 완료: 총 질의 {ledger.zeroth_order_count}")
    return path


def measure_acceptance(
    target: Target,
    tracker: MinTracker,
    t: float,
    states: np.ndarray,
    n_proposals: int,
    ledger: QueryLedger,
    rng: np.random.Generator,
) -> tuple[float, float, float | None]:
    """상태마다 n_proposals 개를 제안해 1만 개당 수락 수의 평균, 표준편차, 이론값을 돌려줍니다.

    이론값은 L 힌트가 있을 때만 10⁴ / expected_proposals 의 평균으로 계산합니다.
    """
    states = np.atleast_2d(states)
    counts = np.array(
        [
            rgo_fire(target, tracker, t, x, n_proposals, ledger, rng).accepted_total
            for x in states
        ],
        dtype=float,
    )
    counts *= ACCEPTANCE_SCALE / n_proposals

    predicted = None
    if target.smoothness_hint is not None:
        L = target.smoothness_hint
        predicted = float(
            np.mean(
                [
                    ACCEPTANCE_SCALE / expected_proposals(L, t, x, tracker.best_point, target.dim)
                    for x in states
                ]
            )
        )
    return float(np.mean(counts)), float(np.std(counts)), predicted


def run_acceptance_study(
    config: AcceptanceStudyConfig,
    seed: int | None = None,
    output_dir: str | Path | None = None,
    workers: int | None = None,
) -> Path:
    """ZOD-MC 궤적을 따라가며 각 시간에서 RGO 수락 수를 측정합니다."""
    settings = get_settings()
    seed = config.seed if seed is None else seed
    workers = workers or settings.workers
    target = config.target.build(seed)
    run_seq, measure_seq = np.random.SeedSequence(seed).spawn(2)
    alg = config.algorithm

    measure_ledger = QueryLedger()
    measure_rng = np.random.default_rng(measure_seq)
    starts = [np.zeros(target.dim)]
    if target.gmm is not None:
        starts.extend(target.gmm.means)
    measure_tracker = locate_global_tracker(target, starts, measure_ledger, MinimizerOptions())

    rows = []

    def observe(k: int, t: float, states: np.ndarray) -> None:
        mean, std, predicted = measure_acceptance(
            target,
            measure_tracker,
            t,
            states,
            config.acceptance_proposals,
            measure_ledger,
            measure_rng,
        )
        rows.append(
            {
                "t": t,
                "mean_accepted_per_1e4": mean,
                "std": std,
                "trajectories": states.shape[0],
                "predicted": predicted,
            }
        )
        logger.info(f"{k}번째 시점 t={t:.4g}: 1만 개당 수락 {mean:.4g} ± {std:.4g}")

    zodmc_config = ZodmcConfig(
        schedule=alg.schedule.build(),
        policy=alg.policy.build(config.oracle_budget),
        batch_size=config.trajectories,
        seed=int(run_seq.generate_state(1)[0]),
        opt_starts=None if alg.opt_starts is None else tuple(map(np.asarray, alg.opt_starts)),
        rgo_batch_size=alg.rgo_batch_size or settings.rgo_batch_size,
        fallback_max_proposals=settings.max_proposals,
        workers=workers,
    )
    run_zodmc(target, zodmc_config, QueryLedger(), observer=observe)

    path = _output_dir(config.name, config.output_dir, output_dir) / "acceptance.csv"
    columns = ("t", "mean_accepted_per_1e4", "std", "trajectories", "predicted")
    write_rows_csv(path, columns, rows)
    logger.info(f"수락 수 실험 완료: 측정 질의 {measure_ledger.zeroth_order_count}")
    return path
