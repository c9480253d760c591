"""
지수 적분기 기반 역방향 확산 구동기

x_{k+1} = e^γ x_k + 2(e^γ - 1)·s(T - t_k, x_k) + √(e^{2γ} - 1)·ξ_k,  γ = t_{k+1} - t_k

점수를 RGO 기반 몬테카를로 추정기로 구하면 ZOD-MC, 임의의 점수 함수를 넘기면
일반 DDMC 구동기로 동작합니다.
"""

import logging
import math
from collections.abc import Callable
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import partial

import numpy as np

from zodmc.core.errors import (
    ArgumentError,
    ConfigurationError,
    RgoStarvedError,
    SamplerAbortedError,
)
from zodmc.services.rgo import (
    DEFAULT_BATCH_SIZE,
    DEFAULT_MAX_PROPOSALS,
    MinimizerOptions,
    MinTracker,
    expected_proposals,
    find_potential_min,
)
from zodmc.services.schedule import Schedule
from zodmc.services.score import (
    SampleCountPolicy,
    ScoreEstimate,
    ScoreFn,
    estimate_score,
    sample_count,
)
from zodmc.services.target import LedgerSnapshot, QueryLedger, Target


logger = logging.getLogger(__name__)

DEFAULT_OPT_RESTARTS = 8

StepObserver = Callable[[int, float, np.ndarray], None]


def ei_step(x_k: np.ndarray, s_k: np.ndarray, gamma: float, xi: np.ndarray) -> np.ndarray:
    if not gamma > 0:
        raise ArgumentError(f"간격 γ 는 양수여야 합니다. (gamma={gamma})")
    growth = math.exp(gamma)
    return growth * x_k + 2.0 * (growth - 1.0) * s_k + math.sqrt(math.expm1(2.0 * gamma)) * xi


@dataclass(frozen=True)
class ZodmcConfig:
    schedule: Schedule
    policy: SampleCountPolicy = field(default_factory=SampleCountPolicy)
    batch_size: int = 1
    seed: int = 0
    # None 이면 _resolve_opt_starts 의 기본 시작점을 씁니다
    opt_starts: tuple[np.ndarray, ...] | None = None
    record_trace: bool = False
    workers: int = 1
    max_total_queries: int | None = None
    rgo_batch_size: int = DEFAULT_BATCH_SIZE
    max_proposals: int | None = None
    fallback_max_proposals: int = DEFAULT_MAX_PROPOSALS
    optimizer: MinimizerOptions = field(default_factory=MinimizerOptions)

    def __post_init__(self):
        if self.batch_size < 1:
            raise ConfigurationError("궤적 수는 1 이상이어야 합니다.")
        if self.workers < 1:
            raise ConfigurationError("작업자 수는 1 이상이어야 합니다.")
        if self.opt_starts is not None and len(self.opt_starts) == 0:
            raise ConfigurationError("최적화 시작점이 비어 있습니다.")
        if self.max_total_queries is not None and self.max_total_queries < 1:
            raise ConfigurationError("질의 예산은 양수여야 합니다.")


@dataclass
class SampleBatch:
    points: np.ndarray
    ledger_snapshot: LedgerSnapshot
    per_step_acceptance: np.ndarray = field(default_factory=lambda: np.empty(0))
    trace: list[np.ndarray] | None = None
    truncated: bool = False
    steps_completed: int = 0
    envelope_violations: int = 0
    diverged: int = 0
    vstar: float | None = None
    metadata: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return int(self.points.shape[1])


def _resolve_opt_starts(
    target: Target, config: ZodmcConfig, seq: np.random.SeedSequence
) -> list[np.ndarray]:
    """원점, 알려진 혼합 분포 평균, 목표 크기에 맞춘 가우시안 표본 8개."""
    if config.opt_starts is not None:
        return [np.asarray(p, dtype=float).reshape(target.dim) for p in config.opt_starts]
    starts = [np.zeros(target.dim)]
    # 벌점을 씌운 목표는 원래 목표의 평균과 모멘트를 씁니다
    source = target if target.gmm is not None or target.parent is None else target.parent
    if source.gmm is not None:
        starts.extend(source.gmm.means)
    moment = source.second_moment_hint
    scale = max(1.0, math.sqrt(moment / target.dim)) if moment else 1.0
    draws = scale * np.random.default_rng(seq).standard_normal((DEFAULT_OPT_RESTARTS, target.dim))
    return [*starts, *draws]


def locate_global_tracker(
    target: Target, starts: list[np.ndarray], ledger: QueryLedger, opts: MinimizerOptions
) -> MinTracker:
    tracker: MinTracker | None = None
    for start in starts:
        candidate = find_potential_min(target, start, ledger, opts)
        if tracker is None or candidate.best_value < tracker.best_value:
            tracker = candidate
    if tracker is None or not np.isfinite(tracker.best_value):
        raise SamplerAbortedError(
            "유한한 포텐셜 최솟값을 찾지 못했습니다.", {"starts": len(starts)}, []
        )
    logger.info(f"V̂* 초기값 {tracker.best_value:.6g} @ {tracker.best_point.tolist()}")
    return tracker


def _advance_trajectory(
    target: Target,
    config: ZodmcConfig,
    ledger: QueryLedger,
    frozen: MinTracker,
    t: float,
    gamma: float,
    state: np.ndarray,
    rng: np.random.Generator,
) -> tuple[ScoreEstimate, MinTracker, np.ndarray]:
    """한 궤적의 점수를 추정합니다. 단계 시작 시점의 V̂* 사본에서 출발합니다."""
    local = frozen.snapshot()
    estimate = estimate_score(
        target,
        local,
        t,
        state,
        config.policy,
        ledger,
        rng,
        gamma=gamma,
        batch_size=config.rgo_batch_size,
        max_proposals=config.max_proposals,
        fallback_max_proposals=config.fallback_max_proposals,
    )
    return estimate, local, rng.standard_normal(target.dim)


def _mc_step(
    target: Target,
    config: ZodmcConfig,
    ledger: QueryLedger,
    tracker: MinTracker,
    executor: ThreadPoolExecutor | None,
    k: int,
    t: float,
    gamma: float,
    x: np.ndarray,
    traj_rngs: list[np.random.Generator],
    trace: list[np.ndarray] | None,
) -> tuple[np.ndarray, np.ndarray, int, int, float]:
    advance = partial(_advance_trajectory, target, config, ledger, tracker.snapshot(), t, gamma)
    try:
        if executor is None:
            results = list(map(advance, x, traj_rngs))
        else:
            results = list(executor.map(advance, x, traj_rngs))
    except RgoStarvedError as e:
        raise SamplerAbortedError(
            f"{k}번째 단계에서 RGO 가 고갈되어 실행을 중단합니다.",
            {
                "step": k,
                "t": t,
                "state": e.x.tolist(),
                "proposals_used": e.proposals_used,
                "ledger": ledger.by_phase,
            },
            trace or [x.copy()],
        ) from e

    # 병합은 항상 궤적 순서대로
    for _, local, _ in results:
        tracker.merge(local)

    scores = np.stack([r[0].value for r in results])
    noise = np.stack([r[2] for r in results])
    violations = sum(r[0].envelope_violations for r in results)
    if violations:
        logger.warning(f"{k}번째 단계 (t={t:.4g}): 낡은 V̂* 로 수락된 표본 {violations}개")
    fallbacks = sum(r[0].importance_fallback for r in results)
    if fallbacks:
        logger.warning(f"{k}번째 단계 (t={t:.4g}): 가중 평균으로 대체한 궤적 {fallbacks}개")
    rate = float(np.mean([r[0].acceptance_rate for r in results]))
    return scores, noise, violations, fallbacks, rate


def run_zodmc(
    target: Target,
    config: ZodmcConfig,
    ledger: QueryLedger,
    observer: StepObserver | None = None,
    score_fn: ScoreFn | None = None,
) -> SampleBatch:
    """궤적 batch_size 개를 표준 가우시안에서 시작해 T - δ 까지 역방향으로 진행합니다.

    score_fn 을 주면 몬테카를로 추정 대신 그 점수를 그대로 씁니다 (최적화도 생략).
    observer(k, t, x) 는 상태 x_k 와 그 순방향 시간 T - t_k 로 N + 1 번 호출됩니다.
    """
    schedule = config.schedule
    d = target.dim
    opt_seq, init_seq, traj_seq = np.random.SeedSequence(config.seed).spawn(3)
    traj_rngs = [np.random.default_rng(s) for s in traj_seq.spawn(config.batch_size)]

    tracker = None
    if score_fn is None:
        starts = _resolve_opt_starts(target, config, opt_seq)
        tracker = locate_global_tracker(target, starts, ledger, config.optimizer)

    x = np.random.default_rng(init_seq).standard_normal((config.batch_size, d))
    trace = [x.copy()] if config.record_trace else None
    acceptance: list[float] = []
    fallbacks: list[int] = []
    violations = 0
    truncated = False
    steps_completed = 0

    logger.info(
        f"ZOD-MC 시작: 목표={target.name}, 궤적 {config.batch_size}개, "
        f"{schedule.kind} 격자 N={schedule.N}, 정책={config.policy.kind}"
    )

    if observer is not None:
        observer(0, schedule.T, x)

    executor = ThreadPoolExecutor(config.workers) if config.workers > 1 else None
    try:
        for k in range(schedule.N):
            t = schedule.forward_time(k)
            gamma = float(schedule.gammas[k])

            if score_fn is not None:
                scores = np.atleast_2d(score_fn(t, x))
                noise = np.stack([rng.standard_normal(d) for rng in traj_rngs])
                acceptance.append(float("nan"))
            else:
                scores, noise, step_violations, step_fallbacks, rate = _mc_step(
                    target, config, ledger, tracker, executor, k, t, gamma, x, traj_rngs, trace
                )
                violations += step_violations
                fallbacks.append(step_fallbacks)
                acceptance.append(rate)

            x = ei_step(x, scores, gamma, noise)
            steps_completed = k + 1
            if trace is not None:
                trace.append(x.copy())
            if observer is not None:
                observer(k + 1, schedule.forward_time(k + 1), x)

            if (
                config.max_total_queries is not None
                and ledger.zeroth_order_count >= config.max_total_queries
                and k + 1 < schedule.N
            ):
                truncated = True
                logger.warning(
                    f"질의 예산 {config.max_total_queries} 도달: "
                    f"{k + 1}/{schedule.N} 단계에서 멈춥니다."
                )
                break
    finally:
        if executor is not None:
            executor.shutdown()

    snapshot = ledger.snapshot()
    logger.info(f"ZOD-MC 완료: 총 질의 {snapshot.zeroth_order_count}, 위반 {violations}")
    return SampleBatch(
        points=x,
        ledger_snapshot=snapshot,
        per_step_acceptance=np.asarray(acceptance),
        trace=trace,
        truncated=truncated,
        steps_completed=steps_completed,
        envelope_violations=violations,
        vstar=tracker.best_value if tracker is not None else None,
        metadata={
            "schedule": schedule.to_dict(),
            "policy": config.policy.kind,
            "importance_fallbacks": sum(fallbacks),
            "importance_fallbacks_per_step": fallbacks,
        },
    )


def expected_query_complexity(
    schedule: Schedule,
    L: float,
    xstar: np.ndarray,
    states: np.ndarray,
    policy: SampleCountPolicy,
    cov_hint: float | None = None,
) -> float:
    """격자 전체에서 RGO 가 쓸 기대 질의 수의 합. 최적화 비용은 포함하지 않습니다.

    states 는 단계별 상태 (N, d) 또는 궤적 여러 개의 (N, m, d) 입니다.
    """
    states = np.asarray(states, dtype=float)
    if states.ndim == 2:
        states = states[:, None, :]
    if states.ndim != 3 or states.shape[0] != schedule.N:
        raise ArgumentError(
            f"상태 배열은 (N, d) 또는 (N, m, d) 이어야 합니다. (N={schedule.N}, {states.shape})"
        )
    d = states.shape[2]
    cov_hint = float(d) if cov_hint is None else cov_hint

    total = 0.0
    for k in range(schedule.N):
        t = schedule.forward_time(k)
        n = sample_count(policy, t, cov_hint, float(schedule.gammas[k]))
        if policy.kind == "proposals":
            total += n * states.shape[1]
            continue
        total += sum(expected_proposals(L, t, x, xstar, d, n) for x in states[k])
    return total
