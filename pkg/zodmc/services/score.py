"""
몬테카를로 점수 추정

s(t, x) = (1/n) Σᵢ (e^{-t} zᵢ - x) / (1 - e^{-2t}),  zᵢ ~ p_{0|t}(· | x)

RGO 가 정확한 표본을 주므로 추정량의 δ(t) 항은 항상 0 이고, 실행 시 조절 인자로
두지 않습니다. 예외는 proposals 정책에서 K 개 제안 중 수락이 하나도 없을 때로,
이때는 같은 제안들의 자기정규화 중요도 평균을 쓰며 편향이 생길 수 있습니다.
"""

import logging
import math
from collections.abc import Callable
from dataclasses import dataclass
from typing import Literal

import numpy as np

from zodmc.core.errors import ArgumentError, ConfigurationError, UnsupportedTargetError
from zodmc.services.ou import sample_ou_marginal
from zodmc.services.rgo import (
    DEFAULT_BATCH_SIZE,
    DEFAULT_MAX_PROPOSALS,
    MinTracker,
    RgoRequest,
    default_max_proposals,
    rgo_fire,
    rgo_sample,
)
from zodmc.services.target import QueryLedger, Target


logger = logging.getLogger(__name__)

PolicyKind = Literal["fixed", "theory", "proposals", "step_scaled"]

ScoreFn = Callable[[float, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class SampleCountPolicy:
    """시간 t 에서 점수 한 번에 쓸 표본 수 n(t) 를 정합니다.

    - fixed: 항상 n_fixed 개의 정확한 표본
    - theory: clamp(⌈c·tr Cov·e^{-2t}/(1 - e^{-2t})²/ε²⌉, n_min, n_max)
    - step_scaled: clamp(⌈c·γ_k⁻¹·e^{-2t}⌉, n_min, n_max)
    - proposals: 표본 수 대신 제안 수 K 를 고정하고 수락된 표본을 모두 평균
    """

    kind: PolicyKind = "fixed"
    n_fixed: int = 100
    c: float = 1.0
    eps: float = 0.5
    n_min: int = 1
    n_max: int = 10_000
    proposals: int = 2200

    def __post_init__(self):
        if self.n_fixed < 1 or self.proposals < 1:
            raise ConfigurationError("표본 수와 제안 수는 1 이상이어야 합니다.")
        if self.n_min < 1 or self.n_max < self.n_min:
            raise ConfigurationError(
                f"1 ≤ n_min ≤ n_max 이어야 합니다. (n_min={self.n_min}, n_max={self.n_max})"
            )
        if self.c <= 0 or self.eps <= 0:
            raise ConfigurationError("c 와 eps 는 양수여야 합니다.")


@dataclass(frozen=True)
class ScoreEstimate:
    t: float
    x: np.ndarray
    value: np.ndarray
    n_used: int
    proposals_used: int
    envelope_violations: int = 0
    vstar_improved: bool = False
    completed: bool = True
    # 수락이 없어 같은 제안들의 중요도 가중 평균으로 대신한 경우
    importance_fallback: bool = False

    @property
    def acceptance_rate(self) -> float:
        return self.n_used / self.proposals_used if self.proposals_used else 0.0


def _clamp(value: float, policy: SampleCountPolicy) -> int:
    return int(min(max(math.ceil(value), policy.n_min), policy.n_max))


def sample_count(
    policy: SampleCountPolicy, t: float, cov_hint: float, gamma: float | None = None
) -> int:
    """proposals 정책에서는 표본 수가 아니라 점수 한 번에 쏠 제안 수를 돌려줍니다."""
    if not t > 0:
        raise ArgumentError(f"시간은 양수여야 합니다. (t={t})")

    match policy.kind:
        case "fixed":
            return policy.n_fixed
        case "proposals":
            return policy.proposals
        case "theory":
            decay = math.exp(-2.0 * t)
            noise = -math.expm1(-2.0 * t)
            return _clamp(policy.c * cov_hint * decay / noise**2 / policy.eps**2, policy)
        case "step_scaled":
            if gamma is None or gamma <= 0:
                raise ArgumentError("step_scaled 정책에는 양의 간격 γ 가 필요합니다.")
            return _clamp(policy.c / gamma * math.exp(-2.0 * t), policy)
    raise ConfigurationError(f"알 수 없는 정책입니다: {policy.kind}")


def score_from_samples(t: float, x: np.ndarray, samples: np.ndarray) -> np.ndarray:
    shrink = math.exp(-t)
    noise = -math.expm1(-2.0 * t)
    return np.mean((shrink * samples - x) / noise, axis=0)


def posterior_variance_bound(t: float, trace_cov: float, n: int) -> float:
    """δ(t) = 0 일 때 E‖s - ∇log p_t‖² 의 상계 e^{-2t}/(1 - e^{-2t})²·tr Cov/n."""
    if not t > 0 or n < 1:
        raise ArgumentError(f"t > 0, n ≥ 1 이어야 합니다. (t={t}, n={n})")
    return math.exp(-2.0 * t) / math.expm1(-2.0 * t) ** 2 * trace_cov / n


def estimate_score(
    target: Target,
    tracker: MinTracker,
    t: float,
    x: np.ndarray,
    policy: SampleCountPolicy,
    ledger: QueryLedger,
    rng: np.random.Generator,
    gamma: float | None = None,
    cov_hint: float | None = None,
    batch_size: int = DEFAULT_BATCH_SIZE,
    max_proposals: int | None = None,
    fallback_max_proposals: int = DEFAULT_MAX_PROPOSALS,
) -> ScoreEstimate:
    if not t > 0:
        raise ArgumentError(f"시간은 양수여야 합니다. (t={t})")
    x = np.asarray(x, dtype=float).reshape(target.dim)
    if cov_hint is None:
        cov_hint = target.covariance_trace_hint or float(target.dim)
    n = sample_count(policy, t, cov_hint, gamma)

    if policy.kind == "proposals":
        result = rgo_fire(target, tracker, t, x, n, ledger, rng, batch_size=batch_size)
        samples = result.samples
        fallback = samples.shape[0] == 0
        if fallback:
            # 예산 K 안에서 끝냅니다. 가중치가 모두 0 이면 V̂* 지점을 씁니다
            center = result.importance_mean
            samples = (tracker.best_point if center is None else center)[None, :]
            logger.debug(f"t={t:.4g}: K={n} 제안 중 수락 없음, 중요도 가중 평균으로 대체")
        return ScoreEstimate(
            t=t,
            x=x,
            value=score_from_samples(t, x, samples),
            n_used=int(result.samples.shape[0]),
            proposals_used=result.proposals_used,
            envelope_violations=result.envelope_violations,
            vstar_improved=result.vstar_improved,
            importance_fallback=fallback,
        )

    cap = max_proposals or default_max_proposals(
        target, tracker, t, x, n, fallback=fallback_max_proposals
    )
    result = rgo_sample(
        target, tracker, RgoRequest(t=t, x=x, n=n, max_proposals=cap), ledger, rng,
        batch_size=batch_size,
    )
    return ScoreEstimate(
        t=t,
        x=x,
        value=score_from_samples(t, x, result.samples),
        n_used=int(result.samples.shape[0]),
        proposals_used=result.proposals_used,
        envelope_violations=result.envelope_violations,
        vstar_improved=result.vstar_improved,
        completed=result.completed,
    )


def mc_score_estimator(
    target: Target,
    tracker: MinTracker,
    policy: SampleCountPolicy,
    ledger: QueryLedger,
    rng: np.random.Generator,
    **kwargs,
) -> ScoreFn:
    """(t, x) 를 받아 추정 점수를 돌려주는 함수. x 는 (d,) 또는 (m, d)."""

    def estimator(t: float, x: np.ndarray) -> np.ndarray:
        x_arr = np.asarray(x, dtype=float)
        points = np.atleast_2d(x_arr)
        values = np.stack(
            [
                estimate_score(target, tracker, t, p, policy, ledger, rng, **kwargs).value
                for p in points
            ]
        )
        return values[0] if x_arr.ndim == 1 else values

    return estimator


def score_l2_error(
    target: Target,
    t: float,
    estimator: ScoreFn,
    n_eval_points: int,
    rng: np.random.Generator,
) -> tuple[float, float]:
    """X ~ p_t 에서 ‖s(t, X) - ∇log p_t(X)‖² 의 평균과 표준편차."""
    if target.analytic_score_at_time is None or target.gmm is None:
        raise UnsupportedTargetError(
            f"'{target.name}' 목표는 해석적 점수가 없어 점수 오차를 잴 수 없습니다."
        )
    if n_eval_points < 1:
        raise ArgumentError("평가 지점 수는 1 이상이어야 합니다.")

    points = sample_ou_marginal(target.gmm, t, n_eval_points, rng)
    exact = np.atleast_2d(target.analytic_score_at_time(t, points))
    estimated = np.atleast_2d(estimator(t, points))
    errors = np.sum((estimated - exact) ** 2, axis=1)
    return float(np.mean(errors)), float(np.std(errors))
