"""
비교용 기준 샘플러

- ULA: 유한차분 기울기(단계·체인당 2d 질의)를 쓰는 비조정 랑주뱅
- 정답 기각 샘플링: 전체 목표에 대한 고전적 기각 샘플링 (느리지만 편향 없음)
"""

import logging
import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

from zodmc.core.errors import (
    ArgumentError,
    ConfigurationError,
    DominationViolationError,
    RgoStarvedError,
    UnsupportedTargetError,
)
from zodmc.services.diffuser import SampleBatch
from zodmc.services.gmm import GmmSpec
from zodmc.services.rgo import DEFAULT_BATCH_SIZE, central_difference_gradient
from zodmc.services.target import QueryLedger, Target, eval_potential


logger = logging.getLogger(__name__)

DIVERGENCE_RADIUS = 1e8
DOMINATION_TOL = 1e-9


@dataclass(frozen=True)
class UlaConfig:
    step: float = 0.01
    n_steps: int = 1000
    n_chains: int = 1024
    init: Literal["origin", "gaussian"] = "origin"
    fd_step: float = 1e-4

    def __post_init__(self):
        if not self.step > 0 or not self.fd_step > 0:
            raise ConfigurationError(f"스텝 크기는 양수여야 합니다. (step={self.step})")
        if self.n_steps < 0 or self.n_chains < 1:
            raise ConfigurationError("단계 수는 0 이상, 체인 수는 1 이상이어야 합니다.")


def matched_ula_steps(queries_per_chain: int, dim: int) -> int:
    """체인 하나에 queries_per_chain 개의 질의를 쓸 때 가능한 ULA 단계 수."""
    return max(queries_per_chain // (2 * dim), 1)


def run_ula(
    target: Target,
    config: UlaConfig,
    ledger: QueryLedger,
    rng: np.random.Generator,
    max_total_queries: int | None = None,
) -> SampleBatch:
    """x ← x - h·∇̂V(x) + √(2h)·ξ. 발산한 체인은 멈추고 결과에서 제외합니다."""
    d = target.dim
    if config.init == "origin":
        x = np.zeros((config.n_chains, d))
    else:
        x = rng.standard_normal((config.n_chains, d))
    alive = np.ones(config.n_chains, dtype=bool)
    noise_scale = math.sqrt(2.0 * config.step)
    truncated = False
    steps_completed = 0

    for k in range(config.n_steps):
        # 발산 여부와 무관하게 모든 체인이 같은 난수를 소비합니다
        noise = rng.standard_normal((config.n_chains, d))
        idx = np.flatnonzero(alive)
        if idx.size == 0:
            break
        grad = central_difference_gradient(
            target, x[idx], ledger, "baseline", step=config.fd_step
        )
        x[idx] = x[idx] - config.step * grad + noise_scale * noise[idx]

        moved = x[idx]
        bad = ~np.isfinite(moved).all(axis=1) | (np.linalg.norm(moved, axis=1) > DIVERGENCE_RADIUS)
        alive[idx[bad]] = False
        steps_completed = k + 1

        if max_total_queries is not None and ledger.zeroth_order_count >= max_total_queries:
            truncated = steps_completed < config.n_steps
            break

    diverged = int(np.count_nonzero(~alive))
    if diverged:
        logger.warning(f"ULA 체인 {diverged}/{config.n_chains}개가 발산했습니다.")
    return SampleBatch(
        points=x[alive],
        ledger_snapshot=ledger.snapshot(),
        truncated=truncated,
        steps_completed=steps_completed,
        diverged=diverged,
        metadata={"algorithm": "ula", "step": config.step, "fd_gradient_queries": 2 * d},
    )


@dataclass(frozen=True, eq=False)
class GmmProposal:
    """기각 샘플링 제안 분포. 가우시안은 성분이 하나인 혼합으로 표현합니다."""

    spec: GmmSpec

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return self.spec.sample(rng, n)

    def log_density(self, x: np.ndarray) -> np.ndarray:
        return self.spec.log_density(x)


def gaussian_proposal(mean: np.ndarray, cov: np.ndarray) -> GmmProposal:
    mean = np.asarray(mean, dtype=float)
    return GmmProposal(
        GmmSpec(weights=np.ones(1), means=mean[None, :], covariances=np.asarray(cov)[None])
    )


def inflate_proposal(spec: GmmSpec, factor: float) -> GmmProposal:
    return GmmProposal(
        GmmSpec(weights=spec.weights, means=spec.means, covariances=factor * spec.covariances)
    )


def fit_envelope_constant(
    target: Target,
    proposal: GmmProposal,
    lower: np.ndarray,
    upper: np.ndarray,
    ledger: QueryLedger,
    resolution: int = 401,
    safety: float = 1.5,
) -> float:
    """격자에서 log(exp(-V)/q) 의 최댓값을 구하고 안전 계수를 더한 log M 을 돌려줍니다."""
    if safety < 1:
        raise ArgumentError("안전 계수는 1 이상이어야 합니다.")
    axes = [np.linspace(lo, hi, resolution) for lo, hi in zip(lower, upper, strict=True)]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, target.dim)
    values = np.asarray(eval_potential(target, grid, ledger, "ground-truth"))
    log_ratio = -values - proposal.log_density(grid)
    log_m = float(np.max(log_ratio[np.isfinite(log_ratio)])) + math.log(safety)
    logger.info(f"포락 상수 log M={log_m:.6g} (격자 {grid.shape[0]}점)")
    return log_m


def exact_envelope_constant(
    target: Target, proposal: GmmProposal, ledger: QueryLedger
) -> float:
    """exp(-V) 가 q 에 비례할 때의 정확한 log M. 한 점에서 계산합니다."""
    anchor = proposal.spec.means[:1]
    value = np.asarray(eval_potential(target, anchor, ledger, "ground-truth"))
    return float(-value[0] - proposal.log_density(anchor)[0])


def default_envelope(target: Target, ledger: QueryLedger) -> tuple[GmmProposal, float]:
    """목표 종류별 기본 제안 분포와 log M.

    혼합 분포는 자기 자신, 고리 벌점 목표는 벌점 없는 부모 혼합 분포를 제안으로 쓰고
    (벌점은 밀도를 낮추기만 하므로 M 이 그대로 유효), 그 밖에는 metadata 의 중심과
    상자로 가우시안 제안을 만든 뒤 격자 감사로 M 을 정합니다.
    """
    if target.gmm is not None:
        proposal = GmmProposal(target.gmm)
        return proposal, exact_envelope_constant(target, proposal, ledger)
    if target.parent is not None and target.parent.gmm is not None:
        proposal = GmmProposal(target.parent.gmm)
        return proposal, exact_envelope_constant(target.parent, proposal, ledger)
    if "center" in target.metadata:
        center = np.asarray(target.metadata["center"], dtype=float)
        scale = np.asarray(target.metadata.get("proposal_scale", np.full(target.dim, 0.5)))
        proposal = gaussian_proposal(center, np.diag(scale**2))
        half_width = 4.0 * scale
        log_m = fit_envelope_constant(
            target, proposal, center - half_width, center + half_width, ledger
        )
        return proposal, log_m
    raise UnsupportedTargetError(f"'{target.name}' 목표에 쓸 기본 제안 분포가 없습니다.")


def ground_truth_rejection(
    target: Target,
    proposal: GmmProposal,
    log_m: float,
    n: int,
    ledger: QueryLedger,
    rng: np.random.Generator,
    max_proposals: int = 100_000_000,
    batch_size: int = DEFAULT_BATCH_SIZE * 16,
) -> SampleBatch:
    """exp(-V) ≤ M·q 를 모든 제안에서 감사하며 n 개의 정확한 표본을 뽑습니다."""
    if n < 1:
        raise ArgumentError("표본 수는 1 이상이어야 합니다.")
    chunks: list[np.ndarray] = []
    accepted = 0
    proposals = 0
    log_tol = math.log1p(DOMINATION_TOL)

    while accepted < n and proposals < max_proposals:
        size = min(batch_size, max_proposals - proposals)
        z = proposal.sample(rng, size)
        u = rng.uniform(0.0, 1.0, size=size)
        values = np.asarray(eval_potential(target, z, ledger, "ground-truth"))
        log_ratio = -values - log_m - proposal.log_density(z)
        proposals += size

        worst = int(np.argmax(log_ratio))
        if log_ratio[worst] > log_tol:
            raise DominationViolationError(z[worst], float(np.exp(log_ratio[worst])))

        keep = np.log(np.maximum(u, np.finfo(float).tiny)) <= log_ratio
        chunks.append(z[keep])
        accepted += int(np.count_nonzero(keep))

    if accepted < n:
        raise RgoStarvedError(proposals, 0.0, proposal.spec.means[0])

    logger.info(f"정답 표본 {n}개 생성 (수락률 {accepted / proposals:.4g})")
    return SampleBatch(
        points=np.concatenate(chunks, axis=0)[:n],
        ledger_snapshot=ledger.snapshot(),
        metadata={"algorithm": "ground-truth", "acceptance_rate": accepted / proposals},
    )
