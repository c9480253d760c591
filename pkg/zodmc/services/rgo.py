"""
기각 샘플링으로 구현한 제한 가우시안 오라클 (RGO)

p_{0|t}(z | x) ∝ exp(-V(z) - ‖z - e^t x‖² / (2(e^{2t} - 1)))

제안 분포 N(e^t x, (e^{2t} - 1)I) 에서 z 를 뽑고 확률 exp(-V(z) + V̂*) 로 수락합니다.
V̂* 는 MinTracker 가 추적하는 포텐셜의 (국소) 최솟값입니다.
"""

import logging
import math
import threading
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize
from scipy.special import logsumexp, softmax

from zodmc.core.errors import ArgumentError, RgoStarvedError
from zodmc.services.target import Phase, QueryLedger, Target, eval_potential


logger = logging.getLogger(__name__)

DEFAULT_BATCH_SIZE = 256
MAX_BATCH_SIZE = 65_536
DEFAULT_MAX_PROPOSALS = 1_000_000
MAX_PROPOSALS_CEILING = 10**9


class MinTracker:
    """지금까지 관측한 가장 낮은 포텐셜 값 V̂* 와 그 지점."""

    def __init__(self, best_point: np.ndarray, best_value: float, update_count: int = 0):
        self._lock = threading.Lock()
        self._best_point = np.asarray(best_point, dtype=float).copy()
        self._best_value = float(best_value)
        self.update_count = update_count

    @property
    def best_point(self) -> np.ndarray:
        with self._lock:
            return self._best_point.copy()

    @property
    def best_value(self) -> float:
        with self._lock:
            return self._best_value

    def offer(self, point: np.ndarray, value: float) -> bool:
        """value 가 더 낮을 때만 교체합니다 (compare-and-swap)."""
        if not np.isfinite(value):
            return False
        with self._lock:
            if value >= self._best_value:
                return False
            self._best_point = np.asarray(point, dtype=float).copy()
            self._best_value = float(value)
            self.update_count += 1
            return True

    def snapshot(self) -> "MinTracker":
        with self._lock:
            return MinTracker(self._best_point, self._best_value, self.update_count)

    def merge(self, other: "MinTracker") -> bool:
        return self.offer(other.best_point, other.best_value)


@dataclass(frozen=True)
class MinimizerOptions:
    tol: float = 1e-6
    max_iters: int = 200
    fd_scale: float = 1e-5


@dataclass(frozen=True)
class RgoRequest:
    t: float
    x: np.ndarray
    n: int
    max_proposals: int = DEFAULT_MAX_PROPOSALS

    def __post_init__(self):
        if not self.t > 0:
            raise ArgumentError(f"RGO 요청 시간은 양수여야 합니다. (t={self.t})")
        if self.n < 1:
            raise ArgumentError(f"요청 표본 수는 1 이상이어야 합니다. (n={self.n})")
        if self.max_proposals < 1:
            raise ArgumentError("제안 한도는 1 이상이어야 합니다.")


@dataclass
class RgoResult:
    samples: np.ndarray
    proposals_used: int
    envelope_violations: int = 0
    vstar_improved: bool = False
    completed: bool = True
    accepted_total: int = field(default=0)
    # 제안 전체에 exp(-V(z)) 가중치를 준 자기정규화 평균. rgo_fire 만 채웁니다
    importance_mean: np.ndarray | None = None

    @property
    def acceptance_rate(self) -> float:
        if self.proposals_used == 0:
            return 0.0
        return self.samples.shape[0] / self.proposals_used


class ImportanceMean:
    """Σ w(z)·z / Σ w(z), w(z) = exp(-V(z) + V̂*). 가중치 합은 로그 공간에서 누적합니다."""

    def __init__(self, dim: int):
        self._log_total = -np.inf
        self._weighted = np.zeros(dim)

    def add(self, z: np.ndarray, log_weights: np.ndarray) -> None:
        finite = np.isfinite(log_weights)
        if not finite.any():
            return
        log_weights = log_weights[finite]
        batch_log = float(logsumexp(log_weights))
        total = float(np.logaddexp(self._log_total, batch_log))
        batch_mean = softmax(log_weights) @ z[finite]
        self._weighted = (
            self._weighted * math.exp(self._log_total - total)
            + batch_mean * math.exp(batch_log - total)
        )
        self._log_total = total

    @property
    def value(self) -> np.ndarray | None:
        if not np.isfinite(self._log_total):
            return None
        return self._weighted.copy()


class _PotentialAborted(Exception):
    pass


def central_difference_gradient(
    target: Target,
    x: np.ndarray,
    ledger: QueryLedger,
    phase: Phase,
    step: float | None = None,
    fd_scale: float = 1e-5,
) -> np.ndarray:
    """중앙 차분 기울기. 점 하나당 2d 회의 질의를 씁니다. x 는 (d,) 또는 (m, d)."""
    x_arr = np.asarray(x, dtype=float)
    points = np.atleast_2d(x_arr)
    m, d = points.shape
    if step is None:
        h = fd_scale * (1.0 + np.max(np.abs(points), axis=1))
    else:
        h = np.full(m, float(step))

    offsets = np.eye(d)[None, :, :] * h[:, None, None]
    stencil = np.concatenate(
        [points[:, None, :] + offsets, points[:, None, :] - offsets], axis=1
    ).reshape(m * 2 * d, d)
    values = np.asarray(eval_potential(target, stencil, ledger, phase)).reshape(m, 2, d)
    grad = (values[:, 0, :] - values[:, 1, :]) / (2.0 * h[:, None])
    return grad[0] if x_arr.ndim == 1 else grad


def find_potential_min(
    target: Target,
    x0: np.ndarray,
    ledger: QueryLedger,
    opts: MinimizerOptions | None = None,
) -> MinTracker:
    """유한차분 기울기와 BFGS 곡률 갱신으로 V 의 국소 최소점을 찾습니다."""
    opts = opts or MinimizerOptions()
    x0 = np.asarray(x0, dtype=float).reshape(target.dim)
    if not np.all(np.isfinite(x0)):
        raise ArgumentError("시작점은 유한해야 합니다.")

    best: dict = {"point": x0.copy(), "value": np.inf}

    def observe(point: np.ndarray, value: float) -> None:
        if np.isfinite(value) and value < best["value"]:
            best["point"], best["value"] = point.copy(), value

    def objective(point: np.ndarray) -> float:
        value = float(eval_potential(target, point, ledger, "optimization"))
        if not np.isfinite(value):
            raise _PotentialAborted
        observe(point, value)
        return value

    def gradient(point: np.ndarray) -> np.ndarray:
        grad = central_difference_gradient(
            target, point, ledger, "optimization", fd_scale=opts.fd_scale
        )
        if not np.all(np.isfinite(grad)):
            raise _PotentialAborted
        return grad

    try:
        minimize(
            objective,
            x0,
            jac=gradient,
            method="BFGS",
            options={"gtol": opts.tol, "maxiter": opts.max_iters},
        )
    except _PotentialAborted:
        logger.warning(f"최적화 중 유한하지 않은 포텐셜을 만났습니다. 최선점 유지: {best['point']}")

    if not np.isfinite(best["value"]):
        value = float(eval_potential(target, x0, ledger, "optimization"))
        return MinTracker(x0, value if np.isfinite(value) else np.inf)
    return MinTracker(best["point"], best["value"])


def _proposal(
    t: float, x: np.ndarray, size: int, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    center = math.exp(t) * x
    scale = math.sqrt(math.expm1(2.0 * t))
    z = center + scale * rng.standard_normal((size, x.size))
    u = rng.uniform(0.0, 1.0, size=size)
    return z, u


def _accept(
    target: Target,
    tracker: MinTracker,
    z: np.ndarray,
    u: np.ndarray,
    ledger: QueryLedger,
    phase: Phase,
) -> tuple[np.ndarray, np.ndarray, int, bool]:
    """한 배치를 평가합니다. 수락 여부는 배치 시작 시점의 V̂* 로 판정합니다.

    수락 마스크와 함께 로그 수락비 -V(z) + V̂* 를 돌려줍니다.
    """
    vstar = tracker.best_value
    values = np.asarray(eval_potential(target, z, ledger, phase))
    log_ratio = np.where(np.isfinite(values), -values + vstar, -np.inf)
    accepted = np.log(np.maximum(u, np.finfo(float).tiny)) <= log_ratio
    violations = int(np.count_nonzero(log_ratio > 0))

    improved = False
    if violations:
        i = int(np.argmin(values))
        improved = tracker.offer(z[i], float(values[i]))
    return accepted, log_ratio, violations, improved


def rgo_sample(
    target: Target,
    tracker: MinTracker,
    req: RgoRequest,
    ledger: QueryLedger,
    rng: np.random.Generator,
    batch_size: int = DEFAULT_BATCH_SIZE,
    phase: Phase = "score-estimation",
) -> RgoResult:
    """p_{0|t}(· | x) 에서 정확한 표본 n 개를 얻을 때까지 배치 단위로 제안합니다.

    아직 하나도 수락하지 못했으면 다음 배치 크기를 MAX_BATCH_SIZE 까지 두 배로 늘립니다.
    """
    x = np.asarray(req.x, dtype=float).reshape(target.dim)
    chunks: list[np.ndarray] = []
    accepted_count = 0
    proposals = 0
    violations = 0
    improved = False
    next_size = batch_size

    while accepted_count < req.n and proposals < req.max_proposals:
        size = min(next_size, req.max_proposals - proposals)
        z, u = _proposal(req.t, x, size, rng)
        accepted, _, batch_violations, batch_improved = _accept(
            target, tracker, z, u, ledger, phase
        )
        proposals += size
        violations += batch_violations
        improved = improved or batch_improved
        if accepted.any():
            chunks.append(z[accepted])
            accepted_count += int(np.count_nonzero(accepted))
        elif accepted_count == 0:
            next_size = max(batch_size, min(2 * next_size, MAX_BATCH_SIZE))

    if accepted_count == 0:
        raise RgoStarvedError(proposals, req.t, x)

    samples = np.concatenate(chunks, axis=0)
    completed = accepted_count >= req.n
    if not completed:
        logger.warning(
            f"제안 한도 소진으로 부분 결과를 반환합니다. (t={req.t:.4g}, {accepted_count}/{req.n})"
        )
    return RgoResult(
        samples=samples[: req.n],
        proposals_used=proposals,
        envelope_violations=violations,
        vstar_improved=improved,
        completed=completed,
        accepted_total=accepted_count,
    )


def rgo_fire(
    target: Target,
    tracker: MinTracker,
    t: float,
    x: np.ndarray,
    n_proposals: int,
    ledger: QueryLedger,
    rng: np.random.Generator,
    batch_size: int | None = None,
    phase: Phase = "score-estimation",
) -> RgoResult:
    """정확히 n_proposals 개를 제안하고 수락된 표본을 모두 돌려줍니다 (0개일 수 있음).

    같은 제안들로 만든 중요도 가중 평균도 함께 돌려주므로, 수락이 없을 때 호출자가
    추가 질의 없이 쓸 수 있습니다.
    """
    if not t > 0:
        raise ArgumentError(f"RGO 요청 시간은 양수여야 합니다. (t={t})")
    x = np.asarray(x, dtype=float).reshape(target.dim)
    batch_size = batch_size or n_proposals
    chunks: list[np.ndarray] = [np.empty((0, target.dim))]
    weighted = ImportanceMean(target.dim)
    violations = 0
    improved = False
    fired = 0
    while fired < n_proposals:
        size = min(batch_size, n_proposals - fired)
        z, u = _proposal(t, x, size, rng)
        accepted, log_ratio, batch_violations, batch_improved = _accept(
            target, tracker, z, u, ledger, phase
        )
        fired += size
        violations += batch_violations
        improved = improved or batch_improved
        chunks.append(z[accepted])
        weighted.add(z, log_ratio)

    samples = np.concatenate(chunks, axis=0)
    return RgoResult(
        samples=samples,
        proposals_used=fired,
        envelope_violations=violations,
        vstar_improved=improved,
        completed=True,
        accepted_total=samples.shape[0],
        importance_mean=weighted.value,
    )


def expected_proposals(
    L: float, t: float, x: np.ndarray, xstar: np.ndarray, d: int, n: int = 1
) -> float:
    """n 개의 정확한 표본에 필요한 기대 제안 수.

    n·(L(e^{2t} - 1) + 1)^{d/2}·exp(½‖L·x* - e^t x‖² / (L(e^{2t} - 1) + 1))
    """
    if L <= 0 or t <= 0:
        raise ArgumentError(f"L 과 t 는 양수여야 합니다. (L={L}, t={t})")
    x = np.asarray(x, dtype=float)
    xstar = np.asarray(xstar, dtype=float)
    spread = L * math.expm1(2.0 * t) + 1.0
    gap = float(np.sum((L * xstar - math.exp(t) * x) ** 2))
    log_value = math.log(n) + 0.5 * d * math.log(spread) + 0.5 * gap / spread
    return math.exp(min(log_value, 700.0))


def default_max_proposals(
    target: Target,
    tracker: MinTracker,
    t: float,
    x: np.ndarray,
    n: int,
    fallback: int = DEFAULT_MAX_PROPOSALS,
) -> int:
    """L 힌트가 있으면 기대 제안 수의 100배, 없으면 fallback."""
    if target.smoothness_hint is None:
        return fallback
    expected = expected_proposals(
        target.smoothness_hint, t, x, tracker.best_point, target.dim, n
    )
    return int(min(max(100.0 * expected, n), MAX_PROPOSALS_CEILING))
