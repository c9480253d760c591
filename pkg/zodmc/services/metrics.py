"""
표본 집합 비교 지표

MMD (가우시안 커널 U-통계량), 정확한 할당 기반 W2, 모드 가중치, 모멘트 오차.
"""

import logging
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist, pdist

from zodmc.core.errors import ArgumentError
from zodmc.schemas.report import MetricsReport


logger = logging.getLogger(__name__)

W2_EXACT_CAP = 4096
BANDWIDTH_POINTS = 2000
KERNEL_CHUNK = 2048


def _as_batch(x: np.ndarray, name: str) -> np.ndarray:
    batch = np.asarray(x, dtype=float)
    if batch.ndim == 1:
        batch = batch[:, None]
    if batch.ndim != 2:
        raise ArgumentError(f"{name} 은 (n, d) 배열이어야 합니다. (형태={batch.shape})")
    return batch


def _check_pair(x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    x, y = _as_batch(x, "X"), _as_batch(y, "Y")
    if x.shape[1] != y.shape[1]:
        raise ArgumentError(f"차원이 다릅니다. ({x.shape[1]} vs {y.shape[1]})")
    return x, y


def median_bandwidth(x: np.ndarray, y: np.ndarray) -> float:
    """합친 표본의 쌍별 거리 중앙값. 점이 많으면 등간격으로 골라 계산합니다."""
    pooled = np.concatenate(_check_pair(x, y), axis=0)
    if pooled.shape[0] > BANDWIDTH_POINTS:
        pooled = pooled[np.linspace(0, pooled.shape[0] - 1, BANDWIDTH_POINTS).astype(int)]
    h = float(np.median(pdist(pooled)))
    return h if h > 0 else 1.0


def _kernel_sum(a: np.ndarray, b: np.ndarray, h: float) -> float:
    total = 0.0
    for start in range(0, a.shape[0], KERNEL_CHUNK):
        block = cdist(a[start : start + KERNEL_CHUNK], b, "sqeuclidean")
        total += float(np.sum(np.exp(-0.5 * block / h**2)))
    return total


def mmd(x: np.ndarray, y: np.ndarray, bandwidth: float | None = None) -> float:
    """가우시안 커널 exp(-‖a - b‖²/(2h²)) 의 불편 MMD² (부호 있는 값)."""
    x, y = _check_pair(x, y)
    m, n = x.shape[0], y.shape[0]
    if m < 2 or n < 2:
        raise ArgumentError(f"MMD 에는 각 집합에 2개 이상의 점이 필요합니다. ({m}, {n})")
    h = median_bandwidth(x, y) if bandwidth is None else float(bandwidth)
    if not h > 0:
        raise ArgumentError(f"대역폭은 양수여야 합니다. (h={h})")

    # 대각 항 exp(0) = 1 을 빼서 U-통계량을 만듭니다
    kxx = (_kernel_sum(x, x, h) - m) / (m * (m - 1))
    kyy = (_kernel_sum(y, y, h) - n) / (n * (n - 1))
    kxy = _kernel_sum(x, y, h) / (m * n)
    return kxx + kyy - 2.0 * kxy


def _mmd_from_gram(gram: np.ndarray, mask: np.ndarray) -> float:
    m = int(np.count_nonzero(mask))
    n = mask.size - m
    kxx = gram[np.ix_(mask, mask)]
    kyy = gram[np.ix_(~mask, ~mask)]
    kxy = gram[np.ix_(mask, ~mask)]
    return (
        (kxx.sum() - np.trace(kxx)) / (m * (m - 1))
        + (kyy.sum() - np.trace(kyy)) / (n * (n - 1))
        - 2.0 * kxy.mean()
    )


def mmd_permutation_test(
    x: np.ndarray,
    y: np.ndarray,
    rng: np.random.Generator,
    n_permutations: int = 200,
    bandwidth: float | None = None,
) -> tuple[float, float]:
    """(MMD², 순열 p-값). p = (1 + #{순열 통계량 ≥ 관측값}) / (1 + 순열 수)."""
    x, y = _check_pair(x, y)
    if x.shape[0] < 2 or y.shape[0] < 2:
        raise ArgumentError("MMD 에는 각 집합에 2개 이상의 점이 필요합니다.")
    h = median_bandwidth(x, y) if bandwidth is None else float(bandwidth)
    pooled = np.concatenate([x, y], axis=0)
    gram = np.exp(-0.5 * cdist(pooled, pooled, "sqeuclidean") / h**2)

    mask = np.zeros(pooled.shape[0], dtype=bool)
    mask[: x.shape[0]] = True
    observed = _mmd_from_gram(gram, mask)
    exceed = 0
    for _ in range(n_permutations):
        if _mmd_from_gram(gram, rng.permutation(mask)) >= observed:
            exceed += 1
    return float(observed), (1 + exceed) / (1 + n_permutations)


def _subsample(x: np.ndarray, n: int, rng: np.random.Generator | None) -> np.ndarray:
    if x.shape[0] == n:
        return x
    rng = rng or np.random.default_rng(0)
    return x[rng.choice(x.shape[0], size=n, replace=False)]


def w2_empirical(
    x: np.ndarray,
    y: np.ndarray,
    subsample: bool = False,
    rng: np.random.Generator | None = None,
    max_points: int = W2_EXACT_CAP,
) -> float:
    """제곱 거리 비용의 정확한 최적 할당으로 구한 W2."""
    x, y = _check_pair(x, y)
    n = min(x.shape[0], y.shape[0])
    if x.shape[0] != y.shape[0] and not subsample:
        raise ArgumentError(f"점 개수가 다릅니다. ({x.shape[0]} vs {y.shape[0]})")
    if n > max_points:
        if not subsample:
            raise ArgumentError(f"정확한 W2 는 {max_points}개까지만 지원합니다. (n={n})")
        n = max_points
    x, y = _subsample(x, n, rng), _subsample(y, n, rng)

    cost = cdist(x, y, "sqeuclidean")
    rows, cols = linear_sum_assignment(cost)
    return float(np.sqrt(cost[rows, cols].mean()))


@dataclass(frozen=True)
class ModeWeights:
    weights: np.ndarray
    counts: np.ndarray
    unassigned_fraction: float = 0.0


def mode_weights(
    x: np.ndarray, means: np.ndarray, assign_radius: float | None = None
) -> ModeWeights:
    """가장 가까운 평균에 배정합니다. 반경이 주어지면 그 밖의 점은 미배정으로 셉니다."""
    x = _as_batch(x, "X")
    means = np.atleast_2d(np.asarray(means, dtype=float))
    distances = cdist(x, means)
    nearest = np.argmin(distances, axis=1)
    assigned = np.ones(x.shape[0], dtype=bool)
    if assign_radius is not None:
        assigned = distances[np.arange(x.shape[0]), nearest] <= assign_radius

    counts = np.bincount(nearest[assigned], minlength=means.shape[0])
    total = counts.sum()
    weights = counts / total if total else np.zeros(means.shape[0])
    unassigned = 1.0 - total / x.shape[0] if x.shape[0] else 0.0
    return ModeWeights(weights=weights, counts=counts, unassigned_fraction=float(unassigned))


def mode_total_variation(p: np.ndarray, q: np.ndarray) -> float:
    return 0.5 * float(np.sum(np.abs(np.asarray(p) - np.asarray(q))))


def annulus_mass(x: np.ndarray, inner: float, outer: float) -> float:
    radius = np.linalg.norm(_as_batch(x, "X"), axis=1)
    return float(np.mean((radius > inner) & (radius < outer)))


def moment_errors(x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    """(평균 차의 노름, 공분산 차의 연산자 노름)."""
    x, y = _check_pair(x, y)
    mean_error = float(np.linalg.norm(x.mean(axis=0) - y.mean(axis=0)))
    cov_x = np.atleast_2d(np.cov(x, rowvar=False))
    cov_y = np.atleast_2d(np.cov(y, rowvar=False))
    return mean_error, float(np.linalg.norm(cov_x - cov_y, ord=2))


def compute_report(
    samples: np.ndarray,
    reference: np.ndarray,
    rng: np.random.Generator,
    means: np.ndarray | None = None,
    assign_radius: float | None = None,
    annulus: tuple[float, float] | None = None,
    max_points: int = W2_EXACT_CAP,
) -> MetricsReport:
    """표본과 정답 표본을 비교합니다. 두 집합은 max_points 이하의 같은 크기로 맞춥니다."""
    samples, reference = _check_pair(samples, reference)
    n = min(samples.shape[0], reference.shape[0], max_points)
    x, y = _subsample(samples, n, rng), _subsample(reference, n, rng)

    bandwidth = median_bandwidth(x, y)
    mmd_value = mmd(x, y, bandwidth)
    mean_error, cov_error = moment_errors(x, y)
    report = {
        "mmd": max(mmd_value, 0.0),
        "mmd_raw": mmd_value,
        "w2": w2_empirical(x, y),
        "mean_error": mean_error,
        "cov_error": cov_error,
        "n_x": n,
        "n_y": n,
        "bandwidth": bandwidth,
    }
    if means is not None:
        weights = mode_weights(samples, means, assign_radius)
        truth = mode_weights(reference, means, assign_radius)
        report |= {
            "mode_weights": weights.weights.tolist(),
            "reference_mode_weights": truth.weights.tolist(),
            "mode_tv": mode_total_variation(weights.weights, truth.weights),
            "unassigned_fraction": weights.unassigned_fraction,
        }
    if annulus is not None:
        report |= {
            "annulus_mass": annulus_mass(samples, *annulus),
            "reference_annulus_mass": annulus_mass(reference, *annulus),
        }
    return MetricsReport(**report)
