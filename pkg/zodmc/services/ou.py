"""
순방향 Ornstein-Uhlenbeck 과정의 닫힌 형태 해석

X_t = e^{-t} X_0 + √(1 - e^{-2t}) Z 표현을 이용합니다. 혼합 분포의 OU 점수는
점수 오차 지표의 정답값으로만 쓰입니다.
"""

import threading
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular, sqrtm
from scipy.special import logsumexp, softmax

from zodmc.core.errors import ArgumentError
from zodmc.services.gmm import GmmSpec, component_log_densities


@dataclass(frozen=True)
class OuMarginal:
    t: float
    shrink: float
    noise_var: float


def ou_marginal(t: float) -> OuMarginal:
    if t < 0:
        raise ArgumentError(f"시간은 음수일 수 없습니다. (t={t})")
    shrink = float(np.exp(-t))
    noise_var = float(-np.expm1(-2.0 * t))
    return OuMarginal(t=float(t), shrink=shrink, noise_var=noise_var)


class GmmFlow:
    """OU 로 흘려보낸 혼합 분포 p_t 의 로그 밀도와 점수.

    p_t 의 성분은 평균 e^{-t}μᵢ, 공분산 e^{-2t}Σᵢ + (1 - e^{-2t})I 인 가우시안입니다.
    시간별 촐레스키 분해는 스레드 안전하게 메모이즈합니다.
    """

    def __init__(self, spec: GmmSpec):
        self.spec = spec
        self._cache: dict[float, tuple[np.ndarray, np.ndarray, np.ndarray]] = {}
        self._lock = threading.Lock()

    def _components(self, t: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        key = float(t)
        with self._lock:
            cached = self._cache.get(key)
        if cached is not None:
            return cached

        marginal = ou_marginal(key)
        eye = np.eye(self.spec.dim)
        means_t = marginal.shrink * self.spec.means
        covs_t = marginal.shrink**2 * self.spec.covariances + marginal.noise_var * eye[None]
        chol_t = np.linalg.cholesky(covs_t)
        entry = (means_t, covs_t, chol_t)
        with self._lock:
            self._cache.setdefault(key, entry)
        return entry

    def log_density(self, t: float, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        means_t, _, chol_t = self._components(t)
        log_terms = np.log(self.spec.weights)[None, :] + component_log_densities(x, means_t, chol_t)
        return logsumexp(log_terms, axis=1)

    def score(self, t: float, x: np.ndarray) -> np.ndarray:
        x_arr = np.asarray(x, dtype=float)
        points = np.atleast_2d(x_arr)
        means_t, _, chol_t = self._components(t)

        log_terms = np.log(self.spec.weights)[None, :] + component_log_densities(
            points, means_t, chol_t
        )
        responsibilities = softmax(log_terms, axis=1)

        result = np.zeros_like(points)
        for i in range(self.spec.n_components):
            diff = (points - means_t[i]).T
            precision_diff = solve_triangular(
                chol_t[i].T, solve_triangular(chol_t[i], diff, lower=True), lower=False
            )
            result -= responsibilities[:, i : i + 1] * precision_diff.T
        return result[0] if x_arr.ndim == 1 else result


def gmm_score_at_time(spec: GmmSpec, t: float, x: np.ndarray) -> np.ndarray:
    return GmmFlow(spec).score(t, x)


def sample_ou_marginal(
    spec: GmmSpec, t: float, n: int, rng: np.random.Generator
) -> np.ndarray:
    """X_0 를 혼합 분포에서 뽑은 뒤 OU 주변분포를 적용해 p_t 의 정확한 표본을 만듭니다."""
    marginal = ou_marginal(t)
    x0 = spec.sample(rng, n)
    noise = rng.standard_normal(x0.shape)
    return marginal.shrink * x0 + np.sqrt(marginal.noise_var) * noise


def ou_decay_bounds(
    t: float, m2sq: float, d: int, with_kl: bool = True
) -> tuple[float, float | None]:
    """W2(p_t, p) 와 KL(p_t | N(0, I)) 의 상계."""
    if t < 0:
        raise ArgumentError(f"시간은 음수일 수 없습니다. (t={t})")
    if m2sq < 0:
        raise ArgumentError(f"2차 모멘트는 음수일 수 없습니다. (m2sq={m2sq})")

    w2_sq = (-np.expm1(-t)) ** 2 * m2sq + (-np.expm1(-2.0 * t)) * d
    w2_bound = float(np.sqrt(w2_sq))
    if not with_kl:
        return w2_bound, None
    if t == 0:
        raise ArgumentError("t=0 에서는 KL 상계가 발산합니다.")

    kl_bound = 0.5 * np.exp(-4.0 * t) / (-np.expm1(-2.0 * t)) * d + 0.5 * np.exp(-2.0 * t) * m2sq
    return w2_bound, float(kl_bound)


def gaussian_w2(
    mean_a: np.ndarray, cov_a: np.ndarray, mean_b: np.ndarray, cov_b: np.ndarray
) -> float:
    """두 가우시안 사이의 닫힌 형태 W2."""
    mean_a, mean_b = np.asarray(mean_a, dtype=float), np.asarray(mean_b, dtype=float)
    cov_a, cov_b = np.asarray(cov_a, dtype=float), np.asarray(cov_b, dtype=float)
    root_b = np.real(sqrtm(cov_b))
    cross = np.real(sqrtm(root_b @ cov_a @ root_b))
    bures = np.trace(cov_a) + np.trace(cov_b) - 2.0 * np.trace(cross)
    value = float(np.sum((mean_a - mean_b) ** 2) + max(bures, 0.0))
    return float(np.sqrt(value))
