"""
가우시안 혼합 분포 사양과 프리셋

밀도 계산은 항상 log-sum-exp 로 수행합니다. 평균 간 거리가 26 까지 벌어지는
반경 실험에서 직접 합산은 언더플로가 납니다.
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import logsumexp

from zodmc.core.errors import ConfigurationError


LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True, eq=False)
class GmmSpec:
    weights: np.ndarray
    means: np.ndarray
    covariances: np.ndarray

    def __post_init__(self):
        weights = np.asarray(self.weights, dtype=float).reshape(-1)
        means = np.atleast_2d(np.asarray(self.means, dtype=float))
        covariances = np.asarray(self.covariances, dtype=float)
        if covariances.ndim == 2:
            covariances = covariances[None, :, :]

        k, d = means.shape
        if weights.shape != (k,):
            raise ConfigurationError(f"가중치 개수({weights.size})와 평균 개수({k})가 다릅니다.")
        if covariances.shape != (k, d, d):
            raise ConfigurationError(
                f"공분산 형태가 잘못되었습니다. 기대값 {(k, d, d)}, 입력 {covariances.shape}"
            )
        if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-12:
            raise ConfigurationError(
                f"가중치는 합이 1 인 확률 벡터여야 합니다. (합={weights.sum()})"
            )
        for i, cov in enumerate(covariances):
            if not np.allclose(cov, cov.T, atol=1e-12):
                raise ConfigurationError(f"{i}번 공분산이 대칭이 아닙니다.")
            if np.linalg.eigvalsh(cov).min() <= 0:
                raise ConfigurationError(f"{i}번 공분산이 양의 정부호가 아닙니다.")

        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "covariances", covariances)

    @property
    def dim(self) -> int:
        return int(self.means.shape[1])

    @property
    def n_components(self) -> int:
        return int(self.means.shape[0])

    @cached_property
    def _cholesky(self) -> np.ndarray:
        return np.linalg.cholesky(self.covariances)

    @cached_property
    def second_moment(self) -> float:
        """E‖X‖² = Σ wᵢ(‖μᵢ‖² + tr Σᵢ)."""
        norms = np.sum(self.means**2, axis=1)
        traces = np.trace(self.covariances, axis1=1, axis2=2)
        return float(np.dot(self.weights, norms + traces))

    @cached_property
    def covariance_trace(self) -> float:
        mean = self.weights @ self.means
        return self.second_moment - float(mean @ mean)

    def component_log_densities(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return component_log_densities(x, self.means, self._cholesky)

    def log_density(self, x: np.ndarray) -> np.ndarray:
        log_terms = np.log(self.weights)[None, :] + self.component_log_densities(x)
        return logsumexp(log_terms, axis=1)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        labels = rng.choice(self.n_components, size=n, p=self.weights)
        noise = rng.standard_normal((n, self.dim))
        return self.means[labels] + np.einsum("nij,nj->ni", self._cholesky[labels], noise)

    def to_dict(self) -> dict:
        return {
            "weights": self.weights.tolist(),
            "means": self.means.tolist(),
            "covariances": self.covariances.tolist(),
        }


def component_log_densities(x: np.ndarray, means: np.ndarray, cholesky: np.ndarray) -> np.ndarray:
    """(n, d) 점들에 대한 (n, k) 성분별 로그 정규 밀도."""
    d = means.shape[1]
    out = np.empty((x.shape[0], means.shape[0]))
    for i, (mean, chol) in enumerate(zip(means, cholesky, strict=True)):
        white = solve_triangular(chol, (x - mean).T, lower=True)
        log_det = 2.0 * np.sum(np.log(np.diag(chol)))
        out[:, i] = -0.5 * np.sum(white**2, axis=0) - 0.5 * log_det - 0.5 * d * LOG_2PI
    return out


def d1_gmm_spec() -> GmmSpec:
    """2차원 4-모드 벤치마크 혼합 분포."""
    return GmmSpec(
        weights=np.array([0.1, 0.2, 0.3, 0.4]),
        means=np.array([[0.0, 0.0], [0.0, 11.0], [9.0, 9.0], [11.0, 0.0]]),
        covariances=np.array(
            [
                [[1.0, 0.5], [0.5, 1.0]],
                [[0.3, -0.2], [-0.2, 0.3]],
                [[1.0, 0.3], [0.3, 1.0]],
                [[1.2, -1.0], [-1.0, 1.2]],
            ]
        ),
    )


def d4_gmm_spec() -> GmmSpec:
    """점수 오차 측정용 5차원 3-성분 혼합 분포."""
    return GmmSpec(
        weights=np.array([0.25, 0.5, 0.25]),
        means=np.array(
            [
                [-4.0, -4.0, -3.0, -4.0, -4.0],
                [4.0, 3.0, 4.0, 2.0, 4.0],
                [-4.0, -2.0, -4.0, 4.0, -1.0],
            ]
        ),
        covariances=np.array(
            [
                [
                    [3, 2, 0, 0, 0],
                    [2, 3, 0, 0, 0],
                    [0, 0, 4, 2, 0],
                    [0, 0, 2, 4, 0],
                    [0, 0, 0, 0, 1],
                ],
                [
                    [9, 0, 7, 0, 0],
                    [0, 1, 0, 0.4, 0],
                    [7, 0, 9, 0, 0],
                    [0, 0.4, 0, 1, 0],
                    [0, 0, 0, 0, 1],
                ],
                [
                    [1, 0.4, 0, 0, 0],
                    [0.4, 1, 0, 0, 0],
                    [0, 0, 4, 3, 0],
                    [0, 0, 3, 4, 0],
                    [0, 0, 0, 0, 1],
                ],
            ],
            dtype=float,
        ),
    )


def standard_gaussian_spec(dim: int) -> GmmSpec:
    return GmmSpec(weights=np.ones(1), means=np.zeros((1, dim)), covariances=np.eye(dim)[None])


def randomized_gmm_spec(dim: int, rng: np.random.Generator, n_modes: int = 5) -> GmmSpec:
    """μ = 12·z/‖z‖ (z ~ U[0,1]^d), σ² ~ U[0.3, 1.3], 등방 공분산, 동일 가중치."""
    if dim < 1 or n_modes < 1:
        raise ConfigurationError("차원과 모드 수는 1 이상이어야 합니다.")
    z = rng.uniform(0.0, 1.0, size=(n_modes, dim))
    means = 12.0 * z / np.linalg.norm(z, axis=1, keepdims=True)
    variances = rng.uniform(0.3, 1.3, size=n_modes)
    covariances = variances[:, None, None] * np.eye(dim)[None, :, :]
    return GmmSpec(weights=np.full(n_modes, 1.0 / n_modes), means=means, covariances=covariances)


def scale_gmm_to_radius(spec: GmmSpec, radius: float, anchor: int = 1) -> GmmSpec:
    """anchor 번 모드가 반경 radius 에 오도록 모든 평균을 같은 비율로 늘립니다."""
    anchor_norm = float(np.linalg.norm(spec.means[anchor]))
    if anchor_norm == 0.0 or radius <= 0:
        raise ConfigurationError("기준 모드가 원점에 있거나 반경이 양수가 아닙니다.")
    return GmmSpec(
        weights=spec.weights,
        means=spec.means * (radius / anchor_norm),
        covariances=spec.covariances,
    )
