"""
목표 분포 오라클

포텐셜 V 는 0차 오라클로만 노출됩니다. 모든 평가는 eval_potential 을 거쳐
QueryLedger 에 단계별로 집계됩니다.
"""

import logging
import threading
from collections.abc import Callable
from dataclasses import dataclass, field, replace
from typing import Literal, get_args

import numpy as np
from scipy.optimize import minimize

from zodmc.core.errors import ConfigurationError
from zodmc.services.gmm import GmmSpec, standard_gaussian_spec
from zodmc.services.ou import GmmFlow


logger = logging.getLogger(__name__)

Phase = Literal["optimization", "score-estimation", "baseline", "ground-truth"]
PHASES: tuple[str, ...] = get_args(Phase)

PotentialFn = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class LedgerSnapshot:
    zeroth_order_count: int
    by_phase: dict[str, int]


class QueryLedger:
    def __init__(self):
        self._lock = threading.Lock()
        self._by_phase: dict[str, int] = dict.fromkeys(PHASES, 0)

    def record(self, phase: Phase, count: int = 1) -> None:
        if phase not in self._by_phase:
            raise ConfigurationError(f"알 수 없는 단계입니다: {phase}")
        if count < 0:
            raise ConfigurationError("질의 수는 음수일 수 없습니다.")
        with self._lock:
            self._by_phase[phase] += int(count)

    @property
    def zeroth_order_count(self) -> int:
        with self._lock:
            return sum(self._by_phase.values())

    @property
    def by_phase(self) -> dict[str, int]:
        with self._lock:
            return dict(self._by_phase)

    def snapshot(self) -> LedgerSnapshot:
        with self._lock:
            by_phase = dict(self._by_phase)
        return LedgerSnapshot(zeroth_order_count=sum(by_phase.values()), by_phase=by_phase)


@dataclass(frozen=True, eq=False)
class Target:
    dim: int
    potential: PotentialFn
    name: str = "target"
    analytic_log_density: PotentialFn | None = None
    analytic_score_at_time: Callable[[float, np.ndarray], np.ndarray] | None = None
    second_moment_hint: float | None = None
    smoothness_hint: float | None = None
    covariance_trace_hint: float | None = None
    # 표적이 정확히 이 혼합 분포일 때만 채워집니다 (정답 표본, 점수 오차용)
    gmm: GmmSpec | None = None
    parent: "Target | None" = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.dim < 1:
            raise ConfigurationError(f"차원은 1 이상이어야 합니다. (dim={self.dim})")
        if self.second_moment_hint is not None and self.second_moment_hint < 0:
            raise ConfigurationError("2차 모멘트 힌트는 음수일 수 없습니다.")
        if self.smoothness_hint is not None and self.smoothness_hint <= 0:
            raise ConfigurationError("평활도 상수 L 은 양수여야 합니다.")


def eval_potential(
    target: Target,
    x: np.ndarray,
    ledger: QueryLedger,
    phase: Phase,
) -> float | np.ndarray:
    """V(x) 를 평가하고 점 하나당 질의 1회를 기록합니다. (d,) 또는 (m, d) 입력을 받습니다."""
    x_arr = np.asarray(x, dtype=float)
    points = np.atleast_2d(x_arr)
    if x_arr.ndim > 2 or points.shape[1] != target.dim:
        raise ConfigurationError(
            f"차원이 맞지 않습니다. (목표 차원={target.dim}, 입력 형태={x_arr.shape})"
        )
    with np.errstate(over="ignore"):
        values = np.asarray(target.potential(points), dtype=float).reshape(points.shape[0])
    ledger.record(phase, points.shape[0])
    if x_arr.ndim == 1:
        return float(values[0])
    return values


def gmm_smoothness(spec: GmmSpec) -> float:
    """포텐셜 곡률의 상한 max_i 1/λ_min(Σ_i). 표준 가우시안이면 1 입니다."""
    return float(max(1.0 / np.linalg.eigvalsh(cov).min() for cov in spec.covariances))


def make_gmm(spec: GmmSpec, name: str = "gmm") -> Target:
    flow = GmmFlow(spec)
    return Target(
        dim=spec.dim,
        potential=lambda x: -spec.log_density(x),
        name=name,
        analytic_log_density=spec.log_density,
        analytic_score_at_time=flow.score,
        second_moment_hint=spec.second_moment,
        smoothness_hint=gmm_smoothness(spec),
        covariance_trace_hint=spec.covariance_trace,
        gmm=spec,
    )


def make_quadratic(dim: int, center: np.ndarray | None = None, curvature: float = 1.0) -> Target:
    """V(x) = c‖x - μ‖²/2. 최솟값이 정확히 0 인 가우시안 목표."""
    if curvature <= 0:
        raise ConfigurationError("곡률은 양수여야 합니다.")
    mu = np.zeros(dim) if center is None else np.asarray(center, dtype=float).reshape(dim)
    spec = GmmSpec(
        weights=np.ones(1), means=mu[None, :], covariances=(np.eye(dim) / curvature)[None]
    )

    def potential(x: np.ndarray) -> np.ndarray:
        return 0.5 * curvature * np.sum((x - mu) ** 2, axis=1)

    return Target(
        dim=dim,
        potential=potential,
        name="quadratic",
        analytic_log_density=lambda x: -potential(x),
        analytic_score_at_time=GmmFlow(spec).score,
        second_moment_hint=spec.second_moment,
        smoothness_hint=curvature,
        covariance_trace_hint=spec.covariance_trace,
        gmm=spec,
        metadata={"minimizer": mu.tolist()},
    )


def make_standard_gaussian(dim: int) -> Target:
    return make_gmm(standard_gaussian_spec(dim), name="gaussian")


def annulus_penalty(x: np.ndarray, inner: float, outer: float, height: float) -> np.ndarray:
    radius = np.linalg.norm(np.atleast_2d(x), axis=1)
    inside = (radius > inner) & (radius < outer)
    return height * np.floor(radius) * inside


def apply_annulus_penalty(target: Target, inner: float, outer: float, height: float) -> Target:
    """V(x) + height·⌊‖x‖⌋·1{inner < ‖x‖ < outer}."""
    if not 0 <= inner < outer:
        raise ConfigurationError(f"0 ≤ inner < outer 이어야 합니다. (inner={inner}, outer={outer})")
    if height < 0:
        raise ConfigurationError("벌점 높이는 음수일 수 없습니다.")

    base_potential = target.potential
    base_log_density = target.analytic_log_density

    def potential(x: np.ndarray) -> np.ndarray:
        return base_potential(x) + annulus_penalty(x, inner, outer, height)

    def log_density(x: np.ndarray) -> np.ndarray:
        return base_log_density(x) - annulus_penalty(x, inner, outer, height)

    return replace(
        target,
        potential=potential,
        name=f"{target.name}+annulus",
        analytic_log_density=log_density if base_log_density is not None else None,
        analytic_score_at_time=None,
        second_moment_hint=None,
        smoothness_hint=None,
        covariance_trace_hint=None,
        gmm=None,
        parent=target,
        metadata={"annulus": {"inner": inner, "outer": outer, "height": height}},
    )


# 뮐러-브라운 네 개의 지수항: (A, a, b, c, x0, y0)
#   A·exp(a(x-x0)² + b(x-x0)(y-y0) + c(y-y0)²)
MUELLER_TERMS = (
    (-170.0, -6.5, 11.0, -6.5, -0.5, 1.5),
    (-100.0, -1.0, 0.0, -10.0, 0.0, 0.5),
    (15.0, 0.7, 0.6, 0.7, -1.0, 1.0),
    (-200.0, -1.0, 0.0, -10.0, 1.0, 0.0),
)
MUELLER_QUADRATIC = (35.0136, 59.8399)
MUELLER_CENTER_SEED = (-0.05, 0.47)


def mueller_terms(standard_form: bool = False) -> tuple[tuple[float, ...], ...]:
    if not standard_form:
        return MUELLER_TERMS
    amplitude, _, _, _, x0, y0 = MUELLER_TERMS[2]
    return (*MUELLER_TERMS[:2], (amplitude, -0.7, -0.6, -0.7, x0, y0), MUELLER_TERMS[3])


def mueller_base_potential(x: np.ndarray, standard_form: bool = False) -> np.ndarray:
    points = np.atleast_2d(np.asarray(x, dtype=float))
    px, py = points[:, 0], points[:, 1]
    value = np.zeros(points.shape[0])
    with np.errstate(over="ignore"):
        for amplitude, a, b, c, x0, y0 in mueller_terms(standard_form):
            dx, dy = px - x0, py - y0
            value += amplitude * np.exp(a * dx**2 + b * dx * dy + c * dy**2)
    return value


def locate_mueller_center(standard_form: bool = False) -> np.ndarray:
    """가운데 우물의 국소 최소점 (유한차분 BFGS)."""
    result = minimize(
        lambda p: float(mueller_base_potential(p, standard_form)[0]),
        x0=np.array(MUELLER_CENTER_SEED),
        method="BFGS",
        options={"gtol": 1e-8},
    )
    return np.asarray(result.x, dtype=float)


def make_mueller_brown(
    beta: float = 0.1,
    center: np.ndarray | None = None,
    standard_form: bool = False,
) -> Target:
    """V = β·(V_m + V_q), V_q = 35.0136(x - x_c)² + 59.8399(y - y_c)²."""
    if beta <= 0:
        raise ConfigurationError(f"β 는 양수여야 합니다. (beta={beta})")
    c = locate_mueller_center(standard_form) if center is None else np.asarray(center, float)
    qx, qy = MUELLER_QUADRATIC
    # 정답 표본용 제안 폭: 이차 구속항만 남긴 가우시안 표준편차의 두 배
    proposal_scale = np.sqrt(2.0 / (beta * np.asarray(MUELLER_QUADRATIC)))
    logger.info(f"뮐러-브라운 목표 생성: β={beta}, 중심={c.tolist()}")

    def potential(x: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(x)
        quad = qx * (points[:, 0] - c[0]) ** 2 + qy * (points[:, 1] - c[1]) ** 2
        return beta * (mueller_base_potential(points, standard_form) + quad)

    return Target(
        dim=2,
        potential=potential,
        name="mueller-brown",
        analytic_log_density=lambda x: -potential(x),
        metadata={
            "beta": beta,
            "center": c.tolist(),
            "standard_form": standard_form,
            "proposal_scale": proposal_scale.tolist(),
        },
    )
