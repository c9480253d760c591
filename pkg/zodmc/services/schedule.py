"""
역방향 과정의 시간 격자 0 = t_0 < … < t_N = T - δ

constant / linear / exp_decay 세 가지 간격을 지원합니다. 격자는 양 끝점을
정확히 맞추도록 고정됩니다.
"""

import logging
import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

from zodmc.core.errors import ConfigurationError


logger = logging.getLogger(__name__)

ScheduleKind = Literal["constant", "linear", "exp_decay"]

RATIO_MAX = 10.0
RATIO_MIN = 0.1
ENDPOINT_TOL = 1e-12
EXP_DECAY_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class Schedule:
    kind: ScheduleKind
    T: float
    delta: float
    grid: np.ndarray
    kappa: float | None = None

    @property
    def N(self) -> int:
        return int(self.grid.size - 1)

    @property
    def gammas(self) -> np.ndarray:
        return np.diff(self.grid)

    def forward_time(self, k: int) -> float:
        """k 번째 단계에서 점수를 평가할 순방향 시간 T - t_k."""
        return float(self.T - self.grid[k])

    def forward_times(self) -> np.ndarray:
        return self.T - self.grid[:-1]

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "T": self.T,
            "N": self.N,
            "delta": self.delta,
            "kappa": self.kappa,
            "grid": self.grid.tolist(),
        }


def _check_arguments(kind: str, T: float, N: int, delta: float) -> None:
    if kind not in ("constant", "linear", "exp_decay"):
        raise ConfigurationError(f"알 수 없는 격자 종류입니다: {kind}")
    if T <= 1:
        raise ConfigurationError(f"T 는 1 보다 커야 합니다. (T={T})")
    if not 0 < delta < 1 or delta >= T:
        raise ConfigurationError(f"δ 는 (0, 1) 구간에 있어야 합니다. (delta={delta})")
    if N < 1 or (kind != "constant" and N < 2):
        raise ConfigurationError(f"{kind} 격자에는 더 많은 단계가 필요합니다. (N={N})")


def _pin(grid: np.ndarray, end: float) -> np.ndarray:
    grid = np.asarray(grid, dtype=float).copy()
    grid[0] = 0.0
    grid[-1] = end
    return grid


def _linear_grid(T: float, N: int, delta: float) -> np.ndarray:
    gamma = (math.sqrt(T) - delta) / N
    k = np.arange(N + 1)
    raw = T - (delta + (N - k) * gamma) ** 2
    # 끝점이 T - δ² 로 떨어지므로 [0, T - δ] 로 비례 재조정합니다
    scaled = (raw - raw[0]) / (raw[-1] - raw[0]) * (T - delta)
    return _pin(scaled, T - delta)


def _exp_decay_walk(kappa: float, T: float, N: int) -> np.ndarray:
    grid = np.empty(N + 1)
    grid[0] = 0.0
    for k in range(N):
        grid[k + 1] = grid[k] + kappa * min(1.0, T - grid[k])
    return grid


def _minimal_exp_decay_steps(T: float, delta: float) -> int:
    kappa = 1.0 - 1e-9
    t, steps = 0.0, 0
    while t < T - delta:
        t += kappa * min(1.0, T - t)
        steps += 1
    return max(steps, 2)


def _exp_decay_grid(T: float, N: int, delta: float) -> tuple[np.ndarray, float]:
    end = T - delta
    seed = (T + math.log(1.0 / delta)) / N
    logger.debug(f"exp_decay κ 초기값 {seed:.6g}")

    lo, hi = 0.0, 1.0 - 1e-9
    if _exp_decay_walk(hi, T, N)[-1] < end:
        raise ConfigurationError(
            f"κ < 1 로는 {N} 단계 안에 T - δ 에 도달할 수 없습니다. "
            f"최소 N={_minimal_exp_decay_steps(T, delta)}"
        )
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if _exp_decay_walk(mid, T, N)[-1] < end:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-16:
            break
    kappa = hi
    return _pin(_exp_decay_walk(kappa, T, N), end), kappa


def build_schedule(kind: ScheduleKind, T: float, N: int, delta: float) -> Schedule:
    _check_arguments(kind, T, N, delta)

    kappa = None
    if kind == "constant":
        grid = _pin(np.linspace(0.0, T - delta, N + 1), T - delta)
    elif kind == "linear":
        grid = _linear_grid(T, N, delta)
    else:
        grid, kappa = _exp_decay_grid(T, N, delta)

    schedule = Schedule(kind=kind, T=float(T), delta=float(delta), grid=grid, kappa=kappa)
    violations = validate_schedule(schedule)
    if violations:
        raise ConfigurationError(f"격자 불변식 위반: {'; '.join(violations)}")
    return schedule


def validate_schedule(s: Schedule) -> list[str]:
    violations: list[str] = []
    grid = np.asarray(s.grid, dtype=float)

    if s.T <= 1:
        violations.append(f"T={s.T} 는 1 보다 커야 함")
    if not 0 < s.delta < 1:
        violations.append(f"δ={s.delta} 가 (0, 1) 밖에 있음")
    if grid.size < 2:
        return [*violations, "격자 점이 2개 미만"]
    if abs(grid[0]) > ENDPOINT_TOL:
        violations.append(f"격자 시작 {grid[0]} 이 0 이 아님")
    if abs(grid[-1] - (s.T - s.delta)) > ENDPOINT_TOL:
        violations.append(f"격자 끝 {grid[-1]} 이 T - δ = {s.T - s.delta} 가 아님")

    gammas = np.diff(grid)
    for k in np.flatnonzero(gammas <= 0):
        violations.append(f"k={int(k) + 1} 에서 증가하지 않음")

    if s.kind == "exp_decay":
        if s.kappa is None or not 0 < s.kappa < 1:
            violations.append(f"exp_decay κ={s.kappa} 가 (0, 1) 밖에 있음")
        else:
            expected = s.kappa * np.minimum(1.0, s.T - grid[:-1])
            for k in range(gammas.size - 1):
                if abs(gammas[k] - expected[k]) > EXP_DECAY_TOL:
                    violations.append(f"k={k} 에서 exp_decay 간격 불일치")
            if gammas[-1] > expected[-1] + EXP_DECAY_TOL:
                violations.append(f"k={gammas.size - 1} 에서 마지막 간격이 κ 규칙을 넘음")

    if np.all(gammas > 0):
        ratios = gammas[1:] / gammas[:-1]
        for k in np.flatnonzero((ratios > RATIO_MAX) | (ratios < RATIO_MIN)):
            violations.append(f"k={int(k) + 1} 에서 연속 간격 비율 한계를 벗어남")

    return violations
