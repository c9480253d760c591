"""
샘플러 전역 예외 계층

모든 예외는 ZodmcError 를 상속합니다. CLI 는 ConfigurationError 를 종료 코드 2 로 변환합니다.
"""

from typing import Any

import numpy as np


class ZodmcError(Exception):
    pass


class ConfigurationError(ZodmcError, ValueError):
    pass


class ArgumentError(ZodmcError, ValueError):
    pass


class UnsupportedTargetError(ZodmcError):
    pass


class RgoStarvedError(ZodmcError):
    def __init__(self, proposals_used: int, t: float, x: np.ndarray):
        self.proposals_used = proposals_used
        self.t = t
        self.x = np.asarray(x, dtype=float)
        super().__init__(
            f"기각 샘플링이 수락 없이 제안 한도를 소진했습니다. "
            f"(t={t:.4g}, 제안 수={proposals_used})"
        )


class DominationViolationError(ZodmcError):
    def __init__(self, witness: np.ndarray, ratio: float):
        self.witness = np.asarray(witness, dtype=float)
        self.ratio = ratio
        super().__init__(
            f"제안 분포가 목표 밀도를 덮지 못합니다. "
            f"(비율={ratio:.6g}, 지점={self.witness.tolist()})"
        )


class SamplerAbortedError(ZodmcError):
    def __init__(self, message: str, diagnostics: dict[str, Any], trace: list[np.ndarray]):
        self.diagnostics = diagnostics
        self.trace = trace
        super().__init__(message)
