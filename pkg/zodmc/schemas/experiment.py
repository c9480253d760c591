import logging
from pathlib import Path
from typing import Annotated, Literal, TypeVar

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from zodmc.core.errors import ConfigurationError
from zodmc.schemas.sampler import (
    AlgorithmConfig,
    PolicyConfig,
    ScheduleConfig,
    ZodmcAlgorithmConfig,
)
from zodmc.schemas.target import (
    AnnulusTargetConfig,
    GaussianTargetConfig,
    GmmTargetConfig,
    RandomizedGmmTargetConfig,
    TargetConfig,
)


logger = logging.getLogger(__name__)

MetricName = Literal["mmd", "w2", "moments", "mode_weights", "annulus_mass"]


class RadiusSweep(BaseModel):
    kind: Literal["radius"] = "radius"
    values: list[float] = Field(
        ..., min_length=1, description="모드를 둘 반경", examples=[[1, 6, 11, 16, 21, 26]]
    )

    model_config = ConfigDict(extra="forbid")

    def apply(self, target: TargetConfig, value: float) -> TargetConfig:
        if isinstance(target, GmmTargetConfig):
            return target.model_copy(update={"radius": value})
        if isinstance(target, AnnulusTargetConfig):
            base = target.base.model_copy(update={"radius": value})
            return target.model_copy(update={"base": base})
        raise ConfigurationError(f"반경 스윕은 혼합 분포 목표에만 쓸 수 있습니다. ({target.kind})")


class DimensionSweep(BaseModel):
    kind: Literal["dimension"] = "dimension"
    values: list[int] = Field(
        ..., min_length=1, description="차원 목록", examples=[[2, 4, 6, 8, 10]]
    )

    model_config = ConfigDict(extra="forbid")

    def apply(self, target: TargetConfig, value: float) -> TargetConfig:
        if isinstance(target, RandomizedGmmTargetConfig | GaussianTargetConfig):
            return target.model_copy(update={"dim": int(value)})
        raise ConfigurationError(f"차원 스윕을 지원하지 않는 목표입니다. ({target.kind})")


SweepConfig = Annotated[RadiusSweep | DimensionSweep, Field(discriminator="kind")]


class ExperimentConfig(BaseModel):
    name: str = Field(..., min_length=1, description="실험 이름", examples=["d1-gmm-budget"])
    target: TargetConfig = Field(..., description="목표 분포")
    algorithms: list[AlgorithmConfig] = Field(..., min_length=1, description="비교할 알고리즘")
    oracle_budget: int | list[int] = Field(
        ..., description="점수 평가당 질의 예산 (스윕 가능)", examples=[[200, 1200, 2200]]
    )
    n_output_samples: int = Field(1000, ge=2, description="알고리즘별 출력 표본 수")
    ground_truth_samples: int = Field(20_000, ge=2, description="정답 표본 수")
    metrics: list[MetricName] = Field(
        default_factory=lambda: ["mmd", "w2", "moments", "mode_weights"],
        description="계산할 지표",
    )
    sweep: SweepConfig | None = Field(None, description="반경/차원 스윕")
    seed: int = Field(0, ge=0, description="실험 시드")
    output_dir: str | None = Field(None, description="결과 디렉터리. 없으면 설정값")

    model_config = ConfigDict(extra="forbid")

    @field_validator("oracle_budget")
    @classmethod
    def check_budget(cls, v: int | list[int]) -> int | list[int]:
        budgets = v if isinstance(v, list) else [v]
        if not budgets or any(b < 1 for b in budgets):
            raise ValueError("질의 예산은 양수여야 합니다.")
        return v

    @property
    def budgets(self) -> list[int]:
        return self.oracle_budget if isinstance(self.oracle_budget, list) else [self.oracle_budget]


class ScoreErrorStudyConfig(BaseModel):
    name: str = Field(..., min_length=1, description="실험 이름")
    target: TargetConfig = Field(..., description="해석적 점수가 있는 목표")
    schedule: ScheduleConfig = Field(default_factory=ScheduleConfig, description="평가 시간 격자")
    policy: PolicyConfig = Field(
        default_factory=lambda: PolicyConfig(kind="fixed"), description="표본 수 정책"
    )
    oracle_budget: int = Field(2200, ge=1, description="proposals 정책의 점수당 제안 수")
    n_eval_points: int = Field(200, ge=1, description="시간당 평가 지점 수")
    include_delta: bool = Field(True, description="격자 밖의 마지막 시간 t = δ 도 측정")
    seed: int = Field(0, ge=0, description="실험 시드")
    output_dir: str | None = Field(None, description="결과 디렉터리")

    model_config = ConfigDict(extra="forbid")


class AcceptanceStudyConfig(BaseModel):
    name: str = Field(..., min_length=1, description="실험 이름")
    target: TargetConfig = Field(..., description="목표 분포")
    algorithm: ZodmcAlgorithmConfig = Field(
        default_factory=ZodmcAlgorithmConfig, description="궤적을 만들 ZOD-MC 설정"
    )
    oracle_budget: int = Field(2200, ge=1, description="궤적 진행에 쓸 점수당 제안 수")
    trajectories: int = Field(1000, ge=1, description="궤적 수")
    acceptance_proposals: int = Field(10_000, ge=1, description="시간별 수락 측정 제안 수")
    seed: int = Field(0, ge=0, description="실험 시드")
    output_dir: str | None = Field(None, description="결과 디렉터리")

    model_config = ConfigDict(extra="forbid")


ConfigT = TypeVar("ConfigT", bound=BaseModel)


def load_yaml(path: str | Path) -> dict:
    try:
        with open(path, encoding="utf-8") as f:
            data = yaml.safe_load(f)
    except (OSError, yaml.YAMLError) as e:
        raise ConfigurationError(f"설정 파일을 읽을 수 없습니다: {path} ({e})") from e
    if not isinstance(data, dict):
        raise ConfigurationError(f"설정 파일 최상위는 매핑이어야 합니다: {path}")
    return data


def load_config(path: str | Path, model: type[ConfigT]) -> ConfigT:
    data = load_yaml(path)
    try:
        config = model.model_validate(data)
    except ValidationError as e:
        raise ConfigurationError(f"설정 검증 실패 ({path}):\n{e}") from e
    logger.info(f"설정 로드: {path} ({model.__name__})")
    return config
