from typing import Annotated, Literal

from pydantic import BaseModel, ConfigDict, Field, model_validator

from zodmc.services.baselines import UlaConfig
from zodmc.services.schedule import Schedule, build_schedule
from zodmc.services.score import SampleCountPolicy


class ScheduleConfig(BaseModel):
    kind: Literal["constant", "linear", "exp_decay"] = Field(
        "exp_decay", description="시간 격자 종류"
    )
    T: float = Field(2.0, gt=1, description="순방향 시간 지평", examples=[2.0, 10.0])
    N: int = Field(25, ge=1, description="단계 수", examples=[25, 50])
    delta: float = Field(5e-3, gt=0, lt=1, description="조기 종료 시간 δ")

    model_config = ConfigDict(extra="forbid")

    def build(self) -> Schedule:
        return build_schedule(self.kind, self.T, self.N, self.delta)


class PolicyConfig(BaseModel):
    kind: Literal["fixed", "theory", "proposals", "step_scaled"] = Field(
        "proposals", description="점수당 표본 수 정책"
    )
    n_fixed: int = Field(100, ge=1, description="fixed 정책의 표본 수")
    c: float = Field(1.0, gt=0, description="theory/step_scaled 계수")
    eps: float = Field(0.5, gt=0, description="theory 정책의 목표 오차")
    n_min: int = Field(1, ge=1, description="표본 수 하한")
    n_max: int = Field(10_000, ge=1, description="표본 수 상한")

    model_config = ConfigDict(extra="forbid")

    @model_validator(mode="after")
    def check_bounds(self):
        if self.n_max < self.n_min:
            raise ValueError(f"n_max ≥ n_min 이어야 합니다. ({self.n_max} < {self.n_min})")
        return self

    def build(self, budget: int) -> SampleCountPolicy:
        """budget 은 점수 평가당 질의 수입니다. proposals 정책에서만 쓰입니다."""
        return SampleCountPolicy(
            kind=self.kind,
            n_fixed=self.n_fixed,
            c=self.c,
            eps=self.eps,
            n_min=self.n_min,
            n_max=self.n_max,
            proposals=budget,
        )


class ZodmcAlgorithmConfig(BaseModel):
    kind: Literal["zodmc"] = "zodmc"
    schedule: ScheduleConfig = Field(default_factory=ScheduleConfig, description="시간 격자")
    policy: PolicyConfig = Field(default_factory=PolicyConfig, description="표본 수 정책")
    opt_starts: list[list[float]] | None = Field(
        None, description="최적화 시작점. 없으면 원점, 혼합 평균, 가우시안 표본 8개"
    )
    rgo_batch_size: int | None = Field(None, ge=1, description="RGO 제안 배치 크기")
    cap_budget: bool = Field(
        True, description="총 질의를 궤적 수 × N × 예산으로 제한하고 넘으면 조기 종료"
    )

    model_config = ConfigDict(extra="forbid")


class UlaAlgorithmConfig(BaseModel):
    kind: Literal["ula"] = "ula"
    step: float = Field(0.01, gt=0, description="랑주뱅 스텝 크기")
    init: Literal["origin", "gaussian"] = Field("origin", description="체인 초기화")
    fd_step: float = Field(1e-4, gt=0, description="유한차분 간격")
    schedule_steps: int = Field(
        25, ge=1, description="zodmc 항목이 없을 때 예산 환산에 쓸 확산 단계 수"
    )

    model_config = ConfigDict(extra="forbid")

    def build(self, n_steps: int, n_chains: int) -> UlaConfig:
        return UlaConfig(
            step=self.step,
            n_steps=n_steps,
            n_chains=n_chains,
            init=self.init,
            fd_step=self.fd_step,
        )


AlgorithmConfig = Annotated[
    ZodmcAlgorithmConfig | UlaAlgorithmConfig,
    Field(discriminator="kind"),
]
