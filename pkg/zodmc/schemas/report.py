from datetime import datetime

from pydantic import BaseModel, ConfigDict, Field


class MetricsReport(BaseModel):
    mmd: float = Field(..., ge=0, description="불편 MMD² (보고 시 0 에서 자름)")
    mmd_raw: float = Field(..., description="자르기 전 MMD² U-통계량")
    w2: float = Field(..., ge=0, description="정확한 할당 기반 경험적 W2")
    mean_error: float = Field(..., ge=0, description="평균 벡터 차의 노름")
    cov_error: float = Field(..., ge=0, description="공분산 차의 연산자 노름")
    n_x: int = Field(..., ge=1, description="비교에 쓴 표본 수")
    n_y: int = Field(..., ge=1, description="비교에 쓴 정답 표본 수")
    bandwidth: float = Field(..., gt=0, description="MMD 커널 대역폭 (중앙값 휴리스틱)")

    mode_weights: list[float] | None = Field(None, description="모드별 가중치")
    reference_mode_weights: list[float] | None = Field(None, description="정답 모드 가중치")
    mode_tv: float | None = Field(None, ge=0, le=1, description="모드 가중치 총변동 거리")
    unassigned_fraction: float | None = Field(None, ge=0, le=1, description="미배정 비율")
    annulus_mass: float | None = Field(None, ge=0, le=1, description="고리 영역 질량")
    reference_annulus_mass: float | None = Field(None, ge=0, le=1, description="정답 고리 질량")


class CellResult(BaseModel):
    cell_id: str = Field(..., description="스윕 셀 식별자", examples=["zodmc-b2200-r26"])
    algorithm: str = Field(..., description="알고리즘 이름", examples=["zodmc"])
    budget: int = Field(..., ge=1, description="점수 평가당 질의 예산")
    sweep_value: float | None = Field(None, description="반경/차원 등 스윕 값")
    status: str = Field(..., description="ok 또는 failed", examples=["ok"])
    error: str | None = Field(None, description="실패 사유")
    ledger_total: int = Field(0, ge=0, description="셀이 쓴 전체 0차 질의 수")
    ledger_by_phase: dict[str, int] = Field(default_factory=dict, description="단계별 질의 수")
    budget_slack: int = Field(0, description="예산을 넘긴 질의 수 (한 단계 분량 이내)")
    truncated: bool = Field(False, description="예산 도달로 조기 종료했는지")
    envelope_violations: int = Field(0, ge=0, description="낡은 V̂* 로 수락된 표본 수")
    importance_fallbacks: int = Field(0, ge=0, description="중요도 가중 평균으로 대체한 점수 수")
    diverged: int = Field(0, ge=0, description="발산한 ULA 체인 수")
    metrics: MetricsReport | None = Field(None, description="지표")
    samples_path: str | None = Field(None, description="표본 CSV 경로")
    schedule: dict | None = Field(None, description="실현된 시간 격자")
    per_step_acceptance: list[float] | None = Field(None, description="단계별 평균 수락률")


class RunManifest(BaseModel):
    name: str = Field(..., description="실험 이름")
    package_version: str = Field(..., description="zodmc 버전")
    numpy_version: str = Field(..., description="numpy 버전")
    scipy_version: str = Field(..., description="scipy 버전")
    seed: int = Field(..., description="실험 시드")
    workers: int = Field(..., description="동시 실행 셀 수")
    config: dict = Field(..., description="설정 원문")
    ground_truth_keys: list[str] = Field(default_factory=list, description="정답 표본 캐시 키")
    cells: list[CellResult] = Field(default_factory=list, description="셀 결과")
    started_at: datetime = Field(..., description="시작 시각")
    finished_at: datetime | None = Field(None, description="종료 시각")

    model_config = ConfigDict(from_attributes=True)

    @property
    def all_failed(self) -> bool:
        return bool(self.cells) and all(c.status != "ok" for c in self.cells)
