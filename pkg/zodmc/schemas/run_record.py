from datetime import datetime

from pydantic import BaseModel, ConfigDict, Field


class RunRecordCreate(BaseModel):
    experiment: str = Field(
        ..., min_length=1, max_length=100, description="실험 이름", examples=["d1-gmm-budget"]
    )
    cell_id: str = Field(..., min_length=1, max_length=200, description="스윕 셀 식별자")
    algorithm: str = Field(..., description="알고리즘 이름", examples=["zodmc", "ula"])
    budget: int = Field(..., ge=1, description="점수 평가당 질의 예산")
    sweep_value: float | None = Field(None, description="반경/차원 스윕 값")
    seed: int = Field(..., ge=0, description="셀 시드")
    status: str = Field(..., description="ok 또는 failed", examples=["ok"])
    error: str | None = Field(None, description="실패 사유")
    ledger_total: int = Field(0, ge=0, description="전체 0차 질의 수")
    metrics: dict | None = Field(None, description="지표 보고서")
    samples_path: str | None = Field(None, description="표본 CSV 경로")


class RunRecordResponse(BaseModel):
    id: int = Field(..., description="기록 ID")
    experiment: str = Field(..., description="실험 이름")
    cell_id: str = Field(..., description="스윕 셀 식별자")
    algorithm: str = Field(..., description="알고리즘 이름")
    budget: int = Field(..., description="점수 평가당 질의 예산")
    sweep_value: float | None = Field(None, description="반경/차원 스윕 값")
    seed: int = Field(..., description="셀 시드")
    status: str = Field(..., description="ok 또는 failed")
    error: str | None = Field(None, description="실패 사유")
    ledger_total: int = Field(..., description="전체 0차 질의 수")
    metrics: dict | None = Field(None, description="지표 보고서")
    samples_path: str | None = Field(None, description="표본 CSV 경로")
    created_at: datetime = Field(..., description="기록 시각")

    model_config = ConfigDict(from_attributes=True)
