from sqlalchemy import JSON, Column, Float, Integer, String, Text

from zodmc.models.base import Base


class RunRecord(Base):
    __tablename__ = "run_records"

    experiment = Column(String(100), nullable=False, index=True, comment="실험 이름")

    cell_id = Column(String(200), nullable=False, comment="스윕 셀 식별자")

    algorithm = Column(String(20), nullable=False, comment="알고리즘 이름")

    budget = Column(Integer, nullable=False, comment="점수 평가당 질의 예산")

    sweep_value = Column(Float, nullable=True, comment="반경/차원 스윕 값")

    seed = Column(Integer, nullable=False, comment="셀 시드")

    status = Column(String(20), nullable=False, comment="ok 또는 failed")

    error = Column(Text, nullable=True, comment="실패 사유")

    ledger_total = Column(Integer, nullable=False, default=0, comment="전체 0차 질의 수")

    metrics = Column(JSON, nullable=True, comment="지표 보고서")

    samples_path = Column(String(500), nullable=True, comment="표본 CSV 경로")

    def __repr__(self):
        return (
            f"<RunRecord("
            f"id={self.id}, "
            f"experiment='{self.experiment}', "
            f"cell_id='{self.cell_id}', "
            f"status='{self.status}')>"
        )
