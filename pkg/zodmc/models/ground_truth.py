from sqlalchemy import Column, Integer, LargeBinary, String

from zodmc.models.base import Base


class GroundTruthBatch(Base):
    __tablename__ = "ground_truth_batches"

    key = Column(
        String(64), nullable=False, unique=True, index=True, comment="목표/시드/표본 수 해시"
    )

    target_name = Column(String(100), nullable=False, comment="목표 분포 이름")

    seed = Column(Integer, nullable=False, comment="생성 시드")

    n_samples = Column(Integer, nullable=False, comment="표본 수")

    dim = Column(Integer, nullable=False, comment="차원")

    samples = Column(LargeBinary, nullable=False, comment="npy 직렬화 표본")

    ledger_total = Column(Integer, nullable=False, default=0, comment="생성에 쓴 질의 수")

    def __repr__(self):
        return (
            f"<GroundTruthBatch("
            f"id={self.id}, "
            f"target='{self.target_name}', "
            f"n={self.n_samples}, "
            f"dim={self.dim})>"
        )
