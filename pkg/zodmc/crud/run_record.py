from sqlalchemy import delete, func, select
from sqlalchemy.orm import Session

from zodmc.models.run_record import RunRecord
from zodmc.schemas.run_record import RunRecordCreate


def create_run_record(db: Session, record_in: RunRecordCreate) -> RunRecord:
    record = RunRecord(**record_in.model_dump())
    db.add(record)
    db.flush()
    db.refresh(record)
    return record


def read_run_record_by_id(db: Session, record_id: int) -> RunRecord | None:
    return db.execute(select(RunRecord).where(RunRecord.id == record_id)).scalar_one_or_none()


def read_run_records(
    db: Session,
    experiment: str | None = None,
    skip: int = 0,
    limit: int = 100,
) -> tuple[list[RunRecord], int]:
    count_query = select(func.count()).select_from(RunRecord)
    query = select(RunRecord)
    if experiment is not None:
        count_query = count_query.where(RunRecord.experiment == experiment)
        query = query.where(RunRecord.experiment == experiment)
    total = db.scalar(count_query)

    query = query.order_by(RunRecord.id.desc()).offset(skip).limit(limit)
    records = db.execute(query).scalars().all()

    return list(records), total or 0


def delete_run_records(db: Session, experiment: str) -> int:
    result = db.execute(delete(RunRecord).where(RunRecord.experiment == experiment))
    db.flush()
    return result.rowcount or 0
