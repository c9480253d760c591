import io

import numpy as np
from sqlalchemy import select
from sqlalchemy.orm import Session

from zodmc.models.ground_truth import GroundTruthBatch


def _to_npy(samples: np.ndarray) -> bytes:
    buffer = io.BytesIO()
    np.save(buffer, np.ascontiguousarray(samples, dtype=float), allow_pickle=False)
    return buffer.getvalue()


def _from_npy(blob: bytes) -> np.ndarray:
    return np.load(io.BytesIO(blob), allow_pickle=False)


def create_ground_truth(
    db: Session,
    key: str,
    target_name: str,
    seed: int,
    samples: np.ndarray,
    ledger_total: int = 0,
) -> GroundTruthBatch:
    batch = GroundTruthBatch(
        key=key,
        target_name=target_name,
        seed=seed,
        n_samples=int(samples.shape[0]),
        dim=int(samples.shape[1]),
        samples=_to_npy(samples),
        ledger_total=ledger_total,
    )
    db.add(batch)
    db.flush()
    db.refresh(batch)
    return batch


def read_ground_truth(db: Session, key: str) -> np.ndarray | None:
    batch = db.execute(
        select(GroundTruthBatch).where(GroundTruthBatch.key == key)
    ).scalar_one_or_none()
    if batch is None:
        return None
    return _from_npy(batch.samples)
