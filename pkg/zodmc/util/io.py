import csv
import logging
from collections.abc import Iterable, Sequence
from pathlib import Path

import numpy as np
from pydantic import BaseModel


logger = logging.getLogger(__name__)


def _prepare(path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def write_samples_csv(path: str | Path, samples: np.ndarray) -> Path:
    """헤더 x0..x{d-1}, 값은 %.17g 로 씁니다. 같은 배열이면 바이트까지 같습니다."""
    path = _prepare(path)
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    header = ",".join(f"x{i}" for i in range(samples.shape[1]))
    np.savetxt(path, samples, fmt="%.17g", delimiter=",", header=header, comments="")
    return path


def read_samples_csv(path: str | Path) -> np.ndarray:
    return np.atleast_2d(np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2))


def write_json(path: str | Path, model: BaseModel) -> Path:
    path = _prepare(path)
    path.write_text(model.model_dump_json(indent=2), encoding="utf-8")
    return path


def _format(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def write_rows_csv(path: str | Path, fieldnames: Sequence[str], rows: Iterable[dict]) -> Path:
    path = _prepare(path)
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=list(fieldnames), lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _format(row.get(k)) for k in fieldnames})
    logger.info(f"CSV 저장: {path}")
    return path
