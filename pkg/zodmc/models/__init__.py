from .ground_truth import GroundTruthBatch
from .run_record import RunRecord


__all__ = ["RunRecord", "GroundTruthBatch"]
