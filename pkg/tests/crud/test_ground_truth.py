import numpy as np
import pytest
from sqlalchemy.exc import IntegrityError
from sqlalchemy.orm import Session

from zodmc.crud.ground_truth import create_ground_truth, read_ground_truth


class TestGroundTruthCRUD:
    def test_roundtrip_is_exact(self, db_session: Session, rng: np.random.Generator):
        samples = rng.standard_normal((50, 3))

        batch = create_ground_truth(db_session, "a" * 64, "gaussian", 0, samples, 150)
        loaded = read_ground_truth(db_session, "a" * 64)

        assert batch.n_samples == 50
        assert batch.dim == 3
        assert batch.ledger_total == 150
        np.testing.assert_array_equal(loaded, samples)

    def test_missing_key(self, db_session: Session):
        assert read_ground_truth(db_session, "b" * 64) is None

    def test_key_is_unique(self, db_session: Session):
        samples = np.zeros((2, 2))
        create_ground_truth(db_session, "c" * 64, "gmm", 0, samples)

        with pytest.raises(IntegrityError):
            create_ground_truth(db_session, "c" * 64, "gmm", 1, samples)
