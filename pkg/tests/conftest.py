import os
from collections.abc import Generator
from contextlib import contextmanager

import numpy as np
import pytest
from sqlalchemy import create_engine
from sqlalchemy.orm import Session
from sqlalchemy.pool import StaticPool


# 모듈 import 전에 설정해야 zodmc.db 가 파일 DB 를 만들지 않습니다
os.environ.setdefault("DATABASE_URL", "sqlite://")

from zodmc.models.base import Base  # noqa: E402
from zodmc.services.gmm import GmmSpec, d1_gmm_spec  # noqa: E402


TEST_DATABASE_URL = "sqlite://"


@pytest.fixture(scope="session")
def test_engine():
    import zodmc.models  # noqa: F401

    engine = create_engine(
        TEST_DATABASE_URL,
        connect_args={"check_same_thread": False},
        poolclass=StaticPool,
    )
    Base.metadata.create_all(engine)

    yield engine

    Base.metadata.drop_all(engine)
    engine.dispose()


@pytest.fixture
def db_session(test_engine) -> Generator[Session]:
    with test_engine.connect() as connection:
        transaction = connection.begin()

        session = Session(
            bind=connection,
            expire_on_commit=False,
            join_transaction_mode="create_savepoint",
        )

        yield session

        session.close()
        transaction.rollback()


@pytest.fixture
def session_scope(db_session: Session):
    @contextmanager
    def scope():
        yield db_session
        db_session.flush()

    return scope


@pytest.fixture
def d1_spec() -> GmmSpec:
    return d1_gmm_spec()


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)


@pytest.fixture
def sample_record_data() -> dict:
    return {
        "experiment": "d1-gmm-budget",
        "cell_id": "zodmc-b2200",
        "algorithm": "zodmc",
        "budget": 2200,
        "seed": 7,
        "status": "ok",
        "ledger_total": 123456,
        "metrics": {"mmd": 0.01, "w2": 0.5},
    }
