import logging
from collections.abc import Generator
from contextlib import contextmanager

from sqlalchemy import create_engine, text
from sqlalchemy.orm import Session, sessionmaker

from zodmc.core.config import get_settings
from zodmc.models.base import Base


settings = get_settings()

logger = logging.getLogger(__name__)

engine = create_engine(
    settings.database_url,
    echo=settings.debug,
    pool_pre_ping=True,
)

SessionLocal = sessionmaker(engine, class_=Session, expire_on_commit=False)


@contextmanager
def get_session() -> Generator[Session]:
    with SessionLocal() as session:
        try:
            yield session
            session.commit()
        except Exception as e:
            logger.error(f"데이터베이스 세션 오류: {e}")
            session.rollback()
            raise


def init_db() -> None:
    import zodmc.models  # noqa: F401  테이블 등록

    Base.metadata.create_all(engine)


def check_connection() -> bool:
    try:
        with SessionLocal() as session:
            result = session.execute(text("SELECT sqlite_version()"))
            version_info = result.fetchone()
            if version_info:
                logger.info(f"데이터베이스 연결 성공! SQLite 버전: {version_info[0]}")
                return True
            return False
    except Exception as e:
        logger.error(f"데이터베이스 연결 테스트 실패: {e}")
        return False
