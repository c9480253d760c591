"""
데이터베이스 패키지

실행 기록과 정답 표본 캐시를 담는 SQLite 연결과 세션 관리를 담당합니다.
"""

from .database import (
    SessionLocal,
    check_connection,
    engine,
    get_session,
    init_db,
)


__all__ = [
    "engine",
    "SessionLocal",
    "get_session",
    "init_db",
    "check_connection",
]
