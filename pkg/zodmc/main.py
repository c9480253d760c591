import argparse
import asyncio
import logging
from collections.abc import Sequence
from pathlib import Path

from pydantic import BaseModel, ValidationError

from zodmc.core.config import get_settings
from zodmc.core.errors import ConfigurationError, UnsupportedTargetError, ZodmcError
from zodmc.crud.run_record import (
    delete_run_records,
    read_run_record_by_id,
    read_run_records,
)
from zodmc.db.database import check_connection, get_session, init_db
from zodmc.schemas.experiment import (
    AcceptanceStudyConfig,
    ExperimentConfig,
    ScoreErrorStudyConfig,
    load_config,
    load_yaml,
)
from zodmc.schemas.run_record import RunRecordResponse
from zodmc.services.bench import run_experiment
from zodmc.services.studies import run_acceptance_study, run_score_error_study


logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_ALL_FAILED = 3


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="설정 파일의 시드를 덮어씀")
    common.add_argument("--workers", type=int, default=None, help="동시 실행 셀 또는 스레드 수")
    common.add_argument("--out", type=str, default=None, help="결과 디렉터리")

    parser = argparse.ArgumentParser(
        prog="zodmc", description="0차 확산 몬테카를로 샘플러 벤치마크"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    for name, help_text in (
        ("run", "알고리즘 비교 실험 실행"),
        ("score-error", "점수 추정 오차 실험"),
        ("acceptance", "RGO 수락 수 실험"),
        ("validate", "설정 파일 검증만 수행"),
    ):
        cmd = sub.add_parser(name, parents=[common], help=help_text)
        cmd.add_argument("config", type=Path, help="YAML 설정 파일")

    history = sub.add_parser("history", help="저장된 실행 기록 조회")
    history.add_argument("experiment", type=str, help="실험 이름")
    history.add_argument("--limit", type=int, default=20, help="최대 기록 수")

    show = sub.add_parser("show", help="실행 기록 하나를 자세히 출력")
    show.add_argument("record_id", type=int, help="기록 ID")

    prune = sub.add_parser("prune", help="실험의 실행 기록 삭제")
    prune.add_argument("experiment", type=str, help="실험 이름")
    return parser


def detect_config_model(data: dict) -> type[BaseModel]:
    """최상위 키로 설정 종류를 고릅니다."""
    if "algorithms" in data:
        return ExperimentConfig
    if {"trajectories", "acceptance_proposals", "algorithm"} & data.keys():
        return AcceptanceStudyConfig
    return ScoreErrorStudyConfig


def validate_config(path: Path) -> BaseModel:
    """스키마 검증에 더해 목표와 시간 격자를 실제로 만들어 봅니다."""
    model = detect_config_model(load_yaml(path))
    config = load_config(path, model)
    try:
        config.target.build(getattr(config, "seed", 0))
        if isinstance(config, ExperimentConfig):
            for alg in config.algorithms:
                if alg.kind == "zodmc":
                    alg.schedule.build()
        elif isinstance(config, AcceptanceStudyConfig):
            config.algorithm.schedule.build()
        else:
            config.schedule.build()
    except (ValueError, ValidationError) as e:
        raise ConfigurationError(f"설정으로 목표/격자를 만들 수 없습니다 ({path}): {e}") from e
    logger.info(f"설정 검증 통과: {path} ({model.__name__})")
    return config


def show_history(experiment: str, limit: int) -> int:
    with get_session() as db:
        records, total = read_run_records(db, experiment=experiment, limit=limit)
    logger.info(f"'{experiment}' 실행 기록 {total}개 중 {len(records)}개")
    for record in records:
        item = RunRecordResponse.model_validate(record)
        mmd = (item.metrics or {}).get("mmd")
        logger.info(
            f"#{item.id} {item.cell_id} [{item.status}] 질의 {item.ledger_total}, MMD={mmd}"
        )
    return EXIT_OK


def show_record(record_id: int) -> int:
    with get_session() as db:
        record = read_run_record_by_id(db, record_id)
        item = RunRecordResponse.model_validate(record) if record is not None else None
    if item is None:
        logger.error(f"실행 기록을 찾을 수 없습니다: #{record_id}")
        return EXIT_FAILURE
    logger.info(f"실행 기록 #{record_id}\n{item.model_dump_json(indent=2)}")
    return EXIT_OK


def prune_records(experiment: str) -> int:
    with get_session() as db:
        deleted = delete_run_records(db, experiment)
    logger.info(f"'{experiment}' 실행 기록 {deleted}개 삭제")
    return EXIT_OK


def dispatch(args: argparse.Namespace) -> int:
    if args.command == "history":
        return show_history(args.experiment, args.limit)
    if args.command == "show":
        return show_record(args.record_id)
    if args.command == "prune":
        return prune_records(args.experiment)
    if args.command == "validate":
        validate_config(args.config)
        return EXIT_OK
    if args.command == "score-error":
        config = load_config(args.config, ScoreErrorStudyConfig)
        run_score_error_study(config, seed=args.seed, output_dir=args.out, workers=args.workers)
        return EXIT_OK
    if args.command == "acceptance":
        config = load_config(args.config, AcceptanceStudyConfig)
        run_acceptance_study(config, seed=args.seed, output_dir=args.out, workers=args.workers)
        return EXIT_OK

    config = load_config(args.config, ExperimentConfig)
    manifest = asyncio.run(
        run_experiment(config, seed=args.seed, workers=args.workers, output_dir=args.out)
    )
    if manifest.all_failed:
        logger.error(f"모든 셀이 실패했습니다: {config.name}")
        return EXIT_ALL_FAILED
    return EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    settings = get_settings()
    logging.basicConfig(
        level=settings.log_level.upper(),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    args = build_parser().parse_args(argv)
    if getattr(args, "workers", None) is not None and args.workers < 1:
        logger.error("--workers 는 1 이상이어야 합니다.")
        return EXIT_CONFIG

    if not check_connection():
        return EXIT_FAILURE
    init_db()
    try:
        return dispatch(args)
    except (ConfigurationError, UnsupportedTargetError) as e:
        logger.error(f"설정 오류: {e}")
        return EXIT_CONFIG
    except ZodmcError as e:
        logger.error(f"실행 실패: {e}")
        return EXIT_FAILURE


if __name__ == "__main__":
    raise SystemExit(main())
