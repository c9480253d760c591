"""
설정 파일 기반 벤치마크 실행기

(스윕 값 × 알고리즘 × 예산) 셀마다 같은 질의 예산으로 샘플러를 돌리고, 목표별로 한 번
만든 정답 표본과 비교해 지표를 남깁니다. 셀은 asyncio 작업으로 최대 workers 개까지
동시에 실행되고, 수치 계산은 스레드에서 돌아갑니다.
"""

import asyncio
import hashlib
import json
import logging
from collections.abc import Callable
from contextlib import AbstractContextManager
from dataclasses import dataclass
from datetime import UTC, datetime
from pathlib import Path

import numpy as np
import scipy
from sqlalchemy.orm import Session

import zodmc
from zodmc.core.config import get_settings
from zodmc.crud.ground_truth import create_ground_truth, read_ground_truth
from zodmc.crud.run_record import create_run_record
from zodmc.db.database import get_session
from zodmc.schemas.experiment import ExperimentConfig
from zodmc.schemas.report import CellResult, RunManifest
from zodmc.schemas.run_record import RunRecordCreate
from zodmc.schemas.sampler import AlgorithmConfig, UlaAlgorithmConfig, ZodmcAlgorithmConfig
from zodmc.schemas.target import TargetConfig
from zodmc.services.baselines import (
    default_envelope,
    ground_truth_rejection,
    matched_ula_steps,
    run_ula,
)
from zodmc.services.diffuser import SampleBatch, ZodmcConfig, run_zodmc
from zodmc.services.metrics import compute_report
from zodmc.services.target import QueryLedger, Target
from zodmc.util.io import write_json, write_rows_csv, write_samples_csv


logger = logging.getLogger(__name__)

CURVE_COLUMNS = (
    "sweep_value",
    "algorithm",
    "budget",
    "mmd",
    "w2",
    "mode_tv",
    "mean_error",
    "cov_error",
    "annulus_mass",
    "ledger_total",
    "status",
)

SessionScope = Callable[[], AbstractContextManager[Session]]


@dataclass(frozen=True, eq=False)
class Cell:
    cell_id: str
    algorithm: AlgorithmConfig
    budget: int
    sweep_value: float | None
    target: Target
    reference: np.ndarray
    seed: int


def ground_truth_key(target_config: TargetConfig, seed: int, n: int) -> str:
    """목표 설정/시드/표본 수의 정규화된 JSON 에 대한 sha256."""
    payload = json.dumps(
        {"target": target_config.model_dump(mode="json"), "seed": seed, "n": n},
        sort_keys=True,
        separators=(",", ":"),
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def generate_ground_truth(target: Target, n: int, key: str) -> tuple[np.ndarray, int]:
    """정답 표본과 생성에 쓴 질의 수. 난수는 캐시 키에서 파생되어 항상 같은 표본이 나옵니다."""
    rng = np.random.default_rng(int.from_bytes(hashlib.sha256(key.encode()).digest()[:8]))
    ledger = QueryLedger()
    proposal, log_m = default_envelope(target, ledger)
    batch = ground_truth_rejection(target, proposal, log_m, n, ledger, rng)
    return batch.points, ledger.zeroth_order_count


async def load_ground_truth(
    session_scope: SessionScope,
    target_config: TargetConfig,
    target: Target,
    seed: int,
    n: int,
) -> tuple[str, np.ndarray]:
    key = ground_truth_key(target_config, seed, n)
    with session_scope() as db:
        cached = read_ground_truth(db, key)
    if cached is not None:
        logger.info(f"정답 표본 캐시 사용: {target.name} ({key[:12]})")
        return key, cached

    logger.info(f"정답 표본 생성: {target.name}, {n}개")
    samples, queries = await asyncio.to_thread(generate_ground_truth, target, n, key)
    with session_scope() as db:
        create_ground_truth(db, key, target.name, seed, samples, ledger_total=queries)
    return key, samples


def diffusion_steps(config: ExperimentConfig) -> int:
    """ULA 예산 환산에 쓰는 확산 단계 수 N."""
    for alg in config.algorithms:
        if isinstance(alg, ZodmcAlgorithmConfig):
            return alg.schedule.N
    return next(a for a in config.algorithms if isinstance(a, UlaAlgorithmConfig)).schedule_steps


def cell_query_cap(config: ExperimentConfig, budget: int) -> int:
    return config.n_output_samples * diffusion_steps(config) * budget


def _cell_id(alg: AlgorithmConfig, budget: int, config: ExperimentConfig, value) -> str:
    cell_id = f"{alg.kind}-b{budget}"
    if config.sweep is not None:
        cell_id += f"-{config.sweep.kind[0]}{value:g}"
    return cell_id


def _run_algorithm(cell: Cell, config: ExperimentConfig, cap: int) -> SampleBatch:
    settings = get_settings()
    ledger = QueryLedger()
    alg = cell.algorithm
    if isinstance(alg, ZodmcAlgorithmConfig):
        zodmc_config = ZodmcConfig(
            schedule=alg.schedule.build(),
            policy=alg.policy.build(cell.budget),
            batch_size=config.n_output_samples,
            seed=cell.seed,
            opt_starts=None if alg.opt_starts is None else tuple(map(np.asarray, alg.opt_starts)),
            max_total_queries=cap if alg.cap_budget else None,
            rgo_batch_size=alg.rgo_batch_size or settings.rgo_batch_size,
            fallback_max_proposals=settings.max_proposals,
        )
        return run_zodmc(cell.target, zodmc_config, ledger)

    n_steps = matched_ula_steps(diffusion_steps(config) * cell.budget, cell.target.dim)
    ula_config = alg.build(n_steps=n_steps, n_chains=config.n_output_samples)
    return run_ula(cell.target, ula_config, ledger, np.random.default_rng(cell.seed), cap)


def _mode_means(target: Target) -> np.ndarray | None:
    for candidate in (target, target.parent):
        if candidate is not None and candidate.gmm is not None:
            return candidate.gmm.means
    return None


def run_cell(cell: Cell, config: ExperimentConfig, out_dir: Path) -> CellResult:
    """셀 하나를 실행합니다. 실패는 예외 대신 status="failed" 결과로 돌려줍니다."""
    cap = cell_query_cap(config, cell.budget)
    base = {
        "cell_id": cell.cell_id,
        "algorithm": cell.algorithm.kind,
        "budget": cell.budget,
        "sweep_value": cell.sweep_value,
    }
    logger.info(f"셀 시작: {cell.cell_id} (질의 상한 {cap})")
    try:
        batch = _run_algorithm(cell, config, cap)
        total = batch.ledger_snapshot.zeroth_order_count
        if batch.points.shape[0] < 2:
            return CellResult(
                **base,
                status="failed",
                error="유효한 표본이 2개 미만입니다.",
                ledger_total=total,
                diverged=batch.diverged,
            )

        annulus = cell.target.metadata.get("annulus")
        report = compute_report(
            batch.points,
            cell.reference,
            np.random.default_rng(cell.seed),
            means=_mode_means(cell.target) if "mode_weights" in config.metrics else None,
            annulus=(
                (annulus["inner"], annulus["outer"])
                if annulus and "annulus_mass" in config.metrics
                else None
            ),
        )
        samples_path = write_samples_csv(out_dir / "samples" / f"{cell.cell_id}.csv", batch.points)
        write_json(out_dir / "metrics" / f"{cell.cell_id}.json", report)
    except Exception as e:
        logger.exception(f"셀 실패: {cell.cell_id}")
        return CellResult(**base, status="failed", error=f"{type(e).__name__}: {e}")

    logger.info(f"셀 완료: {cell.cell_id} (MMD={report.mmd:.4g}, W2={report.w2:.4g})")
    return CellResult(
        **base,
        status="ok",
        ledger_total=total,
        ledger_by_phase=batch.ledger_snapshot.by_phase,
        budget_slack=max(0, total - cap),
        truncated=batch.truncated,
        envelope_violations=batch.envelope_violations,
        importance_fallbacks=batch.metadata.get("importance_fallbacks", 0),
        diverged=batch.diverged,
        metrics=report,
        samples_path=str(samples_path),
        schedule=batch.metadata.get("schedule"),
        per_step_acceptance=(
            batch.per_step_acceptance.tolist() if batch.per_step_acceptance.size else None
        ),
    )


def curve_row(result: CellResult) -> dict:
    row = {
        "sweep_value": result.sweep_value,
        "algorithm": result.algorithm,
        "budget": result.budget,
        "ledger_total": result.ledger_total,
        "status": result.status,
    }
    if result.metrics is not None:
        row |= result.metrics.model_dump(
            include={"mmd", "w2", "mode_tv", "mean_error", "cov_error", "annulus_mass"}
        )
    return row


def _record(config: ExperimentConfig, cell: Cell, result: CellResult) -> RunRecordCreate:
    return RunRecordCreate(
        experiment=config.name,
        cell_id=result.cell_id,
        algorithm=result.algorithm,
        budget=result.budget,
        sweep_value=result.sweep_value,
        seed=cell.seed,
        status=result.status,
        error=result.error,
        ledger_total=result.ledger_total,
        metrics=result.metrics.model_dump(mode="json") if result.metrics else None,
        samples_path=result.samples_path,
    )


async def build_cells(
    config: ExperimentConfig, seed: int, session_scope: SessionScope
) -> tuple[list[Cell], list[str]]:
    values = config.sweep.values if config.sweep is not None else [None]
    plan = []
    keys = []
    for value in values:
        target_config = config.target if value is None else config.sweep.apply(config.target, value)
        target = target_config.build(seed)
        key, reference = await load_ground_truth(
            session_scope, target_config, target, seed, config.ground_truth_samples
        )
        keys.append(key)
        for alg in config.algorithms:
            for budget in config.budgets:
                cell_id = _cell_id(alg, budget, config, value)
                plan.append((cell_id, alg, budget, value, target, reference))

    seeds = [
        int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(len(plan))
    ]
    cells = [Cell(*entry, seed=s) for entry, s in zip(plan, seeds, strict=True)]
    return cells, keys


async def run_experiment(
    config: ExperimentConfig,
    seed: int | None = None,
    workers: int | None = None,
    output_dir: str | Path | None = None,
    session_scope: SessionScope | None = None,
) -> RunManifest:
    settings = get_settings()
    seed = config.seed if seed is None else seed
    workers = workers or settings.workers
    session_scope = session_scope or get_session
    out_dir = Path(output_dir or config.output_dir or settings.output_dir) / config.name
    started_at = datetime.now(UTC)

    logger.info(f"실험 시작: {config.name} (시드 {seed}, 동시 셀 {workers}개)")
    cells, keys = await build_cells(config, seed, session_scope)

    semaphore = asyncio.Semaphore(workers)

    async def run_bounded(cell: Cell) -> CellResult:
        async with semaphore:
            return await asyncio.to_thread(run_cell, cell, config, out_dir)

    results = await asyncio.gather(*(run_bounded(cell) for cell in cells))

    with session_scope() as db:
        for cell, result in zip(cells, results, strict=True):
            create_run_record(db, _record(config, cell, result))

    write_rows_csv(out_dir / "curves.csv", CURVE_COLUMNS, map(curve_row, results))
    manifest = RunManifest(
        name=config.name,
        package_version=zodmc.__version__,
        numpy_version=np.__version__,
        scipy_version=scipy.__version__,
        seed=seed,
        workers=workers,
        config=config.model_dump(mode="json"),
        ground_truth_keys=keys,
        cells=list(results),
        started_at=started_at,
        finished_at=datetime.now(UTC),
    )
    write_json(out_dir / "manifest.json", manifest)

    failed = sum(r.status != "ok" for r in results)
    logger.info(f"실험 완료: {config.name} (셀 {len(results)}개, 실패 {failed}개) → {out_dir}")
    return manifest
