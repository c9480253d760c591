import csv
import json

from zodmc.crud.ground_truth import read_ground_truth
from zodmc.crud.run_record import read_run_records
from zodmc.schemas.experiment import ExperimentConfig
from zodmc.schemas.target import GaussianTargetConfig
from zodmc.services.baselines import matched_ula_steps
from zodmc.services.bench import (
    CURVE_COLUMNS,
    cell_query_cap,
    diffusion_steps,
    ground_truth_key,
    run_experiment,
)
from zodmc.util.io import read_samples_csv


def tiny_config(**overrides) -> ExperimentConfig:
    data = {
        "name": "tiny",
        "target": {"kind": "gaussian", "dim": 2},
        "algorithms": [
            {
                "kind": "zodmc",
                "schedule": {"kind": "constant", "T": 2.0, "N": 5, "delta": 0.05},
                "policy": {"kind": "proposals"},
            },
            {"kind": "ula", "step": 0.05},
        ],
        "oracle_budget": 50,
        "n_output_samples": 20,
        "ground_truth_samples": 50,
        "metrics": ["mmd", "w2", "moments"],
        "seed": 3,
    }
    return ExperimentConfig.model_validate(data | overrides)


def read_curves(path) -> list[dict]:
    with open(path, encoding="utf-8", newline="") as f:
        return list(csv.DictReader(f))


class TestBudgetHelpers:
    def test_ground_truth_key_deterministic(self):
        target = GaussianTargetConfig(dim=2)

        key = ground_truth_key(target, 0, 100)

        assert key == ground_truth_key(GaussianTargetConfig(dim=2), 0, 100)
        assert len(key) == 64
        assert key != ground_truth_key(target, 1, 100)
        assert key != ground_truth_key(GaussianTargetConfig(dim=3), 0, 100)

    def test_cell_query_cap(self):
        config = tiny_config()

        assert diffusion_steps(config) == 5
        assert cell_query_cap(config, 50) == 20 * 5 * 50

    def test_ula_only_uses_schedule_steps(self):
        config = tiny_config(algorithms=[{"kind": "ula", "schedule_steps": 7}])

        assert diffusion_steps(config) == 7


class TestRunExperiment:
    async def test_outputs(self, tmp_path, session_scope, db_session):
        manifest = await run_experiment(
            tiny_config(), output_dir=tmp_path, session_scope=session_scope
        )

        out_dir = tmp_path / "tiny"
        rows = read_curves(out_dir / "curves.csv")
        assert list(rows[0].keys()) == list(CURVE_COLUMNS)
        assert [(r["algorithm"], r["budget"]) for r in rows] == [("zodmc", "50"), ("ula", "50")]
        assert all(r["status"] == "ok" for r in rows)

        assert not manifest.all_failed
        assert manifest.seed == 3
        assert len(manifest.ground_truth_keys) == 1
        saved = json.loads((out_dir / "manifest.json").read_text(encoding="utf-8"))
        assert saved["name"] == "tiny"
        for cell in manifest.cells:
            assert read_samples_csv(out_dir / "samples" / f"{cell.cell_id}.csv").shape == (20, 2)
            assert (out_dir / "metrics" / f"{cell.cell_id}.json").exists()
            assert cell.ledger_total > 0

        records, total = read_run_records(db_session, experiment="tiny")
        assert total == 2
        assert {r.cell_id for r in records} == {"zodmc-b50", "ula-b50"}

    async def test_ula_ledger_matches_budget(self, tmp_path, session_scope):
        manifest = await run_experiment(
            tiny_config(), output_dir=tmp_path, session_scope=session_scope
        )

        ula = next(c for c in manifest.cells if c.algorithm == "ula")
        assert ula.ledger_total == matched_ula_steps(5 * 50, 2) * 20 * 2 * 2
        assert ula.ledger_total <= cell_query_cap(tiny_config(), 50)
        assert ula.budget_slack == 0

    async def test_rerun_is_reproducible(self, tmp_path, session_scope, db_session):
        config = tiny_config()
        first = await run_experiment(config, output_dir=tmp_path, session_scope=session_scope)
        first_curves = (tmp_path / "tiny" / "curves.csv").read_text(encoding="utf-8")

        key = first.ground_truth_keys[0]
        assert read_ground_truth(db_session, key) is not None

        second = await run_experiment(
            config, workers=2, output_dir=tmp_path, session_scope=session_scope
        )

        assert second.ground_truth_keys == [key]
        assert (tmp_path / "tiny" / "curves.csv").read_text(encoding="utf-8") == first_curves

    async def test_sample_files_are_byte_identical(self, tmp_path, session_scope):
        config = tiny_config()
        for name in ("first", "second"):
            await run_experiment(
                config, workers=2, output_dir=tmp_path / name, session_scope=session_scope
            )

        first = sorted((tmp_path / "first" / "tiny" / "samples").iterdir())
        second = tmp_path / "second" / "tiny" / "samples"
        assert [p.name for p in first] == ["ula-b50.csv", "zodmc-b50.csv"]
        for path in first:
            assert path.read_bytes() == (second / path.name).read_bytes()

    async def test_seed_override(self, tmp_path, session_scope):
        manifest = await run_experiment(
            tiny_config(), seed=11, output_dir=tmp_path, session_scope=session_scope
        )

        assert manifest.seed == 11

    async def test_failed_cell_is_recorded(self, tmp_path, session_scope, db_session):
        config = tiny_config(
            algorithms=[{"kind": "zodmc"}, {"kind": "ula", "step": 5.0}],
        )

        manifest = await run_experiment(config, output_dir=tmp_path, session_scope=session_scope)

        statuses = {c.algorithm: c.status for c in manifest.cells}
        assert statuses == {"zodmc": "ok", "ula": "failed"}
        assert not manifest.all_failed
        ula = next(c for c in manifest.cells if c.algorithm == "ula")
        assert ula.diverged == 20
        assert ula.metrics is None

        records, _ = read_run_records(db_session, experiment="tiny")
        failed = next(r for r in records if r.algorithm == "ula")
        assert failed.status == "failed"
        assert failed.error

    async def test_all_failed(self, tmp_path, session_scope):
        config = tiny_config(algorithms=[{"kind": "ula", "step": 5.0}])

        manifest = await run_experiment(config, output_dir=tmp_path, session_scope=session_scope)

        assert manifest.all_failed
        rows = read_curves(tmp_path / "tiny" / "curves.csv")
        assert rows[0]["status"] == "failed"
        assert rows[0]["mmd"] == ""

    async def test_dimension_sweep(self, tmp_path, session_scope):
        config = tiny_config(
            sweep={"kind": "dimension", "values": [2, 3]},
            algorithms=[{"kind": "ula", "step": 0.05}],
        )

        manifest = await run_experiment(config, output_dir=tmp_path, session_scope=session_scope)

        assert [c.cell_id for c in manifest.cells] == ["ula-b50-d2", "ula-b50-d3"]
        assert len(manifest.ground_truth_keys) == 2
