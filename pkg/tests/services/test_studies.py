import csv
import math

import numpy as np
import pytest

from zodmc.core.errors import UnsupportedTargetError
from zodmc.schemas.experiment import AcceptanceStudyConfig, ScoreErrorStudyConfig
from zodmc.services.rgo import MinTracker
from zodmc.services.studies import (
    measure_acceptance,
    run_acceptance_study,
    run_score_error_study,
)
from zodmc.services.target import (
    QueryLedger,
    apply_annulus_penalty,
    make_quadratic,
    make_standard_gaussian,
)


SCHEDULE = {"kind": "constant", "T": 2.0, "N": 3, "delta": 0.05}


def read_rows(path) -> list[dict]:
    with open(path, encoding="utf-8", newline="") as f:
        return list(csv.DictReader(f))


class TestScoreErrorStudy:
    def test_writes_error_per_time(self, tmp_path):
        config = ScoreErrorStudyConfig(
            name="score-tiny",
            target={"kind": "gaussian", "dim": 1},
            schedule=SCHEDULE,
            policy={"kind": "fixed", "n_fixed": 20},
            n_eval_points=100,
            seed=5,
        )

        path = run_score_error_study(config, output_dir=tmp_path)

        assert path == tmp_path / "score-tiny" / "score_error.csv"
        rows = read_rows(path)
        times = [float(r["t"]) for r in rows]
        np.testing.assert_allclose(times, [2.0, 1.35, 0.7, 0.05])
        for row in rows:
            mean, bound = float(row["mean"]), float(row["bound"])
            assert 0 < mean < 2 * bound

    def test_without_delta(self, tmp_path):
        config = ScoreErrorStudyConfig(
            name="score-tiny",
            target={"kind": "gaussian", "dim": 1},
            schedule=SCHEDULE,
            policy={"kind": "fixed", "n_fixed": 5},
            n_eval_points=5,
            include_delta=False,
        )

        rows = read_rows(run_score_error_study(config, output_dir=tmp_path))

        assert len(rows) == 3

    def test_proposals_policy_has_no_bound(self, tmp_path):
        config = ScoreErrorStudyConfig(
            name="score-tiny",
            target={"kind": "gaussian", "dim": 1},
            schedule=SCHEDULE,
            policy={"kind": "proposals"},
            oracle_budget=50,
            n_eval_points=5,
        )

        rows = read_rows(run_score_error_study(config, output_dir=tmp_path))

        assert all(r["bound"] == "" for r in rows)

    def test_worker_count_does_not_change_output(self, tmp_path):
        config = ScoreErrorStudyConfig(
            name="score-tiny",
            target={"kind": "gaussian", "dim": 2},
            schedule=SCHEDULE,
            policy={"kind": "fixed", "n_fixed": 10},
            n_eval_points=20,
            seed=3,
        )

        serial = run_score_error_study(config, output_dir=tmp_path / "serial", workers=1)
        threaded = run_score_error_study(config, output_dir=tmp_path / "threaded", workers=3)

        assert serial.read_text(encoding="utf-8") == threaded.read_text(encoding="utf-8")

    def test_requires_analytic_score(self, tmp_path):
        config = ScoreErrorStudyConfig(name="mb", target={"kind": "mueller-brown"})

        with pytest.raises(UnsupportedTargetError):
            run_score_error_study(config, output_dir=tmp_path)


class TestMeasureAcceptance:
    def test_matches_closed_form(self, rng):
        target = make_quadratic(2)
        tracker = MinTracker(np.zeros(2), 0.0)
        states = np.zeros((2, 2))

        mean, std, predicted = measure_acceptance(
            target, tracker, 0.5, states, 20_000, QueryLedger(), rng
        )

        assert predicted == pytest.approx(10_000 * math.exp(-1.0))
        assert mean == pytest.approx(predicted, rel=0.05)
        assert std < 0.05 * mean

    def test_no_prediction_without_smoothness(self, rng):
        target = apply_annulus_penalty(make_standard_gaussian(2), 3.0, 4.0, 1.0)
        tracker = MinTracker(np.zeros(2), float(target.potential(np.zeros((1, 2)))[0]))
        ledger = QueryLedger()

        _, _, predicted = measure_acceptance(
            target, tracker, 1.0, np.zeros((1, 2)), 100, ledger, rng
        )

        assert predicted is None
        assert ledger.by_phase["score-estimation"] == 100


class TestAcceptanceStudy:
    def test_writes_row_per_state(self, tmp_path):
        config = AcceptanceStudyConfig(
            name="acceptance-tiny",
            target={"kind": "gaussian", "dim": 2},
            algorithm={"schedule": SCHEDULE, "policy": {"kind": "proposals"}},
            oracle_budget=50,
            trajectories=5,
            acceptance_proposals=200,
            seed=1,
        )

        path = run_acceptance_study(config, output_dir=tmp_path)

        rows = read_rows(path)
        assert [float(r["t"]) for r in rows] == pytest.approx([2.0, 1.35, 0.7, 0.05])
        assert all(r["trajectories"] == "5" for r in rows)
        assert all(float(r["mean_accepted_per_1e4"]) >= 0 for r in rows)
        assert all(float(r["predicted"]) > 0 for r in rows)

    def test_worker_count_does_not_change_output(self, tmp_path):
        config = AcceptanceStudyConfig(
            name="acceptance-tiny",
            target={"kind": "gaussian", "dim": 2},
            algorithm={"schedule": SCHEDULE, "policy": {"kind": "fixed", "n_fixed": 3}},
            trajectories=6,
            acceptance_proposals=100,
            seed=2,
        )

        serial = run_acceptance_study(config, output_dir=tmp_path / "serial", workers=1)
        threaded = run_acceptance_study(config, output_dir=tmp_path / "threaded", workers=3)

        assert serial.read_text(encoding="utf-8") == threaded.read_text(encoding="utf-8")
