from pathlib import Path

import numpy as np
import pytest
from pydantic import ValidationError

from zodmc.core.errors import ConfigurationError
from zodmc.schemas.experiment import (
    AcceptanceStudyConfig,
    DimensionSweep,
    ExperimentConfig,
    RadiusSweep,
    ScoreErrorStudyConfig,
    load_config,
)
from zodmc.schemas.sampler import PolicyConfig, UlaAlgorithmConfig, ZodmcAlgorithmConfig
from zodmc.schemas.target import (
    AnnulusTargetConfig,
    GaussianTargetConfig,
    GmmTargetConfig,
    MuellerBrownTargetConfig,
)


CONFIG_DIR = Path(__file__).resolve().parents[2] / "configs"

EXPERIMENT_PRESETS = [
    "d1-gmm-budget",
    "d1-gmm-radius",
    "d1-gmm-annulus",
    "mueller-brown",
    "randomized-gmm-dimension",
]


def minimal_experiment(**overrides) -> dict:
    data = {
        "name": "tiny",
        "target": {"kind": "gaussian", "dim": 2},
        "algorithms": [{"kind": "zodmc"}, {"kind": "ula"}],
        "oracle_budget": 100,
    }
    return data | overrides


class TestPresets:
    @pytest.mark.parametrize("name", EXPERIMENT_PRESETS)
    def test_experiment_presets_load(self, name):
        config = load_config(CONFIG_DIR / f"{name}.yaml", ExperimentConfig)

        assert config.name == name
        assert config.budgets

    def test_budget_preset(self):
        config = load_config(CONFIG_DIR / "d1-gmm-budget.yaml", ExperimentConfig)

        assert config.budgets == list(range(200, 9201, 1000))
        assert isinstance(config.algorithms[0], ZodmcAlgorithmConfig)
        assert isinstance(config.algorithms[1], UlaAlgorithmConfig)

    def test_radius_preset(self):
        config = load_config(CONFIG_DIR / "d1-gmm-radius.yaml", ExperimentConfig)

        assert isinstance(config.sweep, RadiusSweep)
        assert config.algorithms[0].schedule.T == 10.0
        assert config.algorithms[0].schedule.N == 50

    def test_study_presets_load(self):
        score = load_config(CONFIG_DIR / "d4-score-error.yaml", ScoreErrorStudyConfig)
        acceptance = load_config(CONFIG_DIR / "d1-gmm-acceptance.yaml", AcceptanceStudyConfig)

        assert score.policy.kind == "fixed"
        assert score.include_delta
        assert acceptance.acceptance_proposals == 10_000


class TestExperimentConfig:
    def test_discriminated_algorithms(self):
        config = ExperimentConfig.model_validate(minimal_experiment())

        assert [a.kind for a in config.algorithms] == ["zodmc", "ula"]
        assert config.algorithms[0].policy.kind == "proposals"
        assert config.budgets == [100]

    def test_unknown_algorithm(self):
        with pytest.raises(ValidationError):
            ExperimentConfig.model_validate(minimal_experiment(algorithms=[{"kind": "mala"}]))

    def test_extra_field_rejected(self):
        with pytest.raises(ValidationError):
            ExperimentConfig.model_validate(minimal_experiment(typo=1))

    @pytest.mark.parametrize("budget", [0, [100, -1], []])
    def test_bad_budget(self, budget):
        with pytest.raises(ValidationError):
            ExperimentConfig.model_validate(minimal_experiment(oracle_budget=budget))

    def test_policy_bounds(self):
        with pytest.raises(ValidationError):
            PolicyConfig(n_min=10, n_max=5)

    def test_policy_build_carries_budget(self):
        policy = PolicyConfig(kind="proposals").build(2200)

        assert policy.proposals == 2200


class TestTargetConfig:
    def test_gmm_source_required(self):
        with pytest.raises(ValidationError):
            GmmTargetConfig()
        with pytest.raises(ValidationError):
            GmmTargetConfig(preset="d1-gmm", weights=[1.0])

    def test_explicit_gmm(self):
        config = GmmTargetConfig(weights=[1.0], means=[[1.0, 2.0]], covariances=[[[1, 0], [0, 1]]])

        target = config.build()

        assert target.dim == 2
        np.testing.assert_allclose(target.gmm.means, [[1.0, 2.0]])

    def test_annulus_radii(self):
        with pytest.raises(ValidationError):
            AnnulusTargetConfig(inner=11.0, outer=5.0)

    def test_annulus_build(self):
        target = AnnulusTargetConfig().build()

        assert target.metadata["annulus"]["inner"] == 5.0
        assert target.parent is not None

    def test_mueller_brown_build(self):
        target = MuellerBrownTargetConfig(beta=0.1).build()

        assert target.dim == 2


class TestSweeps:
    def test_radius_on_gmm(self):
        base = GmmTargetConfig(preset="d1-gmm")

        target = RadiusSweep(values=[26]).apply(base, 26.0).build()

        assert np.linalg.norm(target.gmm.means[1]) == pytest.approx(26.0)
        assert target.name == "d1-gmm-r26"

    def test_radius_on_annulus(self):
        swept = RadiusSweep(values=[6]).apply(AnnulusTargetConfig(), 6.0)

        assert swept.base.radius == 6.0

    def test_radius_rejects_gaussian(self):
        with pytest.raises(ConfigurationError):
            RadiusSweep(values=[1]).apply(GaussianTargetConfig(), 1.0)

    def test_dimension(self):
        swept = DimensionSweep(values=[4]).apply(GaussianTargetConfig(), 4)

        assert swept.build().dim == 4

    def test_dimension_rejects_mueller_brown(self):
        with pytest.raises(ConfigurationError):
            DimensionSweep(values=[4]).apply(MuellerBrownTargetConfig(), 4)


class TestLoadConfig:
    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigurationError):
            load_config(tmp_path / "none.yaml", ExperimentConfig)

    def test_not_a_mapping(self, tmp_path):
        path = tmp_path / "list.yaml"
        path.write_text("- 1\n- 2\n", encoding="utf-8")

        with pytest.raises(ConfigurationError, match="매핑"):
            load_config(path, ExperimentConfig)

    def test_validation_error_mapped(self, tmp_path):
        path = tmp_path / "bad.yaml"
        path.write_text("name: bad\noracle_budget: 0\n", encoding="utf-8")

        with pytest.raises(ConfigurationError, match="검증 실패"):
            load_config(path, ExperimentConfig)
