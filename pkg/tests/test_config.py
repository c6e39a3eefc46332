from pathlib import Path

import pytest
import yaml

from fusecal.config import default, default_mu_grid, validated
from fusecal.config.pipeline import PipelineConfig, load_pipeline_config
from fusecal.core.errors import ConfigError
from fusecal.models.calibrator import CalibrationMethod

BASE_DOCUMENT = {
    "labels": {"query": "query.csv", "database": "database.csv"},
    "scores": [
        {"name": "global", "type": "global", "query": "q.femb", "database": "d.femb"},
        {"name": "local", "type": "local", "matches": "matches.csv"},
    ],
}


def config_with(**changes):
    return validated(PipelineConfig, **{**BASE_DOCUMENT, **changes})


def write_document(directory: Path, document) -> Path:
    path = directory / "pipeline.yaml"
    path.write_text(yaml.safe_dump(document))
    return path


class TestDefaults:
    def test_mu_grid(self):
        grid = default_mu_grid()
        assert len(grid) == 19
        assert grid[0] == 0.05 and grid[-1] == 0.95
        assert 0.5 in grid and 0.4 in grid

    def test_packaged_values(self):
        assert default("similarity", "default_mu") == 0.5
        assert default("split", "ratio") == 0.5
        assert default("calibration", "tail_slope") == 1e-6


class TestPipelineConfig:
    def test_defaults(self):
        config = config_with()
        assert config.calibration.method is CalibrationMethod.ISOTONIC_PCHIP
        assert (config.mu.policy, config.mu.value) == ("fixed", 0.5)
        assert config.split.ratio == 0.5
        assert config.split_seed == 0
        assert config.cheap_score is None
        assert [s.name for s in config.local_sources] == ["local"]

    @pytest.mark.parametrize("alias, method", [("isotonic", "isotonic_pchip"), ("logistic", "platt"), ("platt", "platt")])
    def test_method_aliases(self, alias, method):
        assert config_with(calibration={"method": alias}).calibration.method.value == method

    @pytest.mark.parametrize(
        "changes",
        [
            {"calibration": {"method": "spline"}},
            {"scores": [{"name": "fused", "type": "global", "query": "q", "database": "d"}]},
            {"scores": [{"name": "local", "type": "local"}]},
            {"scores": []},
            {"fusion": {"global": 1.0}},
            {"mu": {"policy": "tuned"}, "zero_shot": {"calibrators": "cal"}},
            {"mu": {"value": 1.5}},
            {"mu": {"policy": "tuned", "grid": [0.2, 1.2]}},
            {"split": {"ratio": 1.0}},
            {"shortlist": {"cheap": "sift", "budgets": [1]}},
            {"shortlist": {"budgets": [0]}},
            {"unexpected": True},
        ],
    )
    def test_rejected(self, changes):
        with pytest.raises(ConfigError):
            config_with(**changes)

    def test_duplicate_score_names(self):
        scores = [BASE_DOCUMENT["scores"][1], BASE_DOCUMENT["scores"][1]]
        with pytest.raises(ConfigError):
            config_with(scores=scores)

    def test_cheap_score_defaults_to_first_global(self):
        assert config_with(shortlist={"budgets": [5]}).cheap_score == "global"

    def test_split_seed_override(self):
        assert config_with(seed=4).split_seed == 4
        assert config_with(seed=4, split={"seed": 9}).split_seed == 9


class TestOverrides:
    def test_mu_fixes_policy(self):
        config = config_with(mu={"policy": "tuned"}).with_overrides(mu=0.3)
        assert (config.mu.policy, config.mu.value) == ("fixed", 0.3)

    def test_seed_replaces_split_seed(self):
        config = config_with(seed=1, split={"seed": 9}).with_overrides(seed=2)
        assert config.split_seed == 2

    def test_budget_and_calibration(self):
        config = config_with(shortlist={"budgets": [1, 5]}).with_overrides(budget=7, calibration="platt")
        assert config.shortlist.budgets == [7]
        assert config.calibration.method is CalibrationMethod.PLATT

    def test_zero_shot_turns_tuning_off(self, tmp_path):
        config = config_with(mu={"policy": "tuned"}).with_overrides(zero_shot=tmp_path)
        assert config.mu.policy == "fixed"
        assert Path(config.zero_shot.calibrators) == tmp_path
        assert config.echo()["zero_shot"]["calibrators"] == tmp_path.name

    def test_invalid_override(self):
        with pytest.raises(ConfigError):
            config_with().with_overrides(mu=-0.1)


class TestLoadPipelineConfig:
    def test_relative_paths_resolve_against_document(self, tmp_path):
        for name in ("query.csv", "database.csv", "q.femb", "d.femb", "matches.csv"):
            (tmp_path / name).write_text("")
        config = load_pipeline_config(write_document(tmp_path, BASE_DOCUMENT))
        assert config.resolve("q.femb") == tmp_path.resolve() / "q.femb"
        assert config.resolve(tmp_path / "x") == tmp_path / "x"

    def test_missing_referenced_files(self, tmp_path):
        with pytest.raises(ConfigError) as excinfo:
            load_pipeline_config(write_document(tmp_path, BASE_DOCUMENT))
        assert "matches.csv" in str(excinfo.value)
        assert load_pipeline_config(write_document(tmp_path, BASE_DOCUMENT), check_files=False).scores

    def test_not_a_mapping(self, tmp_path):
        with pytest.raises(ConfigError):
            load_pipeline_config(write_document(tmp_path, ["a", "b"]))

    def test_base_dir_survives_overrides(self, tmp_path):
        config = load_pipeline_config(write_document(tmp_path, BASE_DOCUMENT), check_files=False)
        assert config.with_overrides(seed=3).base_dir == tmp_path.resolve()
