"""실행 환경 설정 / 실험 설정 로더 / 스키마 검증"""

import logging

import numpy as np
import pytest
from pydantic import ValidationError as PydanticValidationError

from config import Settings, reload_settings
from config.logging_config import (
    format_data_for_log,
    get_numeric_log_level,
    setup_custom_logging_levels,
    summarize_array,
)
from concept_xai.config import (
    ArchitectureConfig,
    DatasetConfig,
    ExperimentConfig,
    ExperimentConfigurationError,
    ExperimentLoader,
    load_experiment_config,
)
from tests.conftest import PROJECT_ROOT


class TestSettings:
    def test_defaults(self, monkeypatch):
        monkeypatch.delenv("LOG_LEVEL", raising=False)
        monkeypatch.delenv("MAX_WORKERS", raising=False)
        settings = Settings(_env_file=None)
        assert settings.app_environment == "testing"
        assert settings.log_level == "INFO"
        assert settings.get_compute_config_dict() == {"max_workers": 1, "ig_batch_size": 64, "train_log_every": 1}

    def test_environment_overrides(self, monkeypatch):
        monkeypatch.setenv("MAX_WORKERS", "4")
        monkeypatch.setenv("LOG_LEVEL", "debug2")
        settings = Settings(_env_file=None)
        assert settings.max_workers == 4
        assert settings.log_level == "DEBUG2"

    @pytest.mark.parametrize(
        "field, value",
        [("log_level", "LOUD"), ("app_environment", "staging"), ("max_workers", 0), ("ig_batch_size", -1)],
    )
    def test_invalid_values(self, field, value):
        with pytest.raises(PydanticValidationError):
            Settings(_env_file=None, **{field: value})

    def test_reload_returns_fresh_instance(self):
        first = reload_settings()
        second = reload_settings()
        assert first is not second


class TestLoggingConfig:
    def test_debug2_level(self):
        setup_custom_logging_levels()
        setup_custom_logging_levels()
        assert get_numeric_log_level("debug2") == 5
        assert get_numeric_log_level("WARNING") == logging.WARNING
        with pytest.raises(ValueError):
            get_numeric_log_level("LOUD")

    def test_arrays_are_summarized(self):
        summary = summarize_array(np.array([[1.0, 3.0]]))
        assert summary == {"shape": [1, 2], "min": 1.0, "max": 3.0, "mean": 2.0}
        text = format_data_for_log({"fmaps": np.zeros((100, 100))})
        assert "shape" in text and len(text) < 200

    def test_truncation(self):
        text = format_data_for_log("x" * 50, max_length=10)
        assert text.startswith("x" * 10)
        assert "50" in text


class TestExperimentLoader:
    def test_default_yaml_matches_schema_defaults(self):
        config = load_experiment_config(str(PROJECT_ROOT / "config" / "experiments" / "default.yaml"))
        assert config == ExperimentConfig()

    def test_empty_file_gives_defaults(self, tmp_path):
        path = tmp_path / "empty.yaml"
        path.write_text("", encoding="utf-8")
        assert ExperimentLoader(str(path)).load() == ExperimentConfig()

    def test_partial_override(self, tmp_path):
        path = tmp_path / "exp.yaml"
        path.write_text("seed: 3\nexplain:\n  ig_steps: 50\n", encoding="utf-8")
        config = ExperimentLoader(str(path)).load()
        assert config.seed == 3
        assert config.explain.ig_steps == 50
        assert config.train.epochs == 30

    def test_env_path(self, tmp_path, monkeypatch):
        path = tmp_path / "env.yaml"
        path.write_text("name: from-env\n", encoding="utf-8")
        monkeypatch.setenv("EXPERIMENT_CONFIG_PATH", str(path))
        assert ExperimentLoader().load().name == "from-env"

    @pytest.mark.parametrize(
        "content",
        ["seed: [1, 2", "- just\n- a list\n", "unknown_key: 1\n", "explain:\n  ig_steps: 1\n"],
    )
    def test_invalid_files(self, tmp_path, content):
        path = tmp_path / "bad.yaml"
        path.write_text(content, encoding="utf-8")
        with pytest.raises(ExperimentConfigurationError):
            ExperimentLoader(str(path)).load()

    def test_missing_file(self, tmp_path):
        with pytest.raises(ExperimentConfigurationError):
            ExperimentLoader(str(tmp_path / "nope.yaml")).load()

    def test_reload_rereads_file(self, tmp_path):
        path = tmp_path / "exp.yaml"
        path.write_text("seed: 1\n", encoding="utf-8")
        loader = ExperimentLoader(str(path))
        assert loader.load().seed == 1
        path.write_text("seed: 2\n", encoding="utf-8")
        assert loader.load().seed == 1
        assert loader.reload().seed == 2


class TestSchema:
    @pytest.mark.parametrize(
        "update",
        [
            {"classes": ["cucumber", "giraffe"]},
            {"classes": ["taxi"]},
            {"classes": ["taxi", "taxi"]},
            {"tag_fractions": [0.0, 1.5]},
            {"tag_fractions": [0.5, 0.5]},
            {"tag_fractions": []},
            {"tag_side_range": (0.4, 0.2)},
            {"tag_side_range": (0.0, 0.2)},
        ],
    )
    def test_dataset_rejects(self, update):
        with pytest.raises(PydanticValidationError):
            DatasetConfig(**update)

    def test_pool_positions(self):
        assert ArchitectureConfig(conv_channels=[4, 4, 4], pool_after=[1, 2]).pool_after == [1, 2]
        with pytest.raises(PydanticValidationError):
            ArchitectureConfig(conv_channels=[4, 4], pool_after=[2])

    def test_with_seed_overrides_every_seed(self):
        config = ExperimentConfig().with_seed(9)
        assert (config.seed, config.dataset.seed, config.train.seed) == (9, 9, 9)
        assert ExperimentConfig().seed == 0
