"""
실험 설정 패키지

YAML 실험 설정 스키마와 로더
"""

from .experiment_loader import ExperimentConfigurationError, ExperimentLoader, load_experiment_config
from .experiment_schema import (
    ArchitectureConfig,
    CohortConfig,
    DatasetConfig,
    ExperimentConfig,
    ExplainConfig,
    TrainConfig,
)

__all__ = [
    "ExperimentConfigurationError",
    "ExperimentLoader",
    "load_experiment_config",
    "ArchitectureConfig",
    "CohortConfig",
    "DatasetConfig",
    "ExperimentConfig",
    "ExplainConfig",
    "TrainConfig",
]
