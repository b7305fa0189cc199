"""
Custom exceptions module

이 모듈은 툴킷 전반에서 사용되는 커스텀 예외 클래스를 정의합니다.

모든 예외는 ExplainerError 기본 클래스에서 상속되며,
계층적 구조를 통해 구체적인 오류 유형을 제공합니다.
"""

from .custom_exceptions import (
    CalibrationError,
    CheckpointFormatError,
    ExperimentStageError,
    ExplainerError,
    RepositoryError,
    ServiceError,
    ShapeError,
    TrainingDivergenceError,
    ValidationError,
)
from .error_handler import ErrorContext, ErrorSeverity, ErrorType, StageErrorHandler

__all__ = [
    "ExplainerError",
    "ShapeError",
    "ValidationError",
    "TrainingDivergenceError",
    "CalibrationError",
    "RepositoryError",
    "CheckpointFormatError",
    "ServiceError",
    "ExperimentStageError",
    "ErrorType",
    "ErrorSeverity",
    "ErrorContext",
    "StageErrorHandler",
]
