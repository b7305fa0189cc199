"""
실험 단계 에러 처리 모듈

run-validation 같은 다단계 파이프라인에서 발생한 에러를 분류하고,
단계명과 함께 기록한 뒤 ExperimentStageError로 변환합니다.
이미 생성된 산출물은 삭제하지 않고, 실패 정보는 errors.json 으로 남깁니다.
"""

from __future__ import annotations

import json
import logging
import traceback
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional

from .custom_exceptions import (
    CalibrationError,
    ExperimentStageError,
    ExplainerError,
    RepositoryError,
    ShapeError,
    TrainingDivergenceError,
    ValidationError,
)

# 로거 설정
logger = logging.getLogger(__name__)


class ErrorType(Enum):
    """에러 타입 열거형"""
    VALIDATION_ERROR = "VALIDATION_ERROR"
    SHAPE_ERROR = "SHAPE_ERROR"
    TRAINING_DIVERGENCE = "TRAINING_DIVERGENCE"
    CALIBRATION_ERROR = "CALIBRATION_ERROR"
    IO_ERROR = "IO_ERROR"
    CALCULATION_ERROR = "CALCULATION_ERROR"
    MEMORY_ERROR = "MEMORY_ERROR"
    UNKNOWN_ERROR = "UNKNOWN_ERROR"


class ErrorSeverity(Enum):
    """에러 심각도 열거형"""
    LOW = "low"        # 경고 수준, 처리 계속 가능
    MEDIUM = "medium"  # 현재 단계 중단
    HIGH = "high"      # 파이프라인 중단
    CRITICAL = "critical"


@dataclass
class ErrorContext:
    """에러 컨텍스트 정보"""
    stage: str
    error_type: ErrorType
    severity: ErrorSeverity
    message: str
    details: Dict[str, Any] = field(default_factory=dict)
    timestamp: str = field(default_factory=lambda: datetime.now(timezone.utc).isoformat())
    stack_trace: Optional[str] = None

    def to_dict(self) -> Dict[str, Any]:
        """JSON 직렬화용 딕셔너리"""
        data = asdict(self)
        data["error_type"] = self.error_type.value
        data["severity"] = self.severity.value
        return data


class StageErrorHandler:
    """
    파이프라인 단계 에러 처리 클래스

    Usage:
        handler = StageErrorHandler(artifact_dir)
        with handler.stage("train"):
            ...
    """

    def __init__(self, artifact_dir: Optional[Path] = None):
        """
        에러 핸들러 초기화

        Args:
            artifact_dir: errors.json 을 기록할 디렉토리 (None이면 기록하지 않음)
        """
        self.artifact_dir = Path(artifact_dir) if artifact_dir is not None else None
        self.error_history: List[ErrorContext] = []
        logger.debug("StageErrorHandler 초기화 완료: artifact_dir=%s", self.artifact_dir)

    def classify_error(self, error: BaseException) -> tuple[ErrorType, ErrorSeverity]:
        """에러 분류"""
        if isinstance(error, TrainingDivergenceError):
            return ErrorType.TRAINING_DIVERGENCE, ErrorSeverity.HIGH
        if isinstance(error, CalibrationError):
            return ErrorType.CALIBRATION_ERROR, ErrorSeverity.LOW
        if isinstance(error, ShapeError):
            return ErrorType.SHAPE_ERROR, ErrorSeverity.HIGH
        if isinstance(error, ValidationError):
            return ErrorType.VALIDATION_ERROR, ErrorSeverity.MEDIUM
        if isinstance(error, (RepositoryError, OSError)):
            return ErrorType.IO_ERROR, ErrorSeverity.HIGH
        if isinstance(error, MemoryError):
            return ErrorType.MEMORY_ERROR, ErrorSeverity.CRITICAL
        if isinstance(error, ArithmeticError):
            return ErrorType.CALCULATION_ERROR, ErrorSeverity.MEDIUM
        return ErrorType.UNKNOWN_ERROR, ErrorSeverity.HIGH

    def handle_error(self, error: BaseException, stage: str, context: Optional[Dict[str, Any]] = None) -> ErrorContext:
        """
        에러를 분류하고 히스토리/파일에 기록

        Args:
            error: 발생한 예외
            stage: 실패한 단계명
            context: 추가 컨텍스트 정보

        Returns:
            ErrorContext: 기록된 에러 컨텍스트
        """
        error_type, severity = self.classify_error(error)
        details = dict(context or {})
        if isinstance(error, ExplainerError):
            details.update(error.to_dict())

        error_context = ErrorContext(
            stage=stage,
            error_type=error_type,
            severity=severity,
            message=str(error),
            details=details,
            stack_trace="".join(traceback.format_exception(type(error), error, error.__traceback__)),
        )
        self.error_history.append(error_context)

        if severity in (ErrorSeverity.HIGH, ErrorSeverity.CRITICAL):
            logger.error("단계 '%s' 실패: %s (%s)", stage, error_context.message, error_type.value)
        else:
            logger.warning("단계 '%s' 경고: %s (%s)", stage, error_context.message, error_type.value)

        self._write_history()
        return error_context

    def _write_history(self) -> None:
        """errors.json 기록 (실패해도 원래 에러를 가리지 않음)"""
        if self.artifact_dir is None:
            return
        try:
            self.artifact_dir.mkdir(parents=True, exist_ok=True)
            path = self.artifact_dir / "errors.json"
            payload = [ctx.to_dict() for ctx in self.error_history]
            path.write_text(json.dumps(payload, ensure_ascii=False, indent=2, default=str), encoding="utf-8")
        except OSError as write_error:
            logger.error("errors.json 기록 실패: %s", write_error)

    @contextmanager
    def stage(self, name: str, **context: Any) -> Iterator[None]:
        """
        단계 실행 컨텍스트

        내부에서 발생한 예외를 기록한 뒤 ExperimentStageError로 변환해 다시 발생시킵니다.
        """
        logger.info("단계 시작: %s", name)
        try:
            yield
        except ExperimentStageError:
            raise
        except Exception as error:
            self.handle_error(error, name, context)
            raise ExperimentStageError(
                f"단계 '{name}' 실패: {error}",
                stage=name,
                details={"cause": type(error).__name__},
                artifact_dir=str(self.artifact_dir) if self.artifact_dir else None,
            ) from error
        logger.info("단계 완료: %s", name)

    def get_error_summary(self) -> Dict[str, Any]:
        """에러 요약 정보 반환"""
        by_stage: Dict[str, int] = {}
        for ctx in self.error_history:
            by_stage[ctx.stage] = by_stage.get(ctx.stage, 0) + 1
        return {"total_errors": len(self.error_history), "by_stage": by_stage}
