"""
Custom Exception Classes

이 모듈은 개념 기반 설명(Concept XAI) 툴킷에서 사용되는
커스텀 예외 클래스들을 정의합니다.

모든 예외는 기본 ExplainerError에서 상속되며, 디버깅을 위한
상세 정보를 포함할 수 있습니다.
"""

from __future__ import annotations

import logging
from typing import Any, Dict, Optional, Sequence, Union

# 로깅 설정
logger = logging.getLogger(__name__)


class ExplainerError(Exception):
    """
    툴킷의 기본 예외 클래스

    모든 커스텀 예외의 부모 클래스로, 메시지와 상세 정보를 포함합니다.
    """

    def __init__(self, message: str, details: Optional[Union[str, Dict[str, Any]]] = None) -> None:
        """
        ExplainerError 초기화

        Args:
            message (str): 사용자에게 표시할 오류 메시지
            details (Optional[Union[str, Dict[str, Any]]]): 디버깅용 추가 정보

        Examples:
            >>> raise ExplainerError("설명 생성 중 오류가 발생했습니다")
            >>> raise ExplainerError("집계 실패", {"layer": "conv6", "images": 0})
        """
        super().__init__(message)
        self.message = message
        self.details = details

        if details:
            logger.debug("%s 발생: %s, 상세: %s", self.__class__.__name__, message, details)
        else:
            logger.debug("%s 발생: %s", self.__class__.__name__, message)

    def __str__(self) -> str:
        """문자열 표현"""
        return self.message

    def __repr__(self) -> str:
        """개발자용 문자열 표현"""
        if self.details:
            return f"{self.__class__.__name__}(message='{self.message}', details={self.details})"
        return f"{self.__class__.__name__}(message='{self.message}')"

    def to_dict(self) -> Dict[str, Any]:
        """딕셔너리 형태로 변환 (JSON 직렬화용)"""
        return {"error_type": self.__class__.__name__, "message": self.message, "details": self.details}

    def get_full_message(self) -> str:
        """details 를 key=value 로 붙인 메시지"""
        if not self.details:
            return self.message
        if isinstance(self.details, dict):
            extra = ", ".join(f"{k}={v}" for k, v in sorted(self.details.items()))
        else:
            extra = str(self.details)
        return f"{self.message} (상세: {extra})"


class ShapeError(ExplainerError):
    """
    텐서 shape 불일치 예외 클래스

    연산자 입력의 차원이 맞지 않을 때 발생하며,
    문제가 된 차원을 함께 보고합니다.
    """

    def __init__(
        self,
        message: str,
        details: Optional[Union[str, Dict[str, Any]]] = None,
        operator: Optional[str] = None,
        expected: Optional[Sequence[int]] = None,
        actual: Optional[Sequence[int]] = None,
    ) -> None:
        """
        ShapeError 초기화

        Args:
            message (str): 오류 메시지
            details: 추가 상세 정보
            operator (Optional[str]): 오류가 발생한 연산자 이름 (conv2d, dense 등)
            expected (Optional[Sequence[int]]): 기대한 shape
            actual (Optional[Sequence[int]]): 실제 shape

        Examples:
            >>> raise ShapeError("채널 수 불일치", operator="conv2d", expected=(3, 3, 2, 4), actual=(5, 5, 3))
        """
        super().__init__(message, details)
        self.operator = operator
        self.expected = tuple(expected) if expected is not None else None
        self.actual = tuple(actual) if actual is not None else None

        logger.warning(
            "ShapeError 발생: %s (operator=%s, expected=%s, actual=%s)", message, operator, self.expected, self.actual
        )

    def to_dict(self) -> Dict[str, Any]:
        """딕셔너리 형태로 변환"""
        data = super().to_dict()
        data.update({"operator": self.operator, "expected": self.expected, "actual": self.actual})
        return data


class ValidationError(ExplainerError):
    """
    입력 검증 관련 오류 예외 클래스

    알 수 없는 레이어, 범위를 벗어난 클래스 인덱스, 빈 예제 집합 등
    인자 유효성 검사 중 발생하는 오류를 처리합니다.
    """

    def __init__(
        self,
        message: str,
        details: Optional[Union[str, Dict[str, Any]]] = None,
        field_name: Optional[str] = None,
        field_value: Optional[Any] = None,
        validation_rule: Optional[str] = None,
    ) -> None:
        """
        ValidationError 초기화

        Args:
            message (str): 오류 메시지
            details: 추가 상세 정보
            field_name (Optional[str]): 검증에 실패한 인자명
            field_value (Optional[Any]): 검증에 실패한 값
            validation_rule (Optional[str]): 위반된 검증 규칙

        Examples:
            >>> raise ValidationError("알 수 없는 레이어", field_name="layer", field_value="conv9",
            ...                       validation_rule="known_layer")
        """
        super().__init__(message, details)
        self.field_name = field_name
        self.field_value = field_value
        self.validation_rule = validation_rule

        log_details = {
            "field": field_name,
            "rule": validation_rule,
            "value": field_value if isinstance(field_value, (str, int, float)) else type(field_value).__name__,
        }
        logger.warning("ValidationError 발생: %s, 상세: %s", message, log_details)

    def to_dict(self) -> Dict[str, Any]:
        """딕셔너리 형태로 변환"""
        data = super().to_dict()
        data.update(
            {
                "field_name": self.field_name,
                "field_value": str(self.field_value) if self.field_value is not None else None,
                "validation_rule": self.validation_rule,
            }
        )
        return data


class TrainingDivergenceError(ExplainerError):
    """
    학습 발산 예외 클래스

    손실이 NaN/Inf가 되었을 때 발생하며 학습률을 낮추라는 힌트를 포함합니다.
    """

    def __init__(
        self,
        message: str,
        details: Optional[Union[str, Dict[str, Any]]] = None,
        epoch: Optional[int] = None,
        learning_rate: Optional[float] = None,
    ) -> None:
        """
        TrainingDivergenceError 초기화

        Args:
            message (str): 오류 메시지
            details: 추가 상세 정보
            epoch (Optional[int]): 발산이 감지된 epoch
            learning_rate (Optional[float]): 사용 중이던 학습률
        """
        super().__init__(message, details)
        self.epoch = epoch
        self.learning_rate = learning_rate
        self.hint = (
            f"learning rate를 낮춰 보세요 (현재 {learning_rate}, 권장 {learning_rate / 10:g})"
            if learning_rate
            else "learning rate를 낮춰 보세요"
        )

        logger.error("TrainingDivergenceError 발생: %s (epoch=%s, lr=%s)", message, epoch, learning_rate)

    def get_full_message(self) -> str:
        """힌트를 포함한 전체 메시지"""
        return f"{super().get_full_message()} - {self.hint}"

    def to_dict(self) -> Dict[str, Any]:
        """딕셔너리 형태로 변환"""
        data = super().to_dict()
        data.update({"epoch": self.epoch, "learning_rate": self.learning_rate, "hint": self.hint})
        return data


class CalibrationError(ExplainerError):
    """
    concept map 정규화 범위 보정 실패 예외 클래스

    upper <= lower 인 경우, 즉 해당 레이어에서 개념이 분리되지 않을 때 발생합니다.
    """

    def __init__(
        self,
        message: str,
        details: Optional[Union[str, Dict[str, Any]]] = None,
        layer: Optional[str] = None,
        lower: Optional[float] = None,
        upper: Optional[float] = None,
    ) -> None:
        super().__init__(message, details)
        self.layer = layer
        self.lower = lower
        self.upper = upper

        logger.warning("CalibrationError 발생: %s (layer=%s, lower=%s, upper=%s)", message, layer, lower, upper)

    def to_dict(self) -> Dict[str, Any]:
        """딕셔너리 형태로 변환"""
        data = super().to_dict()
        data.update({"layer": self.layer, "lower": self.lower, "upper": self.upper})
        return data


class RepositoryError(ExplainerError):
    """
    저장소 레이어 관련 일반 오류 예외 클래스

    체크포인트, CAV, 데이터셋, 리포트 파일의 읽기/쓰기 중 발생하는 오류를 처리합니다.
    """

    def __init__(
        self,
        message: str,
        details: Optional[Union[str, Dict[str, Any]]] = None,
        repository_name: Optional[str] = None,
        operation_type: Optional[str] = None,
        resource: Optional[str] = None,
    ) -> None:
        """
        RepositoryError 초기화

        Args:
            message (str): 오류 메시지
            details: 추가 상세 정보
            repository_name (Optional[str]): 오류가 발생한 저장소명
            operation_type (Optional[str]): 작업 유형 (read, write)
            resource (Optional[str]): 접근하려던 파일 경로

        Examples:
            >>> raise RepositoryError("파일 읽기 실패", repository_name="DatasetStore",
            ...                       operation_type="read", resource="data/manifest.csv")
        """
        super().__init__(message, details)
        self.repository_name = repository_name
        self.operation_type = operation_type
        self.resource = resource

        log_details = {"repository": repository_name, "operation": operation_type, "resource": resource}
        logger.error("%s 발생: %s, 상세: %s", self.__class__.__name__, message, log_details)

    def to_dict(self) -> Dict[str, Any]:
        """딕셔너리 형태로 변환"""
        data = super().to_dict()
        data.update(
            {"repository_name": self.repository_name, "operation_type": self.operation_type, "resource": self.resource}
        )
        return data


class CheckpointFormatError(RepositoryError):
    """
    바이너리 파일 형식 오류 (체크포인트/CAV)

    magic 불일치, 버전 불일치, 잘린 파일 등을 표현합니다.
    """

    def __init__(
        self,
        message: str,
        details: Optional[Union[str, Dict[str, Any]]] = None,
        resource: Optional[str] = None,
        format_version: Optional[int] = None,
    ) -> None:
        super().__init__(message, details, repository_name="BinaryContainer", operation_type="read", resource=resource)
        self.format_version = format_version

    def to_dict(self) -> Dict[str, Any]:
        """딕셔너리 형태로 변환"""
        data = super().to_dict()
        data["format_version"] = self.format_version
        return data


class ServiceError(ExplainerError):
    """
    서비스 레이어 관련 오류 예외 클래스

    학습, 설명 생성, 실험 오케스트레이션 등 서비스 레이어에서 발생하는 오류를 처리합니다.
    """

    def __init__(
        self,
        message: str,
        details: Optional[Union[str, Dict[str, Any]]] = None,
        service_name: Optional[str] = None,
        operation: Optional[str] = None,
    ) -> None:
        """
        ServiceError 초기화

        Args:
            message (str): 오류 메시지
            details: 추가 상세 정보
            service_name (Optional[str]): 오류가 발생한 서비스명
            operation (Optional[str]): 실패한 작업명
        """
        super().__init__(message, details)
        self.service_name = service_name
        self.operation = operation

        logger.error("%s 발생: %s, 상세: %s", self.__class__.__name__, message,
                     {"service": service_name, "operation": operation})

    def to_dict(self) -> Dict[str, Any]:
        """딕셔너리 형태로 변환"""
        data = super().to_dict()
        data.update({"service_name": self.service_name, "operation": self.operation})
        return data


class ExperimentStageError(ServiceError):
    """
    실험 단계 실패 예외 클래스

    run-validation 파이프라인의 특정 단계(dataset, train, evaluate, explain, tcav, report)가
    실패했을 때 단계명과 보존된 산출물 디렉토리를 함께 전달합니다.
    """

    def __init__(
        self,
        message: str,
        stage: str,
        details: Optional[Union[str, Dict[str, Any]]] = None,
        artifact_dir: Optional[str] = None,
    ) -> None:
        super().__init__(message, details, service_name="ExperimentService", operation=stage)
        self.stage = stage
        self.artifact_dir = artifact_dir

    def get_full_message(self) -> str:
        """단계명을 포함한 전체 메시지"""
        return f"[stage={self.stage}] {super().get_full_message()}"

    def to_dict(self) -> Dict[str, Any]:
        """딕셔너리 형태로 변환"""
        data = super().to_dict()
        data.update({"stage": self.stage, "artifact_dir": self.artifact_dir})
        return data
