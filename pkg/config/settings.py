"""
Configuration Management for Concept Explainability Toolkit

이 모듈은 애플리케이션 프로세스 수준의 설정을 타입 안전하게 관리합니다.
환경 변수, .env 파일, 기본값, 검증 등을 Pydantic BaseSettings를 통해 처리합니다.

실험 자체의 파라미터(데이터셋 크기, 학습 하이퍼파라미터, IG 스텝 등)는
YAML 실험 설정 파일(config/experiments/*.yaml)에서 관리하며,
여기서는 로깅, 출력 경로, 병렬 처리 등 실행 환경 설정만 다룹니다.

Usage:
    from config import get_settings

    settings = get_settings()

    # 출력 디렉토리
    out_dir = settings.get_output_dir()

    # 로깅 설정
    log_level = settings.log_level
"""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Any, Dict, Optional

from pydantic import Field, field_validator, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

# 로깅 설정
logger = logging.getLogger(__name__)

# 프로젝트 루트 디렉토리
PROJECT_ROOT = Path(__file__).parent.parent

DEFAULT_LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


class Settings(BaseSettings):
    """
    메인 설정 클래스

    모든 실행 환경 설정을 통합 관리합니다.
    환경 변수와 .env 파일에서 설정을 로드하며 (필드명 = 환경변수명, 대소문자 무시),
    타입 안전성과 검증을 제공합니다.
    """

    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        extra="ignore",  # 정의되지 않은 환경 변수 무시
        case_sensitive=False,  # 환경 변수 대소문자 구분 안함
    )

    # 애플리케이션 기본 설정
    app_name: str = Field(default="Concept XAI Toolkit", description="애플리케이션 이름")
    app_version: str = Field(default="1.0.0", description="애플리케이션 버전")
    app_environment: str = Field(default="development", description="실행 환경")

    # 출력 및 실험 설정 파일 경로
    output_dir: str = Field(default="outputs", description="산출물 기본 디렉토리")
    experiment_config_path: str = Field(
        default=str(PROJECT_ROOT / "config" / "experiments" / "default.yaml"), description="기본 실험 설정 YAML 경로"
    )

    # 연산 설정
    max_workers: int = Field(default=1, description="이미지 단위 설명 작업 동시 실행 수")
    ig_batch_size: int = Field(default=64, description="IG 보간점을 한 번에 평가할 배치 크기")
    train_log_every: int = Field(default=1, description="학습 로그 출력 주기(epoch)")

    # 로깅 설정
    log_level: str = Field(default="INFO", description="로깅 레벨")
    log_file_enabled: bool = Field(default=False, description="파일 로깅 활성화")
    log_file_path: str = Field(default="logs/app.log", description="로그 파일 경로")

    # 검증 메서드들
    @field_validator("log_level")
    @classmethod
    def validate_log_level(cls, v: str) -> str:
        """로깅 레벨 검증 (커스텀 DEBUG2 레벨 포함)"""
        valid_levels = ["DEBUG2", "DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"]
        if v.upper() not in valid_levels:
            raise ValueError(f"log_level must be one of {valid_levels}")
        return v.upper()

    @field_validator("app_environment")
    @classmethod
    def validate_environment(cls, v: str) -> str:
        """환경 검증"""
        valid_envs = ["development", "production", "testing"]
        if v.lower() not in valid_envs:
            raise ValueError(f"environment must be one of {valid_envs}")
        return v.lower()

    @field_validator("max_workers", "ig_batch_size", "train_log_every")
    @classmethod
    def validate_positive_integer(cls, v: int) -> int:
        """양수 검증"""
        if v <= 0:
            raise ValueError("Value must be a positive integer")
        return v

    @model_validator(mode="after")
    def validate_production_settings(self) -> "Settings":
        """프로덕션 환경 특별 검증"""
        if self.app_environment == "production" and self.log_level in ("DEBUG2", "DEBUG"):
            import warnings

            warnings.warn("Verbose log level is enabled in production environment")
        return self

    def __init__(self, **kwargs: Any) -> None:
        """초기화 및 검증"""
        super().__init__(**kwargs)
        logger.info("설정 로드 완료: 환경=%s, workers=%d", self.app_environment, self.max_workers)

    def get_output_dir(self) -> Path:
        """출력 디렉토리 Path 반환 (상대 경로는 현재 작업 디렉토리 기준)"""
        return Path(self.output_dir)

    def get_compute_config_dict(self) -> Dict[str, Any]:
        """연산 관련 설정을 딕셔너리로 반환"""
        return {
            "max_workers": self.max_workers,
            "ig_batch_size": self.ig_batch_size,
            "train_log_every": self.train_log_every,
        }

    def setup_logging(self) -> None:
        """로깅 설정 적용 (커스텀 DEBUG2 레벨 지원)"""
        from config.logging_config import get_numeric_log_level, setup_custom_logging_levels

        setup_custom_logging_levels()

        log_level = get_numeric_log_level(self.log_level)
        logging.basicConfig(level=log_level, format=DEFAULT_LOG_FORMAT)
        logging.getLogger().setLevel(log_level)

        # 파일 로깅 설정 (필요시)
        if self.log_file_enabled:
            from logging.handlers import RotatingFileHandler

            log_dir = Path(self.log_file_path).parent
            log_dir.mkdir(parents=True, exist_ok=True)

            file_handler = RotatingFileHandler(
                filename=self.log_file_path,
                maxBytes=10485760,  # 10MB
                backupCount=5,
                encoding="utf-8",
            )
            file_handler.setFormatter(logging.Formatter(DEFAULT_LOG_FORMAT))
            logging.getLogger().addHandler(file_handler)

        logger.info("로깅 설정 완료: 레벨=%s, 파일로깅=%s", self.log_level, self.log_file_enabled)


# 전역 설정 인스턴스 (지연 로딩)
_settings: Optional[Settings] = None


def get_settings() -> Settings:
    """
    전역 설정 인스턴스 반환

    처음 호출 시에만 인스턴스를 생성하고 로깅을 설정하며,
    이후에는 캐시된 인스턴스를 반환합니다.

    Returns:
        Settings: 설정 인스턴스
    """
    global _settings

    if _settings is None:
        _settings = Settings()
        _settings.setup_logging()
        logger.debug("설정 인스턴스 생성 완료")

    return _settings


def reload_settings() -> Settings:
    """
    설정 인스턴스 재로드

    환경 변수가 변경된 경우 설정을 다시 로드합니다.
    주로 테스트나 개발 중에 사용됩니다.

    Returns:
        Settings: 새로운 설정 인스턴스
    """
    global _settings
    logger.info("설정 인스턴스 재로드 중...")
    _settings = None
    return get_settings()
