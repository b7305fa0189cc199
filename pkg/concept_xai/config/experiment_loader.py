"""
실험 설정 로더

YAML 파일에서 실험 설정을 로드하고 ExperimentConfig 스키마로 검증합니다.
코드 수정 없이 외부 YAML 파일만 바꿔 데이터셋 규모, 학습 하이퍼파라미터,
IG step 수 등을 조정할 수 있습니다.
"""

from __future__ import annotations

import logging
import os
from pathlib import Path
from typing import Any, Dict, Optional

import yaml
from pydantic import ValidationError as PydanticValidationError

from .experiment_schema import ExperimentConfig

# 로깅 설정
logger = logging.getLogger(__name__)


class ExperimentConfigurationError(Exception):
    """실험 설정 관련 오류"""


class ExperimentLoader:
    """
    실험 설정 로더 클래스

    경로 우선순위:
    1. 생성자 파라미터
    2. EXPERIMENT_CONFIG_PATH 환경변수
    3. 기본값
    """

    DEFAULT_CONFIG_PATH = str(Path(__file__).resolve().parents[2] / "config" / "experiments" / "default.yaml")

    def __init__(self, config_path: Optional[str] = None):
        self.config_path = self._resolve_config_path(config_path)
        self._config_cache: Optional[ExperimentConfig] = None
        logger.info("ExperimentLoader 초기화: 설정 파일 경로=%s", self.config_path)

    def _resolve_config_path(self, config_path: Optional[str]) -> str:
        if config_path:
            return str(config_path)

        env_path = os.getenv("EXPERIMENT_CONFIG_PATH")
        if env_path:
            logger.info("환경변수 EXPERIMENT_CONFIG_PATH 사용: %s", env_path)
            return env_path

        return self.DEFAULT_CONFIG_PATH

    def _load_raw(self) -> Dict[str, Any]:
        path = Path(self.config_path)
        if not path.is_file():
            raise ExperimentConfigurationError(f"실험 설정 파일을 찾을 수 없습니다: {self.config_path}")

        logger.info("YAML 실험 설정 로드 시작: %s", self.config_path)
        try:
            raw = yaml.safe_load(path.read_text(encoding="utf-8"))
        except yaml.YAMLError as e:
            logger.error("YAML 파싱 오류: %s (%s)", self.config_path, e)
            raise ExperimentConfigurationError(f"YAML 파싱 오류 ({self.config_path}): {e}") from e

        if raw is None:
            # 빈 파일은 전부 기본값
            return {}
        if not isinstance(raw, dict):
            raise ExperimentConfigurationError(f"최상위 구조는 매핑이어야 합니다: {self.config_path}")
        return raw

    def load(self) -> ExperimentConfig:
        """
        설정을 로드하고 캐시합니다.

        Raises:
            ExperimentConfigurationError: 파일 없음, YAML 오류, 스키마 검증 실패
        """
        if self._config_cache is not None:
            return self._config_cache

        raw = self._load_raw()
        try:
            config = ExperimentConfig.model_validate(raw)
        except PydanticValidationError as ve:
            error_msg = f"스키마 검증 실패: {ve}"
            logger.error(error_msg)
            raise ExperimentConfigurationError(error_msg) from ve

        logger.info(
            "실험 설정 로드 완료(검증됨): name=%s, 클래스 %d개, tag fraction %d개",
            config.name,
            len(config.dataset.classes),
            len(config.dataset.tag_fractions),
        )
        self._config_cache = config
        return config

    def reload(self) -> ExperimentConfig:
        """캐시를 비우고 다시 로드"""
        logger.info("실험 설정 캐시 초기화 및 재로드")
        self._config_cache = None
        return self.load()


def load_experiment_config(config_path: Optional[str] = None) -> ExperimentConfig:
    """편의 함수: 경로 규칙에 따라 ExperimentConfig 로드"""
    return ExperimentLoader(config_path).load()


__all__ = ["ExperimentConfigurationError", "ExperimentLoader", "load_experiment_config"]
