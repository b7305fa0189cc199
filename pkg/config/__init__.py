"""
Configuration package for Concept Explainability Toolkit

이 패키지는 실행 환경 설정(로깅, 출력 경로, 병렬 처리)을 담당합니다.
실험 파라미터는 config/experiments/*.yaml 에서 관리합니다.

Usage:
    from config import get_settings

    settings = get_settings()
    log_level = settings.log_level
    out_dir = settings.get_output_dir()
"""

from .settings import Settings, get_settings, reload_settings

__all__ = [
    "Settings",
    "get_settings",
    "reload_settings",
]

# 버전 정보
__version__ = "1.0.0"
