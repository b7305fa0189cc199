"""
로깅 레벨 및 데이터 흐름 로그 헬퍼

DEBUG(10) 아래에 DEBUG2(5)를 두어 feature map, IG, CAV 같은 배열이
어떤 모양과 값 범위로 흘러가는지 따로 켤 수 있게 합니다.
배열은 원소를 그대로 찍지 않고 shape / min / max / mean 으로 요약합니다.

레벨 사용 기준:
- WARNING: 비활성 개념, 모든 클래스 logit 차이가 같은 경우, 보정 실패
- INFO: 단계 경계 (데이터셋 생성, epoch 요약, 리포트 저장)
- DEBUG: 레이어 / 개념별 수치
- DEBUG2: 배열 데이터 흐름

Usage:
    from config.logging_config import log_data_flow, log_step

    log_data_flow(logger, "IG[conv6]", ig)
    log_step(logger, "layer_ig", "class=2")

환경변수:
- LOG_MAX_LENGTH: 포맷된 로그 데이터 최대 길이 (기본 1000, 0 이하면 무제한)
- DATA_FLOW_LOG_MAX_LENGTH: log_data_flow() 전용 길이 (미설정 시 LOG_MAX_LENGTH)
"""

import json
import logging
import os
from typing import Any, Dict, Optional

import numpy as np

DEBUG2_LEVEL_NUM = 5
DEBUG2_LEVEL_NAME = "DEBUG2"

_LEVEL_NAMES = ("DEBUG2", "DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")
_DEFAULT_MAX_LENGTH = 1000


def _env_int(name: str, default: Optional[int]) -> Optional[int]:
    """정수 환경변수 (잘못된 값은 경고 후 기본값)"""
    raw = os.getenv(name)
    if raw is None or raw.strip() == "":
        return default
    try:
        return int(raw)
    except ValueError:
        logging.warning("%s 값이 정수가 아니므로 무시합니다: %r", name, raw)
        return default


def setup_custom_logging_levels() -> None:
    """DEBUG2 레벨과 Logger.debug2() 등록 (중복 호출 무시)"""
    if logging.getLevelName(DEBUG2_LEVEL_NUM) == DEBUG2_LEVEL_NAME and hasattr(logging.Logger, "debug2"):
        return

    logging.addLevelName(DEBUG2_LEVEL_NUM, DEBUG2_LEVEL_NAME)
    logging.DEBUG2 = DEBUG2_LEVEL_NUM  # type: ignore[attr-defined]

    def debug2(self: logging.Logger, msg: Any, *args: Any, **kwargs: Any) -> None:
        if self.isEnabledFor(DEBUG2_LEVEL_NUM):
            self._log(DEBUG2_LEVEL_NUM, msg, args, **kwargs)

    logging.Logger.debug2 = debug2  # type: ignore[attr-defined]


def get_numeric_log_level(level: str) -> int:
    """
    레벨 이름 -> 숫자 (DEBUG2 포함, 대소문자 무시)

    Raises:
        ValueError: 알 수 없는 레벨 이름
    """
    name = level.strip().upper()
    if name not in _LEVEL_NAMES:
        raise ValueError(f"Invalid log level: {level}. Must be one of {list(_LEVEL_NAMES)}")
    return DEBUG2_LEVEL_NUM if name == DEBUG2_LEVEL_NAME else getattr(logging, name)


def summarize_array(array: np.ndarray) -> Dict[str, Any]:
    """
    배열 요약

    통계는 유한한 원소만으로 계산하고, NaN/Inf 가 있으면 그 개수를 nonfinite 로 남깁니다.
    """
    arr = np.asarray(array, dtype=np.float64)
    summary: Dict[str, Any] = {"shape": list(arr.shape)}
    if arr.size == 0:
        summary["size"] = 0
        return summary

    finite = np.isfinite(arr)
    values = arr[finite]
    if values.size:
        summary.update(min=float(values.min()), max=float(values.max()), mean=float(values.mean()))
    if not finite.all():
        summary["nonfinite"] = int((~finite).sum())
    return summary


def _loggable(data: Any) -> Any:
    if isinstance(data, np.ndarray):
        return summarize_array(data)
    if isinstance(data, np.generic):
        return data.item()
    if isinstance(data, dict):
        return {str(k): _loggable(v) for k, v in data.items()}
    if isinstance(data, (list, tuple)):
        return [_loggable(v) for v in data]
    return data


def format_data_for_log(data: Any, max_length: Optional[int] = None, indent: int = 2) -> str:
    """
    로그용 문자열 변환

    dict / list 는 JSON 으로, 그 안의 ndarray 는 summarize_array() 결과로 바꿉니다.
    max_length 를 넘으면 잘라내고 전체 길이를 덧붙입니다.
    """
    limit = _env_int("LOG_MAX_LENGTH", _DEFAULT_MAX_LENGTH) if max_length is None else max_length
    try:
        value = _loggable(data)
        if isinstance(value, (dict, list)):
            text = json.dumps(value, ensure_ascii=False, indent=indent, default=str)
        else:
            text = str(value)
    except Exception as e:  # noqa: BLE001
        return f"<포맷팅 오류: {type(e).__name__}: {e}>"

    if limit and limit > 0 and len(text) > limit:
        return f"{text[:limit]}\n... ({len(text)}자 중 {limit}자 표시)"
    return text


def log_data_flow(
    logger: logging.Logger,
    stage: str,
    data: Any,
    level: str = DEBUG2_LEVEL_NAME,
    max_length: Optional[int] = None,
) -> None:
    """
    배열/구조 데이터를 단계 이름과 함께 기록

    Args:
        logger: 기록할 로거
        stage: 단계 이름 (예: "IG[conv6]")
        data: ndarray 또는 ndarray 를 담은 dict / list
        level: 레벨 이름 (기본 DEBUG2)
        max_length: 길이 제한 (None 이면 DATA_FLOW_LOG_MAX_LENGTH, 그 다음 LOG_MAX_LENGTH)
    """
    level_num = get_numeric_log_level(level)
    if not logger.isEnabledFor(level_num):
        return
    if max_length is None:
        max_length = _env_int("DATA_FLOW_LOG_MAX_LENGTH", None)
    logger.log(level_num, "[%s] %s", stage, format_data_for_log(data, max_length=max_length))


def log_step(logger: logging.Logger, step_name: str, details: Optional[str] = None) -> None:
    """처리 단계 한 줄 기록 (DEBUG2)"""
    if logger.isEnabledFor(DEBUG2_LEVEL_NUM):
        logger.log(DEBUG2_LEVEL_NUM, "- %s%s", step_name, f" ({details})" if details else "")


setup_custom_logging_levels()
