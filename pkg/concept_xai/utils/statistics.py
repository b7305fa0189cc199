"""
통계 유틸리티

contraharmonic mean, 중앙값, Spearman 상관, 두 표본 t-test, 추세 검사 등
리포트와 보정(calibration)에서 공통으로 쓰는 계산을 모았습니다.
"""

from __future__ import annotations

import logging
import math
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy import stats

# 로깅 설정
logger = logging.getLogger(__name__)


def contraharmonic_mean(values: np.ndarray) -> float:
    """
    Σx² / Σx

    모든 값이 0인 맵은 0/0 이므로 0 으로 정의합니다.

    Examples:
        >>> round(contraharmonic_mean(np.array([1.0, 2.0, 3.0])), 4)
        2.3333
    """
    arr = np.asarray(values, dtype=np.float64)
    total = float(arr.sum())
    if total == 0.0:
        return 0.0
    return float(np.square(arr).sum() / total)


def median(values: Sequence[float]) -> float:
    """중앙값 (짝수 개면 가운데 두 값의 평균)"""
    arr = np.asarray(values, dtype=np.float64)
    if arr.size == 0:
        raise ValueError("빈 표본의 중앙값은 정의되지 않습니다")
    return float(np.median(arr))


def mean_and_std(values: Sequence[float]) -> Tuple[float, float]:
    """고정 순서 합산 평균/모표준편차"""
    arr = np.asarray(values, dtype=np.float64)
    if arr.size == 0:
        raise ValueError("빈 표본입니다")
    mean = float(math.fsum(arr.tolist()) / arr.size)
    var = float(math.fsum(((arr - mean) ** 2).tolist()) / arr.size)
    return mean, math.sqrt(var)


def spearman(x: Sequence[float], y: Sequence[float]) -> Tuple[Optional[float], Optional[float]]:
    """
    Spearman 순위 상관 (rho, p-value)

    상수 표본 등으로 정의되지 않으면 (None, None) 을 반환합니다.
    """
    if len(x) != len(y):
        raise ValueError("x, y 길이가 다릅니다")
    if len(x) < 2:
        return None, None
    result = stats.spearmanr(np.asarray(x, dtype=np.float64), np.asarray(y, dtype=np.float64))
    rho, p_value = float(result[0]), float(result[1])
    if math.isnan(rho):
        return None, None
    return rho, (None if math.isnan(p_value) else p_value)


def two_sample_ttest(a: Sequence[float], b: Sequence[float]) -> Tuple[float, float]:
    """
    양측 두 표본 t-test (t, p)

    두 표본이 모두 상수라 통계량이 정의되지 않으면 (0.0, 1.0) 을 반환합니다.
    """
    sample_a = np.asarray(a, dtype=np.float64)
    sample_b = np.asarray(b, dtype=np.float64)
    if sample_a.size < 2 or sample_b.size < 2:
        raise ValueError("t-test 에는 각 표본이 2개 이상 필요합니다")
    if np.ptp(sample_a) == 0.0 and np.ptp(sample_b) == 0.0:
        return 0.0, 1.0
    result = stats.ttest_ind(sample_a, sample_b)
    t_stat, p_value = float(result[0]), float(result[1])
    if math.isnan(p_value):
        return 0.0, 1.0
    return t_stat, min(max(p_value, 0.0), 1.0)


def count_increases(series: Sequence[float], tolerance: float = 0.0) -> Tuple[int, float]:
    """
    인접 값이 증가한 횟수와 최대 증가폭

    tolerance 이하의 증가는 세지 않습니다.
    """
    count, largest = 0, 0.0
    for prev, cur in zip(series, series[1:]):
        rise = cur - prev
        if rise > tolerance:
            count += 1
            largest = max(largest, rise)
    return count, largest


def is_non_increasing(series: Sequence[float], allowed_inversions: int = 1, max_inversion: float = 0.02) -> bool:
    """허용된 횟수/크기 이내의 역전만 있는 비증가 수열인지"""
    rises = [cur - prev for prev, cur in zip(series, series[1:]) if cur - prev > 0.0]
    return len(rises) <= allowed_inversions and all(r <= max_inversion for r in rises)


def variance(values: Sequence[float]) -> float:
    """모분산 ([0, 1] 정규화된 값에 사용)"""
    arr = np.asarray(values, dtype=np.float64)
    if arr.size == 0:
        return 0.0
    return float(np.var(arr))
