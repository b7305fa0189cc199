"""
실험 리포트 모델

검증 실험(run-validation)의 결과를 구조화된 JSON 으로 직렬화하기 위한
Pydantic 모델입니다. 차트는 이 리포트의 값에서만 그려지며,
재현성 검증을 위해 타임스탬프 등 실행마다 바뀌는 값은 포함하지 않습니다.
"""

from __future__ import annotations

import logging
from typing import Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator

# 로거 설정
logger = logging.getLogger(__name__)


class _ReportModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


class AccuracyRow(_ReportModel):
    """모델 × 평가 세트 × 클래스 정확도"""

    model_id: str = Field(..., min_length=1)
    tag_fraction: float = Field(..., ge=0.0, le=1.0)
    dataset: str = Field(..., description="holdout | swapped")
    class_name: str
    accuracy: float = Field(..., ge=0.0, le=1.0)
    count: int = Field(..., ge=0)
    seed: int


class AttributionRow(_ReportModel):
    """모델 × 개념 × 클래스 × 레이어 평균 기여도"""

    model_id: str
    tag_fraction: float = Field(..., ge=0.0, le=1.0)
    concept: str
    concept_kind: str = Field(..., description="entity | tag")
    class_name: str
    layer: str
    mean: float = Field(..., description="[0, 1] 밖 값은 attribution_bounds 검사가 실패로 기록")
    std: float = Field(..., ge=0.0)
    count: int = Field(..., ge=0)
    max_class_scale_violations: int = Field(default=0, ge=0)
    inactive: bool = False
    seed: int


class TcavRow(_ReportModel):
    """TCAV 점수와 유의성"""

    model_id: str
    tag_fraction: float = Field(..., ge=0.0, le=1.0)
    concept: str
    concept_kind: str
    class_name: str
    layer: str
    score: float = Field(..., ge=0.0, le=1.0)
    p_value: float = Field(..., ge=0.0, le=1.0)
    n_runs: int = Field(..., ge=1)
    significant: bool
    seed: int


class CorrelationStat(_ReportModel):
    """Spearman 상관 통계"""

    name: str
    x_label: str
    y_label: str
    x: List[float]
    y: List[float]
    rho: Optional[float] = Field(default=None, description="정의되지 않으면 None")
    p_value: Optional[float] = None


class TrendCheck(_ReportModel):
    """추세 / 판별 조건 검사 결과"""

    name: str
    passed: bool
    detail: str = ""
    values: Dict[str, Optional[float]] = Field(default_factory=dict, description="정의되지 않은 값은 None")


class ResidualStat(_ReportModel):
    """IG completeness residual 요약"""

    model_id: str
    layer: str
    steps: int
    count: int
    median_relative_residual: float = Field(..., ge=0.0)
    max_relative_residual: float = Field(..., ge=0.0)
    convergence_steps: Optional[int] = None
    convergence_median_relative_residual: Optional[float] = Field(default=None, ge=0.0)


class Provenance(_ReportModel):
    """재현 정보"""

    experiment_name: str
    seed: int
    config_hash: str
    manifest_hashes: Dict[str, str] = Field(default_factory=dict)
    versions: Dict[str, str] = Field(default_factory=dict)
    model_seeds: Dict[str, int] = Field(default_factory=dict)


class ExperimentReport(_ReportModel):
    """검증 실험 리포트"""

    class_names: List[str]
    tag_fractions: List[float]
    layer: str
    ig_steps: int = Field(..., ge=2)
    accuracy: List[AccuracyRow] = Field(default_factory=list)
    attributions: List[AttributionRow] = Field(default_factory=list)
    tcav: List[TcavRow] = Field(default_factory=list)
    correlations: List[CorrelationStat] = Field(default_factory=list)
    checks: List[TrendCheck] = Field(default_factory=list)
    residuals: List[ResidualStat] = Field(default_factory=list)
    provenance: Provenance

    @field_validator("tag_fractions")
    @classmethod
    def validate_sorted(cls, value: List[float]) -> List[float]:
        if value != sorted(value):
            raise ValueError("tag_fractions 는 오름차순이어야 합니다")
        return value

    def accuracy_points(self, dataset: str, class_name: str) -> Dict[float, float]:
        """tag fraction -> 정확도 (행이 없는 fraction 은 빠짐)"""
        return {r.tag_fraction: r.accuracy for r in self.accuracy if r.dataset == dataset and r.class_name == class_name}

    def accuracy_for(self, dataset: str, class_name: str) -> List[float]:
        """tag fraction 순서의 정확도 시계열"""
        rows = self.accuracy_points(dataset, class_name)
        return [rows[p] for p in self.tag_fractions if p in rows]

    def attribution_points(self, concept: str) -> Dict[float, float]:
        """tag fraction -> 평균 기여도 (행이 없는 fraction 은 빠짐)"""
        return {r.tag_fraction: r.mean for r in self.attributions if r.concept == concept}

    def attribution_for(self, concept: str) -> List[float]:
        """tag fraction 순서의 평균 기여도 시계열"""
        rows = self.attribution_points(concept)
        return [rows[p] for p in self.tag_fractions if p in rows]

    def tcav_for(self, concept: str) -> List[TcavRow]:
        rows = [r for r in self.tcav if r.concept == concept]
        return sorted(rows, key=lambda r: r.tag_fraction)

    def failed_checks(self) -> List[str]:
        return [c.name for c in self.checks if not c.passed]


class LocalAttributionRow(_ReportModel):
    """로컬 설명 테이블 행 (개념 × top-k 클래스 × 레이어)"""

    image_id: str
    concept: str
    class_index: int
    class_name: str
    rank: int = Field(..., ge=1)
    probability: float = Field(..., ge=0.0, le=1.0)
    layer: str
    value: float = Field(..., ge=0.0, le=1.0)
    class_scale: float = Field(..., ge=0.0, le=1.0)
    residual: float
    steps: int
    flags: str = ""
    overlay_path: Optional[str] = None


class GlobalAttributionRow(_ReportModel):
    """글로벌 설명 테이블 행"""

    concept: str
    class_index: int
    class_name: str
    layer: str
    mean: float = Field(..., ge=0.0, le=1.0)
    std: float = Field(..., ge=0.0)
    count: int = Field(..., ge=1)


__all__ = [
    "AccuracyRow",
    "AttributionRow",
    "TcavRow",
    "CorrelationStat",
    "TrendCheck",
    "ResidualStat",
    "Provenance",
    "ExperimentReport",
    "LocalAttributionRow",
    "GlobalAttributionRow",
]
