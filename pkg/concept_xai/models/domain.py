"""
설명(explanation) 도메인 모델

CAV, 개념 맵, 레이어 IG, 개념 기여도, TCAV 결과 등 설명 파이프라인의
값 객체를 정의합니다. 텐서는 모두 float64 numpy 배열이며 배치 축이 없습니다.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np

from ..exceptions import CalibrationError

# 로깅 설정
logger = logging.getLogger(__name__)


@dataclass
class Cav:
    """Concept Activation Vector: 개념 중심 - 랜덤 중심 (H×W×K)"""

    layer: str
    direction: np.ndarray
    concept: str = ""
    n_positives: int = 0
    n_negatives: int = 0

    def __post_init__(self):
        if self.direction.ndim != 3:
            raise ValueError(f"CAV direction 은 H×W×K 여야 합니다: {self.direction.shape}")
        if not np.all(np.isfinite(self.direction)):
            raise ValueError(f"CAV '{self.concept}'에 유한하지 않은 값이 있습니다")

    @property
    def channels(self) -> int:
        return int(self.direction.shape[-1])


@dataclass
class PooledCav:
    """공간 평균된 CAV (채널당 스칼라 1개)"""

    layer: str
    values: np.ndarray
    concept: str = ""

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 1:
            raise ValueError(f"pooled CAV 는 길이 K 벡터여야 합니다: {self.values.shape}")


@dataclass
class NormalizedPooledCav:
    """ReLU + min-max 정규화된 pooled CAV, inactive 이면 전부 0"""

    layer: str
    values: np.ndarray
    concept: str = ""
    inactive: bool = False

    def __post_init__(self):
        if np.any(self.values < 0.0) or np.any(self.values > 1.0):
            raise ValueError("정규화된 pooled CAV 값은 [0, 1] 범위여야 합니다")


@dataclass
class ConceptMap:
    """ReLU(Σ_k p_k · fmaps_k), H×W, 원소 >= 0"""

    layer: str
    values: np.ndarray

    def __post_init__(self):
        if self.values.ndim != 2:
            raise ValueError(f"개념 맵은 H×W 여야 합니다: {self.values.shape}")
        if np.any(self.values < 0.0):
            raise ValueError("개념 맵에 음수 값이 있습니다")


@dataclass(frozen=True)
class NormalizationRange:
    """개념 맵 정규화 범위"""

    lower: float
    upper: float
    layer: str = ""

    def __post_init__(self):
        if not self.upper > self.lower:
            raise CalibrationError(
                f"정규화 범위가 유효하지 않습니다 (upper={self.upper:.6g} <= lower={self.lower:.6g})",
                layer=self.layer or None,
                lower=self.lower,
                upper=self.upper,
            )

    def to_dict(self) -> Dict[str, float]:
        return {"lower": self.lower, "upper": self.upper}


@dataclass
class NormalizedConceptMap:
    """[0, 1] 범위로 clip/scale 된 개념 맵 (공간 마스크)"""

    layer: str
    values: np.ndarray

    def __post_init__(self):
        if np.any(self.values < 0.0) or np.any(self.values > 1.0):
            raise ValueError("정규화된 개념 맵 값은 [0, 1] 범위여야 합니다")


@dataclass
class LayerIg:
    """
    레이어 Integrated Gradients

    Attributes:
        attributions: H×W×K
        logit: 실제 feature map 에서의 target logit
        baseline_logit: 0 feature map 에서의 target logit
        residual: Σ attributions - (logit - baseline_logit)
    """

    layer: str
    target_class: int
    attributions: np.ndarray
    logit: float
    baseline_logit: float
    residual: float
    steps: int

    @property
    def delta(self) -> float:
        return self.logit - self.baseline_logit

    @property
    def relative_residual(self) -> float:
        return abs(self.residual) / max(abs(self.delta), 1e-9)


@dataclass
class NormalizedLayerIg:
    """
    부호 처리와 재스케일이 끝난 클래스별 IG

    per_class[t] 의 총합은 scale[t] (= 정규화된 logit 차이 n_t) 와 같습니다.
    """

    layer: str
    per_class: Dict[int, np.ndarray]
    scale: Dict[int, float]
    deltas: Dict[int, float] = field(default_factory=dict)
    degenerate: bool = False

    def for_class(self, class_index: int) -> np.ndarray:
        try:
            return self.per_class[class_index]
        except KeyError:
            raise ValueError(f"클래스 {class_index} 의 IG 가 없습니다 (보유: {sorted(self.per_class)})") from None


@dataclass
class ConceptLayerArtifact:
    """개념 하나 × 레이어 하나의 설명 재료"""

    concept: str
    layer: str
    cav: Cav
    pooled: PooledCav
    normalized: NormalizedPooledCav
    range: Optional[NormalizationRange] = None
    calibration_error: Optional[str] = None

    @property
    def inactive(self) -> bool:
        return self.normalized.inactive or self.range is None


@dataclass
class ConceptAttribution:
    """개념 기여도 Attr^{c,t}"""

    concept: str
    class_index: int
    layer: str
    value: float
    class_scale: float = 1.0
    flags: List[str] = field(default_factory=list)

    def __post_init__(self):
        if not -1e-12 <= self.value <= self.class_scale + 1e-9:
            raise ValueError(
                f"개념 기여도 {self.value} 가 [0, n_t={self.class_scale}] 범위를 벗어났습니다 ({self.concept}, {self.layer})"
            )
        self.value = float(min(max(self.value, 0.0), self.class_scale))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "concept": self.concept,
            "class_index": self.class_index,
            "layer": self.layer,
            "value": self.value,
            "class_scale": self.class_scale,
            "flags": list(self.flags),
        }


@dataclass
class GlobalAttribution:
    """이미지 집합에 대한 평균 개념 기여도"""

    concept: str
    class_index: int
    layer: str
    mean: float
    std: float
    count: int
    values: List[float] = field(default_factory=list)
    scales: List[float] = field(default_factory=list)  # 이미지별 클래스 정규화 logit delta

    def to_dict(self) -> Dict[str, Any]:
        return {
            "concept": self.concept,
            "class_index": self.class_index,
            "layer": self.layer,
            "mean": self.mean,
            "std": self.std,
            "count": self.count,
        }


@dataclass
class TcavResult:
    """TCAV 점수와 유의성 검정 결과"""

    concept: str
    class_index: int
    layer: str
    score: float
    p_value: float
    n_runs: int
    significant: bool
    concept_scores: List[float] = field(default_factory=list)
    random_scores: List[float] = field(default_factory=list)

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"TCAV 점수는 [0, 1] 범위여야 합니다: {self.score}")
        if not 0.0 <= self.p_value <= 1.0:
            raise ValueError(f"p-value 는 [0, 1] 범위여야 합니다: {self.p_value}")
        if self.significant != (self.p_value <= 0.05):
            raise ValueError("significant 플래그가 p-value 와 일치하지 않습니다")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "concept": self.concept,
            "class_index": self.class_index,
            "layer": self.layer,
            "score": self.score,
            "p_value": self.p_value,
            "n_runs": self.n_runs,
            "significant": self.significant,
        }
