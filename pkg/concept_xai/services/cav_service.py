"""
CAV 서비스

개념 예제와 negative 예제의 레이어 활성값으로부터 평균 차이 CAV 를 만들고,
GAP 로 pooled-CAV 를 얻은 뒤 ReLU + min-max 로 정규화합니다.
개념 맵 정규화 범위 보정까지 묶어 (개념, 레이어) 단위 산출물을 생성합니다.
"""

from __future__ import annotations

import logging
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np

from config.logging_config import log_data_flow

from ..engine import gap
from ..exceptions import CalibrationError, ShapeError, ValidationError
from ..models import (
    Cav,
    Checkpoint,
    ConceptExamples,
    ConceptLayerArtifact,
    NormalizationRange,
    NormalizedPooledCav,
    PooledCav,
)
from .conceptmap_service import ConceptMapService
from .model_service import ModelService

# 로깅 설정
logger = logging.getLogger(__name__)


def _stack(activations: Sequence[np.ndarray] | np.ndarray, label: str) -> np.ndarray:
    arr = np.asarray(activations, dtype=np.float64)
    if arr.size == 0 or len(arr) == 0:
        raise ValidationError(f"{label} 활성값 세트가 비어 있습니다", field_name=label, validation_rule="non_empty")
    if arr.ndim != 4:
        raise ShapeError(
            f"{label} 활성값은 (N, H, W, K) 여야 합니다: {arr.shape}", operator="compute_cav", actual=arr.shape
        )
    return arr


def compute_cav(
    positives: Sequence[np.ndarray] | np.ndarray,
    negatives: Sequence[np.ndarray] | np.ndarray,
    layer: str = "",
    concept: str = "",
) -> Cav:
    """
    평균 차이 CAV: mean(positives) - mean(negatives)

    Raises:
        ValidationError: 빈 세트
        ShapeError: 두 세트의 활성값 shape 불일치
    """
    pos = _stack(positives, "positives")
    neg = _stack(negatives, "negatives")
    if pos.shape[1:] != neg.shape[1:]:
        raise ShapeError(
            "positive / negative 활성값 shape 이 다릅니다",
            operator="compute_cav",
            expected=pos.shape[1:],
            actual=neg.shape[1:],
        )
    direction = pos.mean(axis=0) - neg.mean(axis=0)
    return Cav(layer=layer, direction=direction, concept=concept, n_positives=len(pos), n_negatives=len(neg))


def pool_cav(cav: Cav) -> PooledCav:
    """채널별 공간 평균 (GAP)"""
    return PooledCav(layer=cav.layer, values=gap(cav.direction), concept=cav.concept)


def normalize_pooled(pooled: PooledCav) -> NormalizedPooledCav:
    """
    ReLU 후 min-max 정규화

    ReLU 결과가 모두 0 이면 0 벡터와 inactive 플래그를 돌려줍니다.
    모든 값이 양수여도 (v - min) / (max - min) 을 그대로 적용하며,
    양수 상수 벡터는 max 로 나눕니다.
    """
    rectified = np.maximum(pooled.values, 0.0)
    top = float(rectified.max()) if rectified.size else 0.0
    if top <= 0.0:
        logger.warning("개념 '%s' 가 레이어 '%s' 에서 비활성입니다 (pooled-CAV 양수 성분 없음)", pooled.concept, pooled.layer)
        return NormalizedPooledCav(layer=pooled.layer, values=np.zeros_like(rectified), concept=pooled.concept, inactive=True)
    low = float(rectified.min())
    if top > low:
        values = (rectified - low) / (top - low)
    else:
        values = rectified / top
    return NormalizedPooledCav(layer=pooled.layer, values=np.clip(values, 0.0, 1.0), concept=pooled.concept)


def build_artifact(
    cav: Cav, norm_range: Optional[NormalizationRange] = None, calibration_error: Optional[str] = None
) -> ConceptLayerArtifact:
    pooled = pool_cav(cav)
    return ConceptLayerArtifact(
        concept=cav.concept,
        layer=cav.layer,
        cav=cav,
        pooled=pooled,
        normalized=normalize_pooled(pooled),
        range=norm_range,
        calibration_error=calibration_error,
    )


class CavService:
    """
    CAV 학습 서비스

    Args:
        model_service: 활성값 캡처에 사용할 모델 서비스
        conceptmap_service: 정규화 범위 보정 서비스 (기본: 같은 model_service 공유)
    """

    def __init__(
        self, model_service: Optional[ModelService] = None, conceptmap_service: Optional[ConceptMapService] = None
    ):
        self.model_service = model_service or ModelService()
        self.conceptmap_service = conceptmap_service or ConceptMapService(self.model_service)

    def collect_activations(self, model: Checkpoint, images: np.ndarray, layer: str) -> np.ndarray:
        """이미지별 레이어 활성값 (N, H, W, K), 입력 순서 유지"""
        images = np.asarray(images, dtype=np.float64)
        if images.ndim == 4 and len(images) and images.shape[1:] != tuple(model.architecture.input_shape):
            raise ShapeError(
                "이미지 shape 이 모델 입력과 다릅니다",
                operator="collect_activations",
                expected=tuple(model.architecture.input_shape),
                actual=images.shape[1:],
            )
        return self.model_service.capture_batch(model, images, layer)

    def learn(
        self,
        model: Checkpoint,
        examples: ConceptExamples,
        layers: Iterable[str],
        calibrate: bool = True,
    ) -> Dict[str, ConceptLayerArtifact]:
        """
        개념 하나를 여러 레이어에서 학습

        보정이 실패한 레이어는 range=None 과 실패 사유를 가진 산출물로 남기며,
        설명 단계에서 기여도 0 (inactive) 으로 처리됩니다.

        Returns:
            레이어 -> ConceptLayerArtifact
        """
        artifacts: Dict[str, ConceptLayerArtifact] = {}
        for layer in layers:
            pos = self.collect_activations(model, examples.positives, layer)
            neg = self.collect_activations(model, examples.negatives, layer)
            cav = compute_cav(pos, neg, layer=layer, concept=examples.concept)
            pooled = pool_cav(cav)
            log_data_flow(logger, f"pooled-CAV[{examples.concept}@{layer}]", pooled.values)
            norm_range: Optional[NormalizationRange] = None
            failure: Optional[str] = None
            if calibrate:
                try:
                    norm_range = self.conceptmap_service.calibrate_range(
                        model, layer, pooled, examples.positives, examples.negatives, activations=(pos, neg)
                    )
                except CalibrationError as e:
                    failure = e.message
                    logger.warning("보정 실패: concept=%s, layer=%s: %s", examples.concept, layer, e.message)
            artifacts[layer] = build_artifact(cav, norm_range, failure)
            logger.debug(
                "CAV 학습: concept=%s, layer=%s, range=%s, inactive=%s",
                examples.concept,
                layer,
                norm_range.to_dict() if norm_range else None,
                artifacts[layer].inactive,
            )
        return artifacts

    def learn_all(
        self, model: Checkpoint, concept_sets: Dict[str, ConceptExamples], layers: Sequence[str]
    ) -> Dict[str, Dict[str, ConceptLayerArtifact]]:
        """개념 -> 레이어 -> 산출물"""
        logger.info("CAV 학습 시작: model=%s, 개념 %d개, 레이어 %s", model.model_id, len(concept_sets), list(layers))
        result = {concept: self.learn(model, examples, layers) for concept, examples in concept_sets.items()}
        inactive: List[str] = [
            f"{concept}@{layer}" for concept, per_layer in result.items() for layer, art in per_layer.items() if art.inactive
        ]
        if inactive:
            logger.warning("비활성 (개념, 레이어): %s", inactive)
        return result
