"""
개념 맵 서비스

pooled-CAV 가중 feature map 합의 ReLU 로 개념 맵을 만들고,
개념/negative 예제의 contraharmonic mean 중앙값으로 정규화 범위를 보정합니다.
같은 가중합 경로를 Grad-CAM 도 사용합니다 (가중치만 pooled gradient).
"""

from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Optional, Tuple, Union

import numpy as np

from ..exceptions import CalibrationError, RepositoryError, ShapeError, ValidationError
from ..models import (
    Checkpoint,
    ConceptLayerArtifact,
    ConceptMap,
    NormalizationRange,
    NormalizedConceptMap,
    PooledCav,
)
from ..utils import statistics
from ..utils.rendering import DEFAULT_ALPHA, DEFAULT_COLORMAP
from ..utils.rendering import render_overlay as _render_overlay
from .model_service import ModelService

# 로깅 설정
logger = logging.getLogger(__name__)

Weights = Union[PooledCav, np.ndarray]


def _weights(pooled: Weights) -> np.ndarray:
    return np.asarray(pooled.values if isinstance(pooled, PooledCav) else pooled, dtype=np.float64)


def _weighted_sum(weights: np.ndarray, fmaps: np.ndarray) -> np.ndarray:
    if weights.ndim != 1 or fmaps.shape[-1] != weights.shape[0]:
        raise ShapeError(
            "가중치 길이가 feature map 채널 수와 다릅니다",
            operator="raw_concept_map",
            expected=(fmaps.shape[-1],),
            actual=weights.shape,
        )
    return np.maximum(np.tensordot(fmaps, weights, axes=([-1], [0])), 0.0)


def raw_concept_map(pooled: Weights, fmaps: np.ndarray, layer: str = "") -> ConceptMap:
    """
    M_ij = max(0, Σ_k p_k · fmaps_ijk)

    Args:
        pooled: pooled-CAV 또는 채널 가중치 벡터
        fmaps: H×W×K feature map

    Raises:
        ShapeError: 가중치 길이 불일치 또는 fmaps 차원 오류
    """
    fm = np.asarray(fmaps, dtype=np.float64)
    if fm.ndim != 3:
        raise ShapeError(f"fmaps 는 H×W×K 여야 합니다: {fm.shape}", operator="raw_concept_map", actual=fm.shape)
    if not layer and isinstance(pooled, PooledCav):
        layer = pooled.layer
    return ConceptMap(layer=layer, values=_weighted_sum(_weights(pooled), fm))


def raw_concept_maps(pooled: Weights, activations: np.ndarray) -> np.ndarray:
    """배치 활성값 (N, H, W, K) -> 개념 맵 (N, H, W)"""
    acts = np.asarray(activations, dtype=np.float64)
    if acts.ndim != 4:
        raise ShapeError(f"활성값은 (N, H, W, K) 여야 합니다: {acts.shape}", operator="raw_concept_maps", actual=acts.shape)
    return _weighted_sum(_weights(pooled), acts)


def contraharmonic_mean(concept_map: Union[ConceptMap, np.ndarray]) -> float:
    values = concept_map.values if isinstance(concept_map, ConceptMap) else concept_map
    return statistics.contraharmonic_mean(values)


def calibrate_from_activations(
    pooled: PooledCav, positive_activations: np.ndarray, negative_activations: np.ndarray
) -> NormalizationRange:
    """
    upper = positive 예제 개념 맵 contraharmonic mean 의 중앙값,
    lower = negative 예제에 대해 같은 값

    Raises:
        ValidationError: 빈 예제 세트
        CalibrationError: upper <= lower (이 레이어에서 개념이 분리되지 않음)
    """
    if len(positive_activations) == 0 or len(negative_activations) == 0:
        raise ValidationError("보정용 예제 세트가 비어 있습니다", field_name="examples", validation_rule="non_empty")
    pos_maps = raw_concept_maps(pooled, positive_activations)
    neg_maps = raw_concept_maps(pooled, negative_activations)
    upper = statistics.median([statistics.contraharmonic_mean(m) for m in pos_maps])
    lower = statistics.median([statistics.contraharmonic_mean(m) for m in neg_maps])
    if not upper > lower:
        raise CalibrationError(
            f"개념 '{pooled.concept}' 이 레이어 '{pooled.layer}' 에서 분리되지 않습니다 "
            f"(upper={upper:.6g} <= lower={lower:.6g})",
            layer=pooled.layer,
            lower=lower,
            upper=upper,
        )
    return NormalizationRange(lower=lower, upper=upper, layer=pooled.layer)


def normalize_map(raw: ConceptMap, norm_range: NormalizationRange) -> NormalizedConceptMap:
    """[lower, upper] 로 clip 후 [0, 1] 로 선형 변환"""
    span = norm_range.upper - norm_range.lower
    clipped = np.clip(raw.values, norm_range.lower, norm_range.upper)
    values = np.clip((clipped - norm_range.lower) / span, 0.0, 1.0)
    return NormalizedConceptMap(layer=raw.layer, values=values)


def render_overlay(
    image: np.ndarray,
    normalized_map: Union[NormalizedConceptMap, np.ndarray],
    output_path: Optional[Union[str, Path]] = None,
    alpha: float = DEFAULT_ALPHA,
    colormap: str = DEFAULT_COLORMAP,
) -> np.ndarray:
    values = normalized_map.values if isinstance(normalized_map, NormalizedConceptMap) else normalized_map
    return _render_overlay(image, values, output_path=output_path, alpha=alpha, colormap=colormap)


def export_raw_map(concept_map: ConceptMap, path: Union[str, Path], concept: str = "") -> Path:
    """원시 개념 맵을 JSON 행렬로 저장"""
    out = Path(path)
    payload = {
        "concept": concept,
        "layer": concept_map.layer,
        "shape": list(concept_map.values.shape),
        "values": concept_map.values.tolist(),
    }
    try:
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(json.dumps(payload), encoding="utf-8")
    except OSError as e:
        raise RepositoryError(
            f"개념 맵 저장 실패: {e}", repository_name="conceptmap", operation_type="save", resource=str(out)
        ) from e
    return out


class ConceptMapService:
    """
    모델과 결합된 개념 맵 계산

    Args:
        model_service: 활성값 캡처용 모델 서비스
    """

    def __init__(self, model_service: Optional[ModelService] = None):
        self.model_service = model_service or ModelService()

    def calibrate_range(
        self,
        model: Checkpoint,
        layer: str,
        pooled: PooledCav,
        positive_examples: np.ndarray,
        negative_examples: np.ndarray,
        activations: Optional[Tuple[np.ndarray, np.ndarray]] = None,
    ) -> NormalizationRange:
        """
        예제 이미지로부터 정규화 범위 보정

        Args:
            activations: 이미 캡처한 (positive, negative) 레이어 활성값. 주어지면 forward 를 생략합니다.

        Raises:
            CalibrationError: upper <= lower
        """
        if activations is None:
            pos = self.model_service.capture_batch(model, positive_examples, layer)
            neg = self.model_service.capture_batch(model, negative_examples, layer)
        else:
            pos, neg = activations
        norm_range = calibrate_from_activations(pooled, pos, neg)
        logger.debug("정규화 범위: concept=%s, layer=%s, [%.6g, %.6g]", pooled.concept, layer, norm_range.lower, norm_range.upper)
        return norm_range

    def concept_map(
        self, model: Checkpoint, image: np.ndarray, artifact: ConceptLayerArtifact
    ) -> Tuple[ConceptMap, NormalizedConceptMap]:
        """
        이미지 하나의 (원시, 정규화) 개념 맵

        보정 범위가 없는 산출물은 0 마스크를 돌려줍니다.
        """
        _, captured = self.model_service.forward_with_capture(model, image, [artifact.layer])
        raw = raw_concept_map(artifact.pooled, captured[artifact.layer], layer=artifact.layer)
        if artifact.range is None:
            return raw, NormalizedConceptMap(layer=artifact.layer, values=np.zeros_like(raw.values))
        return raw, normalize_map(raw, artifact.range)

    def heldout_discrimination(
        self, model: Checkpoint, artifact: ConceptLayerArtifact, positives: np.ndarray, negatives: np.ndarray
    ) -> Tuple[float, float]:
        """
        held-out positive / negative 의 정규화 개념 맵 평균값

        Returns:
            (positive 평균, negative 평균); 보정 범위가 없으면 (0, 0)
        """
        if artifact.range is None:
            return 0.0, 0.0

        def mean_activation(images: np.ndarray) -> float:
            acts = self.model_service.capture_batch(model, images, artifact.layer)
            maps = raw_concept_maps(artifact.pooled, acts)
            normalized = [normalize_map(ConceptMap(artifact.layer, m), artifact.range).values.mean() for m in maps]
            return float(np.mean(normalized))

        return mean_activation(positives), mean_activation(negatives)
