"""
Business logic services module

모델 학습/추론, 합성 데이터, CAV, 개념 맵, 기여도, TCAV, 설명, 검증 실험 서비스를 제공합니다.
"""

from .attribution_service import AttributionService, ImageAttribution, concept_attribution, trapezoid_weights
from .baseline_service import BaselineService, directional_score
from .cav_service import CavService, compute_cav, normalize_pooled, pool_cav
from .conceptmap_service import (
    ConceptMapService,
    calibrate_from_activations,
    contraharmonic_mean,
    normalize_map,
    raw_concept_map,
    render_overlay,
)
from .experiment_service import ExperimentService, model_id_for
from .explanation_service import ExplanationService, top_classes
from .model_service import EvaluationResult, ModelService, build_architecture
from .synthdata_service import SyntheticDataService, apply_tag, build_family, render_entity

__all__ = [
    "AttributionService",
    "ImageAttribution",
    "concept_attribution",
    "trapezoid_weights",
    "BaselineService",
    "directional_score",
    "CavService",
    "compute_cav",
    "normalize_pooled",
    "pool_cav",
    "ConceptMapService",
    "calibrate_from_activations",
    "contraharmonic_mean",
    "normalize_map",
    "raw_concept_map",
    "render_overlay",
    "ExperimentService",
    "model_id_for",
    "ExplanationService",
    "top_classes",
    "EvaluationResult",
    "ModelService",
    "build_architecture",
    "SyntheticDataService",
    "apply_tag",
    "build_family",
    "render_entity",
]
