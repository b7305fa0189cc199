"""
설명 생성 서비스

로컬 설명(top-k 클래스 × 레이어 × 개념 기여도와 개념 맵 오버레이)과
전역 설명(클래스 이미지 집합 평균 기여도 막대 차트)을 생성하고 파일로 남깁니다.
개념 산출물은 저장된 CAV 파일이나 개념 예제 디렉토리에서 얻습니다.
"""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np

from ..exceptions import RepositoryError, ValidationError
from ..models import (
    Checkpoint,
    ConceptExamples,
    ConceptLayerArtifact,
    GlobalAttributionRow,
    LocalAttributionRow,
)
from ..repositories import CavStore, ReportStore
from ..utils.charts import grouped_bar_chart
from .attribution_service import ArtifactTable, AttributionService
from .cav_service import CavService
from .conceptmap_service import export_raw_map, render_overlay

# 로깅 설정
logger = logging.getLogger(__name__)


def top_classes(probabilities: np.ndarray, topk: int) -> List[int]:
    """확률 내림차순 상위 k 개 클래스 (동률은 낮은 인덱스 우선)"""
    order = np.argsort(-np.asarray(probabilities), kind="stable")
    return [int(c) for c in order[: max(int(topk), 1)]]


class ExplanationService:
    """
    로컬 / 전역 설명 서비스

    Args:
        attribution_service: IG 기여도 서비스
        cav_service: 예제 기반 CAV 학습 서비스
        overlay_alpha: 오버레이 블렌딩 비율
    """

    def __init__(
        self,
        attribution_service: Optional[AttributionService] = None,
        cav_service: Optional[CavService] = None,
        overlay_alpha: float = 0.5,
    ):
        self.attribution_service = attribution_service or AttributionService()
        self.cav_service = cav_service or CavService(self.attribution_service.model_service)
        self.overlay_alpha = overlay_alpha

    def resolve_layers(self, model: Checkpoint, layers: Optional[Sequence[str]]) -> List[str]:
        """None 이면 설명 가능한 전체 레이어"""
        explainable = model.architecture.explainable_layers()
        if not layers:
            return list(explainable)
        unknown = [layer for layer in layers if layer not in explainable]
        if unknown:
            raise ValidationError(
                f"설명할 수 없는 레이어: {unknown} (가능: {explainable})",
                field_name="layers",
                field_value=unknown,
                validation_rule="explainable_layer",
            )
        return list(layers)

    def load_artifacts(
        self,
        model: Checkpoint,
        layers: Sequence[str],
        cav_dir: Optional[Union[str, Path]] = None,
        example_sets: Optional[Dict[str, ConceptExamples]] = None,
        concepts: Optional[Sequence[str]] = None,
    ) -> ArtifactTable:
        """
        CAV 파일 또는 개념 예제로부터 (개념 -> 레이어 -> 산출물) 테이블 구성

        Raises:
            ValidationError: 둘 다 없거나, 요청 개념/레이어의 CAV 가 없는 경우
        """
        table: Dict[str, Dict[str, ConceptLayerArtifact]] = {}
        if cav_dir is not None:
            try:
                table = CavStore(cav_dir).load_all()
            except RepositoryError as e:
                raise ValidationError(f"CAV 디렉토리를 읽을 수 없습니다: {e.message}", field_name="cav_dir") from e
        if example_sets:
            pending = {
                name: examples
                for name, examples in example_sets.items()
                if any(layer not in table.get(name, {}) for layer in layers)
            }
            for name, examples in pending.items():
                table.setdefault(name, {}).update(self.cav_service.learn(model, examples, layers))
        if not table:
            raise ValidationError("CAV 파일이나 개념 예제가 필요합니다", field_name="concepts", validation_rule="cav_or_examples")

        wanted = list(concepts) if concepts else sorted(table)
        missing = [
            f"{concept}@{layer}" for concept in wanted for layer in layers if layer not in table.get(concept, {})
        ]
        if missing:
            raise ValidationError(
                f"CAV 가 없는 (개념, 레이어): {missing}", field_name="concepts", field_value=missing, validation_rule="cav_exists"
            )
        return {concept: {layer: table[concept][layer] for layer in layers} for concept in wanted}

    def explain_local(
        self,
        model: Checkpoint,
        image: np.ndarray,
        artifacts: ArtifactTable,
        layers: Sequence[str],
        output_dir: Union[str, Path],
        image_id: str = "image",
        topk: int = 3,
        steps: Optional[int] = None,
    ) -> List[LocalAttributionRow]:
        """
        로컬 설명: 개념 × top-k × 레이어 기여도 테이블과 (개념, 레이어) 오버레이

        원시 개념 맵은 concept_maps/ 아래 JSON 행렬로 함께 저장됩니다.

        Returns:
            테이블 행 목록 (local_attributions.csv 로도 저장)
        """
        out = Path(output_dir)
        probabilities = self.attribution_service.model_service.predict_proba(model, image)[0]
        classes = top_classes(probabilities, topk)
        rank = {c: i + 1 for i, c in enumerate(classes)}
        logger.info("로컬 설명: image=%s, top-%d classes=%s, layers=%s", image_id, topk, classes, list(layers))

        explanation = self.attribution_service.explain_image(model, image, artifacts, layers, classes, steps)
        overlays: Dict[tuple, str] = {}
        for (concept, layer), mask in explanation.masks.items():
            path = out / "overlays" / f"{image_id}__{concept}__{layer}.png"
            render_overlay(image, mask, path, alpha=self.overlay_alpha)
            overlays[(concept, layer)] = str(path)
            export_raw_map(
                explanation.raw_maps[(concept, layer)],
                out / "concept_maps" / f"{image_id}__{concept}__{layer}.json",
                concept=concept,
            )

        rows = []
        for attribution in explanation.attributions:
            t, layer = attribution.class_index, attribution.layer
            ig = explanation.layer_igs.get((layer, t))
            rows.append(
                LocalAttributionRow(
                    image_id=image_id,
                    concept=attribution.concept,
                    class_index=t,
                    class_name=model.architecture.class_label(t),
                    rank=rank[t],
                    probability=float(probabilities[t]),
                    layer=layer,
                    value=attribution.value,
                    class_scale=attribution.class_scale,
                    residual=ig.residual if ig is not None else 0.0,
                    steps=ig.steps if ig is not None else 0,
                    flags=";".join(attribution.flags),
                    overlay_path=overlays.get((attribution.concept, layer)),
                )
            )
        rows.sort(key=lambda r: (r.rank, r.layer, r.concept))
        ReportStore(out).write_table("local_attributions.csv", rows)
        return rows

    def explain_global(
        self,
        model: Checkpoint,
        images: np.ndarray,
        class_index: int,
        artifacts: ArtifactTable,
        layers: Sequence[str],
        output_dir: Union[str, Path],
        steps: Optional[int] = None,
    ) -> List[GlobalAttributionRow]:
        """
        전역 설명: 레이어별 막대 그룹, 개념별 시리즈 차트와 테이블

        Raises:
            ValidationError: 이미지가 없는 경우
        """
        if len(images) == 0:
            raise ValidationError("전역 설명할 이미지가 없습니다", field_name="images", validation_rule="non_empty")
        out = Path(output_dir)
        class_name = model.architecture.class_label(class_index)
        result = self.attribution_service.global_attribution(model, images, artifacts, class_index, layers, steps)
        rows = [
            GlobalAttributionRow(
                concept=concept,
                class_index=class_index,
                class_name=class_name,
                layer=layer,
                mean=result[concept][layer].mean,
                std=result[concept][layer].std,
                count=result[concept][layer].count,
            )
            for concept in result
            for layer in layers
        ]
        grouped_bar_chart(
            out / "global_attributions.png",
            groups=list(layers),
            series={concept: [result[concept][layer].mean for layer in layers] for concept in result},
            errors={concept: [result[concept][layer].std for layer in layers] for concept in result},
            title=f"Concept attributions for '{class_name}' ({len(images)} images)",
            ylabel="attribution",
        )
        ReportStore(out).write_table("global_attributions.csv", rows)
        logger.info("전역 설명 저장: %s", out)
        return rows
