"""
개념 기여도 서비스

레이어 Integrated Gradients (0 활성값 baseline, trapezoid 적분),
부호 처리, logit 차이 min-max 정규화, 마스크 × 채널 가중 IG 기여도,
이미지 집합에 대한 전역 평균과 Grad-CAM 기준선을 제공합니다.

IG 는 (이미지, 레이어) 당 한 번만 계산되어 같은 실행의 모든 개념이 공유합니다.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from config.logging_config import log_data_flow, log_step

from ..engine import ComputeGraph, gap, softmax
from ..exceptions import ValidationError
from ..models import (
    Checkpoint,
    ConceptAttribution,
    ConceptLayerArtifact,
    ConceptMap,
    GlobalAttribution,
    LayerIg,
    NormalizedConceptMap,
    NormalizedLayerIg,
    NormalizedPooledCav,
)
from ..utils.statistics import mean_and_std
from .conceptmap_service import normalize_map, raw_concept_map
from .model_service import ModelService

# 로깅 설정
logger = logging.getLogger(__name__)

DEFAULT_IG_STEPS = 300
HEAD_MODES = ("multiclass", "binary")

# 개념 -> 레이어 -> 산출물
ArtifactTable = Mapping[str, Mapping[str, ConceptLayerArtifact]]


def trapezoid_weights(steps: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    α 격자 {0, 1/(s-1), ..., 1} 와 trapezoid 가중치 (양 끝 절반, 합 = 1)

    Raises:
        ValidationError: steps < 2
    """
    if steps < 2:
        raise ValidationError(f"IG steps 는 2 이상이어야 합니다: {steps}", field_name="steps", field_value=steps)
    alphas = np.linspace(0.0, 1.0, steps)
    weights = np.full(steps, 1.0 / (steps - 1))
    weights[0] *= 0.5
    weights[-1] *= 0.5
    return alphas, weights


def split_and_rectify(
    igs: Mapping[int, np.ndarray], mode: str = "multiclass", num_classes: Optional[int] = None
) -> Dict[int, np.ndarray]:
    """
    부호 처리

    multiclass: 클래스별 ReLU.
    binary: 가장 큰 인덱스 logit 의 IG 를 나눕니다. 양수 부분은 그 logit 의 클래스,
    음수 부분의 크기는 반대 클래스에 배정합니다. 2-class 헤드는 1 / 0,
    단일 logit 헤드는 0 (logit 클래스) / 1 (암묵적 여집합).

    Raises:
        ValidationError: 알 수 없는 모드, 3 클래스 이상에서 binary 모드
    """
    if mode not in HEAD_MODES:
        raise ValidationError(f"알 수 없는 head 모드: {mode}", field_name="mode", field_value=mode)
    if mode == "multiclass":
        return {t: np.maximum(ig, 0.0) for t, ig in igs.items()}
    if num_classes is not None and num_classes > 2:
        raise ValidationError(
            f"binary 모드는 클래스 2개 이하 모델에만 쓸 수 있습니다 (클래스 {num_classes}개)",
            field_name="mode",
            field_value=mode,
            validation_rule="binary_head",
        )
    if not igs:
        raise ValidationError("IG 가 비어 있습니다", field_name="igs")
    positive_key = 1 if num_classes == 2 else max(igs)
    if positive_key not in igs:
        raise ValidationError(
            f"binary 모드에는 클래스 {positive_key} 의 IG 가 필요합니다", field_name="igs", validation_rule="binary_head"
        )
    negative_key = 0 if positive_key else 1
    positive = np.asarray(igs[positive_key], dtype=np.float64)
    return {positive_key: np.maximum(positive, 0.0), negative_key: np.maximum(-positive, 0.0)}


def normalize_logit_deltas(deltas: Mapping[int, float]) -> Tuple[Dict[int, float], bool]:
    """
    n_t = (d_t - min d) / (max d - min d)

    Returns:
        (클래스 -> n_t, degenerate 여부); 모든 d 가 같으면 n_t = 0, degenerate
    """
    if len(deltas) < 2:
        raise ValidationError("logit 차이 정규화에는 클래스가 2개 이상 필요합니다", field_name="deltas")
    values = np.array(list(deltas.values()), dtype=np.float64)
    low, high = float(values.min()), float(values.max())
    if not high > low:
        logger.warning("모든 클래스의 logit 차이가 같습니다 (%.6g): 기여도를 0 으로 처리합니다", high)
        return {t: 0.0 for t in deltas}, True
    return {t: (float(d) - low) / (high - low) for t, d in deltas.items()}, False


def rescale_to(rectified: np.ndarray, target: float) -> np.ndarray:
    """총합이 target 이 되도록 재스케일 (총합 0 이면 0 유지)"""
    total = float(rectified.sum())
    if total <= 0.0 or target <= 0.0:
        return np.zeros_like(rectified)
    return rectified * (target / total)


def normalize_layer_ig(
    layer: str,
    igs: Mapping[int, np.ndarray],
    deltas: Mapping[int, float],
    mode: str = "multiclass",
    num_classes: Optional[int] = None,
) -> NormalizedLayerIg:
    """
    부호 처리 + 재스케일

    multiclass 는 클래스 t 의 양수 IG 총합을 n_t 로 맞춥니다.
    binary 는 양/음 부분 질량의 비율을 합이 1 이 되도록 나눠 가집니다.
    """
    rectified = split_and_rectify(igs, mode, num_classes)
    if mode == "binary":
        total = sum(float(r.sum()) for r in rectified.values())
        degenerate = total <= 0.0
        scale = {t: (float(r.sum()) / total if total > 0.0 else 0.0) for t, r in rectified.items()}
    else:
        scale, degenerate = normalize_logit_deltas(deltas)
    per_class = {t: rescale_to(r, scale.get(t, 0.0)) for t, r in rectified.items()}
    return NormalizedLayerIg(
        layer=layer,
        per_class=per_class,
        scale={t: scale.get(t, 0.0) for t in per_class},
        deltas=dict(deltas),
        degenerate=degenerate,
    )


def concept_attribution(
    mask: NormalizedConceptMap,
    weights: NormalizedPooledCav,
    ig: NormalizedLayerIg,
    class_index: int,
    concept: str = "",
) -> ConceptAttribution:
    """
    Attr = Σ_ij M_ij · (Σ_k p_k · IG_ijk)

    Raises:
        ValidationError: 입력 레이어 불일치
    """
    layers = {name for name in (mask.layer, weights.layer, ig.layer) if name}
    if len(layers) > 1:
        raise ValidationError(
            f"마스크/가중치/IG 의 레이어가 다릅니다: {sorted(layers)}", field_name="layer", validation_rule="same_layer"
        )
    tensor = ig.for_class(class_index)
    weighted = np.tensordot(tensor, weights.values, axes=([-1], [0]))
    value = float(np.sum(mask.values * weighted))
    flags: List[str] = []
    if weights.inactive:
        flags.append("inactive")
    if ig.degenerate:
        flags.append("degenerate")
    return ConceptAttribution(
        concept=concept or weights.concept,
        class_index=int(class_index),
        layer=ig.layer or mask.layer,
        value=value,
        class_scale=float(ig.scale.get(class_index, 0.0)),
        flags=flags,
    )


@dataclass
class ImageAttribution:
    """이미지 하나의 레이어별 설명 결과"""

    logits: np.ndarray
    probabilities: np.ndarray
    attributions: List[ConceptAttribution] = field(default_factory=list)
    layer_igs: Dict[Tuple[str, int], LayerIg] = field(default_factory=dict)
    normalized_igs: Dict[str, NormalizedLayerIg] = field(default_factory=dict)
    raw_maps: Dict[Tuple[str, str], ConceptMap] = field(default_factory=dict)
    masks: Dict[Tuple[str, str], NormalizedConceptMap] = field(default_factory=dict)

    def attribution(self, concept: str, class_index: int, layer: str) -> ConceptAttribution:
        for attribution in self.attributions:
            if (attribution.concept, attribution.class_index, attribution.layer) == (concept, class_index, layer):
                return attribution
        raise KeyError((concept, class_index, layer))

    def value(self, concept: str, class_index: int, layer: str) -> float:
        return self.attribution(concept, class_index, layer).value


class AttributionService:
    """
    IG 기반 개념 기여도 서비스

    Args:
        model_service: 모델 접근자
        ig_steps: 기본 IG 격자 점 수
        ig_batch_size: suffix forward 한 번에 평가할 α 개수
        max_workers: 전역 설명 시 이미지 단위 동시 작업 수
    """

    def __init__(
        self,
        model_service: Optional[ModelService] = None,
        ig_steps: int = DEFAULT_IG_STEPS,
        ig_batch_size: int = 64,
        max_workers: int = 1,
    ):
        self.model_service = model_service or ModelService()
        self.ig_steps = ig_steps
        self.ig_batch_size = max(int(ig_batch_size), 1)
        self.max_workers = max(int(max_workers), 1)

    # ------------------------------------------------------------------
    # Integrated Gradients
    # ------------------------------------------------------------------

    def _check(self, model: Checkpoint, layer: str, classes: Iterable[int]) -> None:
        if layer not in model.architecture.explainable_layers():
            raise ValidationError(
                f"설명할 수 없는 레이어: {layer}", field_name="layer", field_value=layer, validation_rule="explainable_layer"
            )
        bad = [c for c in classes if not 0 <= int(c) < model.num_classes]
        if bad:
            raise ValidationError(
                f"클래스 인덱스가 범위를 벗어났습니다: {bad}", field_name="class_index", field_value=bad, validation_rule="class_range"
            )

    def layer_igs(
        self,
        model: Checkpoint,
        image: np.ndarray,
        layer: str,
        classes: Sequence[int],
        steps: Optional[int] = None,
        graph: Optional[ComputeGraph] = None,
    ) -> Tuple[Dict[int, LayerIg], np.ndarray, np.ndarray, np.ndarray]:
        """
        여러 클래스의 레이어 IG 를 같은 보간 forward 로 계산

        Returns:
            (클래스 -> LayerIg, 실제 logits (C,), baseline logits (C,), fmaps H×W×K)
        """
        steps = steps or self.ig_steps
        self._check(model, layer, classes)
        alphas, weights = trapezoid_weights(steps)
        g = graph or model.build_graph()
        logits = g.forward(np.asarray(image, dtype=np.float64)[None, ...])[0].copy()
        fmaps = g.node(layer).output[0].copy()
        baseline_logits = g.forward_from(layer, np.zeros_like(fmaps)[None, ...])[0].copy()

        grad_sums = {int(t): np.zeros_like(fmaps) for t in classes}
        for start in range(0, steps, self.ig_batch_size):
            chunk = alphas[start : start + self.ig_batch_size]
            w = weights[start : start + self.ig_batch_size]
            g.forward_from(layer, chunk[:, None, None, None] * fmaps[None, ...])
            for t in grad_sums:
                seed = np.zeros((len(chunk), model.num_classes))
                seed[:, t] = 1.0
                grads = g.backward(g.output_index, layer, seed=seed)
                grad_sums[t] += np.tensordot(w, grads, axes=([0], [0]))

        result: Dict[int, LayerIg] = {}
        for t, grad_sum in grad_sums.items():
            attributions = fmaps * grad_sum
            delta = float(logits[t] - baseline_logits[t])
            residual = float(attributions.sum()) - delta
            result[t] = LayerIg(
                layer=layer,
                target_class=t,
                attributions=attributions,
                logit=float(logits[t]),
                baseline_logit=float(baseline_logits[t]),
                residual=residual,
                steps=steps,
            )
            log_step(logger, "layer_ig", f"layer={layer}, class={t}, delta={delta:.6g}, residual={residual:.3g}")
        return result, logits, baseline_logits, fmaps

    def layer_ig(
        self,
        model: Checkpoint,
        image: np.ndarray,
        layer: str,
        class_index: int,
        steps: Optional[int] = None,
    ) -> LayerIg:
        """단일 클래스 레이어 IG"""
        igs, _, _, _ = self.layer_igs(model, image, layer, [class_index], steps)
        return igs[int(class_index)]

    def residual_sweep(
        self, model: Checkpoint, image: np.ndarray, layer: str, class_index: int, steps_list: Sequence[int]
    ) -> Dict[int, float]:
        """step 수별 상대 completeness 잔차"""
        return {int(s): self.layer_ig(model, image, layer, class_index, s).relative_residual for s in steps_list}

    def normalize_logit_deltas(
        self, model: Checkpoint, image: np.ndarray, layers: Sequence[str]
    ) -> Dict[str, Tuple[Dict[int, float], bool]]:
        """레이어별 (클래스 -> n_t, degenerate)"""
        g = model.build_graph()
        result = {}
        for layer in layers:
            self._check(model, layer, [])
            logits = g.forward(np.asarray(image, dtype=np.float64)[None, ...])[0]
            fmaps = g.node(layer).output[0]
            baseline = g.forward_from(layer, np.zeros_like(fmaps)[None, ...])[0]
            deltas = {t: float(logits[t] - baseline[t]) for t in range(model.num_classes)}
            result[layer] = normalize_logit_deltas(deltas)
        return result

    # ------------------------------------------------------------------
    # 개념 기여도
    # ------------------------------------------------------------------

    def explain_image(
        self,
        model: Checkpoint,
        image: np.ndarray,
        artifacts: ArtifactTable,
        layers: Sequence[str],
        classes: Sequence[int],
        steps: Optional[int] = None,
        graph: Optional[ComputeGraph] = None,
    ) -> ImageAttribution:
        """
        이미지 하나에 대해 개념 × 클래스 × 레이어 기여도 계산

        IG 는 레이어당 한 번 계산되어 모든 개념이 공유합니다.
        보정 범위가 없거나 비활성인 개념은 기여도 0 과 플래그로 보고됩니다.
        """
        g = graph or model.build_graph()
        mode = model.architecture.head_mode()
        ig_classes = list(range(model.num_classes)) if mode == "binary" else [int(c) for c in classes]
        explanation: Optional[ImageAttribution] = None

        for layer in layers:
            igs, logits, baseline, fmaps = self.layer_igs(model, image, layer, ig_classes, steps, graph=g)
            if explanation is None:
                explanation = ImageAttribution(logits=logits, probabilities=softmax(logits))
            deltas = {t: float(logits[t] - baseline[t]) for t in range(model.num_classes)}
            normalized = normalize_layer_ig(
                layer, {t: ig.attributions for t, ig in igs.items()}, deltas, mode, model.num_classes
            )
            explanation.normalized_igs[layer] = normalized
            for t, ig in igs.items():
                explanation.layer_igs[(layer, t)] = ig

            for concept, per_layer in artifacts.items():
                artifact = per_layer.get(layer)
                if artifact is None:
                    raise ValidationError(
                        f"개념 '{concept}' 의 레이어 '{layer}' CAV 가 없습니다",
                        field_name="artifacts",
                        field_value=f"{concept}@{layer}",
                        validation_rule="cav_per_layer",
                    )
                raw = raw_concept_map(artifact.pooled, fmaps, layer=layer)
                if artifact.range is None:
                    mask = NormalizedConceptMap(layer=layer, values=np.zeros_like(raw.values))
                else:
                    mask = normalize_map(raw, artifact.range)
                explanation.raw_maps[(concept, layer)] = raw
                explanation.masks[(concept, layer)] = mask
                for t in classes:
                    attribution = concept_attribution(mask, artifact.normalized, normalized, int(t), concept=concept)
                    if artifact.range is None and "uncalibrated" not in attribution.flags:
                        attribution.flags.append("uncalibrated")
                    explanation.attributions.append(attribution)
                    logger.debug(
                        "기여도: concept=%s, class=%d, layer=%s, value=%.6f (n_t=%.4f)",
                        concept,
                        t,
                        layer,
                        attribution.value,
                        attribution.class_scale,
                    )

        if explanation is None:
            raise ValidationError("설명할 레이어가 없습니다", field_name="layers")
        return explanation

    def global_attribution(
        self,
        model: Checkpoint,
        images: np.ndarray,
        artifacts: ArtifactTable,
        class_index: int,
        layers: Sequence[str],
        steps: Optional[int] = None,
    ) -> Dict[str, Dict[str, GlobalAttribution]]:
        """
        이미지 집합의 평균/표준편차 개념 기여도

        이미지별 작업은 각자 그래프 인스턴스를 가지며 병렬로 실행될 수 있고,
        집계는 입력 순서대로 고정된 순서로 수행됩니다.

        Returns:
            개념 -> 레이어 -> GlobalAttribution
        """
        batch = np.asarray(images, dtype=np.float64)
        if batch.ndim == 3:
            batch = batch[None, ...]
        if len(batch) == 0:
            raise ValidationError("전역 설명할 이미지가 없습니다", field_name="images", validation_rule="non_empty")
        logger.info(
            "전역 기여도 계산: model=%s, class=%d, 이미지 %d장, 개념 %d개, 레이어 %s",
            model.model_id,
            class_index,
            len(batch),
            len(artifacts),
            list(layers),
        )

        def job(image: np.ndarray) -> ImageAttribution:
            return self.explain_image(model, image, artifacts, layers, [class_index], steps, graph=model.build_graph())

        if self.max_workers > 1:
            with ThreadPoolExecutor(max_workers=self.max_workers) as executor:
                explanations = list(executor.map(job, batch))
        else:
            explanations = [job(image) for image in batch]

        result: Dict[str, Dict[str, GlobalAttribution]] = {}
        for concept in artifacts:
            result[concept] = {}
            for layer in layers:
                found = [e.attribution(concept, class_index, layer) for e in explanations]
                values = [a.value for a in found]
                mean, std = mean_and_std(values)
                result[concept][layer] = GlobalAttribution(
                    concept=concept,
                    class_index=class_index,
                    layer=layer,
                    mean=mean,
                    std=std,
                    count=len(values),
                    values=values,
                    scales=[a.class_scale for a in found],
                )
        log_data_flow(
            logger,
            "global_attribution",
            {c: {l: result[c][l].mean for l in layers} for c in result},
            level="DEBUG",
        )
        return result

    # ------------------------------------------------------------------
    # Grad-CAM
    # ------------------------------------------------------------------

    def gradcam_map(self, model: Checkpoint, image: np.ndarray, layer: str, class_index: int) -> ConceptMap:
        """가중치 = GAP(logit gradient) 인 개념 맵 경로 (클래스별 saliency)"""
        g = model.build_graph()
        grads = self.model_service.logit_gradients(model, image, layer, class_index, graph=g)
        fmaps = g.node(layer).output[0]
        return raw_concept_map(gap(grads), fmaps, layer=layer)
