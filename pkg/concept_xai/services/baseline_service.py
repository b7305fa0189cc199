"""
TCAV 기준선 서비스

CAV 와 클래스 logit gradient 의 내적 부호로 TCAV 점수를 구하고,
재표본 negative 풀로 만든 개념 CAV 점수와 random-vs-random CAV 점수를
두 표본 t-test 로 비교해 유의성을 판정합니다.
"""

from __future__ import annotations

import logging
from typing import List, Optional

import numpy as np

from ..exceptions import ShapeError, ValidationError
from ..models import Cav, Checkpoint, TcavResult
from ..utils.statistics import two_sample_ttest
from .cav_service import compute_cav
from .model_service import ModelService

# 로깅 설정
logger = logging.getLogger(__name__)

SIGNIFICANCE_LEVEL = 0.05
DEFAULT_RUNS = 10
DEFAULT_POOL_SIZE = 50


def directional_score(gradients: np.ndarray, direction: np.ndarray) -> float:
    """
    내적이 양수인 gradient 비율 (내적이 정확히 0 이면 양수가 아님)

    Args:
        gradients: (N, H, W, K)
        direction: H×W×K
    """
    if gradients.shape[1:] != direction.shape:
        raise ShapeError(
            "gradient 와 CAV 의 shape 이 다릅니다", operator="tcav_score", expected=direction.shape, actual=gradients.shape[1:]
        )
    if len(gradients) == 0:
        raise ValidationError("TCAV 점수를 계산할 이미지가 없습니다", field_name="class_images", validation_rule="non_empty")
    dots = gradients.reshape(len(gradients), -1) @ direction.ravel()
    return float(np.count_nonzero(dots > 0.0) / len(dots))


class BaselineService:
    """
    TCAV 서비스

    Args:
        model_service: gradient / 활성값 접근자
        n_runs: 유의성 검정 반복 수
        pool_size: 반복마다 뽑는 negative 풀 크기
        seed: 재표본 seed
    """

    def __init__(
        self,
        model_service: Optional[ModelService] = None,
        n_runs: int = DEFAULT_RUNS,
        pool_size: int = DEFAULT_POOL_SIZE,
        seed: int = 0,
    ):
        self.model_service = model_service or ModelService()
        self.n_runs = n_runs
        self.pool_size = pool_size
        self.seed = seed

    def tcav_score(self, model: Checkpoint, class_images: np.ndarray, cav: Cav, layer: str, class_index: int) -> float:
        """
        class_images 중 ⟨∂logit/∂fmaps, CAV⟩ > 0 인 이미지 비율

        Raises:
            ValidationError: 빈 이미지, 레이어 불일치
            ShapeError: CAV shape 과 레이어 활성값 shape 불일치
        """
        if cav.layer and cav.layer != layer:
            raise ValidationError(
                f"CAV 레이어({cav.layer})와 요청 레이어({layer})가 다릅니다", field_name="layer", validation_rule="same_layer"
            )
        if len(class_images) == 0:
            raise ValidationError("TCAV 점수를 계산할 이미지가 없습니다", field_name="class_images", validation_rule="non_empty")
        gradients = self.model_service.gradients_batch(model, class_images, layer, class_index)
        return directional_score(gradients, cav.direction)

    def _draw(self, rng: np.random.Generator, n: int, size: int) -> np.ndarray:
        return np.sort(rng.choice(n, size=min(size, n), replace=False))

    def _check_sizes(self, n_positives: int, n_negatives: int, n_runs: int, pool_size: int) -> None:
        if n_runs < 2:
            raise ValidationError(f"n_runs 는 2 이상이어야 합니다: {n_runs}", field_name="n_runs", field_value=n_runs)
        if n_positives == 0:
            raise ValidationError("개념 positive 예제가 없습니다", field_name="concept_positives", validation_rule="non_empty")
        if n_negatives < 2 * pool_size:
            raise ValidationError(
                f"negative 풀이 부족합니다: {n_negatives}장 (서로소 풀 2개에 {2 * pool_size}장 필요)",
                field_name="negative_pool",
                field_value=n_negatives,
                validation_rule="enough_negatives",
            )

    def tcav_significance(
        self,
        model: Checkpoint,
        class_images: np.ndarray,
        concept_positives: np.ndarray,
        negative_pool: np.ndarray,
        layer: str,
        class_index: int,
        concept: str = "",
        n_runs: Optional[int] = None,
        pool_size: Optional[int] = None,
    ) -> TcavResult:
        """
        개념 CAV n_runs 개와 random-vs-random CAV n_runs 개의 점수 분포 비교

        개념 CAV 는 positive 부분표본 대 negative 풀 부분표본으로,
        random CAV 는 negative 풀의 서로소인 두 부분표본으로 학습합니다.
        t-test 가 정의되지 않으면 p = 1 입니다.

        Raises:
            ValidationError: 반복 수 또는 예제 수 부족
        """
        n_runs = n_runs or self.n_runs
        pool_size = pool_size or self.pool_size
        self._check_sizes(len(concept_positives), len(negative_pool), n_runs, pool_size)
        rng = np.random.default_rng([self.seed, class_index])

        gradients = self.model_service.gradients_batch(model, class_images, layer, class_index)
        pos_acts = self.model_service.capture_batch(model, concept_positives, layer)
        neg_acts = self.model_service.capture_batch(model, negative_pool, layer)

        concept_scores: List[float] = []
        random_scores: List[float] = []
        for _ in range(n_runs):
            pos_idx = self._draw(rng, len(pos_acts), pool_size)
            neg_idx = self._draw(rng, len(neg_acts), pool_size)
            cav = compute_cav(pos_acts[pos_idx], neg_acts[neg_idx], layer=layer, concept=concept)
            concept_scores.append(directional_score(gradients, cav.direction))

            order = rng.permutation(len(neg_acts))
            first, second = order[:pool_size], order[pool_size : 2 * pool_size]
            random_cav = compute_cav(neg_acts[np.sort(first)], neg_acts[np.sort(second)], layer=layer, concept="random")
            random_scores.append(directional_score(gradients, random_cav.direction))

        _, p_value = two_sample_ttest(concept_scores, random_scores)
        p_value = float(min(max(p_value, 0.0), 1.0))
        score = float(np.mean(concept_scores))
        result = TcavResult(
            concept=concept,
            class_index=int(class_index),
            layer=layer,
            score=score,
            p_value=p_value,
            n_runs=n_runs,
            significant=p_value <= SIGNIFICANCE_LEVEL,
            concept_scores=concept_scores,
            random_scores=random_scores,
        )
        logger.debug(
            "TCAV: concept=%s, class=%d, layer=%s, score=%.3f, p=%.4g, significant=%s",
            concept,
            class_index,
            layer,
            score,
            p_value,
            result.significant,
        )
        return result

