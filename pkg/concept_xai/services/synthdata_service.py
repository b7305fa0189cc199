"""
합성 데이터 서비스

엔티티(cucumber / taxi / zebra) 렌더러, 태그 스탬프, 태그 비율별 데이터셋 패밀리와
개념 예제 세트를 생성합니다.

이미지마다 (seed, 분할 코드, 클래스, 인덱스) 로부터 독립 rng 스트림을 파생하므로
결과는 생성 순서와 무관하게 seed 로 완전히 결정됩니다.
"""

from __future__ import annotations

import logging
import math
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from config.logging_config import log_step

from ..config import CohortConfig, DatasetConfig
from ..exceptions import ValidationError
from ..models import (
    CANONICAL_TAGS,
    SWAPPED_TAGS,
    TAG_COLORS,
    ConceptExamples,
    ConceptExampleSets,
    Dataset,
    DatasetFamily,
    TagAnnotation,
    TagSpec,
    fraction_dirname,
    tag_concept_id,
)
from ..utils.drawing import (
    clamp_palette,
    disk_mask,
    ellipse_mask,
    jitter_color,
    noise_background,
    paint,
    quantize,
    rotated_rect_mask,
    stripe_field,
    uniform_noise_image,
)
from ..utils.glyphs import GLYPH_HEIGHT, GLYPH_WIDTH, glyph_mask

# 로깅 설정
logger = logging.getLogger(__name__)

# rng 스트림 분할 코드
SPLIT_TRAIN = 0
SPLIT_HOLDOUT = 1
SPLIT_SWAPPED = 2
SPLIT_CONCEPT = 3
SPLIT_TAG_NOISE = 4
STAMP_TRAIN = 20
STAMP_SWAPPED = 21
STAMP_TAG_POSITIVE = 22
STAMP_TAG_NEGATIVE = 23
ORDER_TAGGED = 10

TAG_LETTERS = ("C", "T", "Z")

Renderer = Callable[[np.random.Generator, int], np.ndarray]


def _to_world(cy: float, cx: float, angle: float, v: float, u: float) -> Tuple[float, float]:
    """물체 좌표 (v: 세로, u: 가로) -> 이미지 좌표"""
    cos, sin = math.cos(angle), math.sin(angle)
    return cy - u * sin + v * cos, cx + u * cos + v * sin


def _place(rng: np.random.Generator, size: int, spread: float = 0.12) -> Tuple[float, float]:
    return (
        size / 2 + rng.uniform(-spread, spread) * size,
        size / 2 + rng.uniform(-spread, spread) * size,
    )


def render_zebra(rng: np.random.Generator, size: int) -> np.ndarray:
    """줄무늬 타원 몸통 + 머리, 사바나 배경"""
    image = noise_background(rng, size, jitter_color(rng, (0.62, 0.56, 0.34), 0.06))
    cy, cx = _place(rng, size)
    ry = rng.uniform(0.18, 0.26) * size
    rx = rng.uniform(0.28, 0.38) * size
    angle = rng.uniform(-0.5, 0.5)
    body = ellipse_mask(size, cy, cx, ry, rx, angle)
    side = 1.0 if rng.random() < 0.5 else -1.0
    head_cy, head_cx = _to_world(cy, cx, angle, -0.5 * ry, side * 0.95 * rx)
    body |= ellipse_mask(size, head_cy, head_cx, 0.45 * ry, 0.3 * rx, angle + side * 0.6)
    stripes = stripe_field(
        size,
        period=rng.uniform(4.0, 7.0),
        angle=angle + rng.uniform(-0.3, 0.3),
        phase=rng.uniform(0.0, 2.0 * math.pi),
    )
    paint(image, body & stripes, jitter_color(rng, (0.1, 0.1, 0.1), 0.03))
    paint(image, body & ~stripes, jitter_color(rng, (0.92, 0.92, 0.9), 0.03))
    return quantize(clamp_palette(image))


def render_taxi(rng: np.random.Generator, size: int) -> np.ndarray:
    """노란 차체 + 창문 + 바퀴, 아스팔트 배경"""
    image = noise_background(rng, size, jitter_color(rng, (0.42, 0.42, 0.45), 0.05))
    cy, cx = _place(rng, size)
    half_w = rng.uniform(0.25, 0.33) * size
    half_h = rng.uniform(0.11, 0.16) * size
    angle = rng.uniform(-0.25, 0.25)
    wheel_r = 0.38 * half_h
    for u in (-0.6 * half_w, 0.6 * half_w):
        wy, wx = _to_world(cy, cx, angle, half_h, u)
        paint(image, disk_mask(size, wy, wx, wheel_r), jitter_color(rng, (0.08, 0.08, 0.08), 0.02))
    paint(image, rotated_rect_mask(size, cy, cx, half_h, half_w, angle), jitter_color(rng, (0.95, 0.8, 0.1), 0.04))
    roof_y, roof_x = _to_world(cy, cx, angle, -0.9 * half_h, 0.0)
    paint(
        image,
        rotated_rect_mask(size, roof_y, roof_x, 0.55 * half_h, 0.55 * half_w, angle),
        jitter_color(rng, (0.93, 0.78, 0.12), 0.04),
    )
    for u in (-0.27 * half_w, 0.27 * half_w):
        gy, gx = _to_world(cy, cx, angle, -0.9 * half_h, u)
        paint(
            image,
            rotated_rect_mask(size, gy, gx, 0.35 * half_h, 0.22 * half_w, angle),
            jitter_color(rng, (0.55, 0.68, 0.8), 0.04),
        )
    return quantize(clamp_palette(image))


def render_cucumber(rng: np.random.Generator, size: int) -> np.ndarray:
    """가늘고 긴 초록 타원 + 반점 + 하이라이트, 밝은 테이블 배경"""
    image = noise_background(rng, size, jitter_color(rng, (0.78, 0.7, 0.55), 0.06))
    cy, cx = _place(rng, size)
    ry = rng.uniform(0.07, 0.1) * size
    rx = rng.uniform(0.3, 0.4) * size
    angle = rng.uniform(0.0, math.pi)
    body = ellipse_mask(size, cy, cx, ry, rx, angle)
    paint(image, body, jitter_color(rng, (0.2, 0.48, 0.15), 0.04))
    speckles = body & (rng.random((size, size)) < 0.15)
    paint(image, speckles, jitter_color(rng, (0.12, 0.33, 0.1), 0.03))
    offset = 0.35 * ry
    highlight = ellipse_mask(size, cy - offset * math.cos(angle), cx + offset * math.sin(angle), 0.25 * ry, 0.75 * rx, angle)
    paint(image, highlight & body, jitter_color(rng, (0.38, 0.66, 0.28), 0.03))
    return quantize(clamp_palette(image))


RENDERERS: Dict[str, Renderer] = {
    "cucumber": render_cucumber,
    "taxi": render_taxi,
    "zebra": render_zebra,
}


def render_entity(class_name: str, rng: np.random.Generator, size: int) -> np.ndarray:
    """
    엔티티 이미지 렌더링 (H×W×3, k/255 양자화)

    Raises:
        ValidationError: 알 수 없는 엔티티
    """
    renderer = RENDERERS.get(class_name)
    if renderer is None:
        raise ValidationError(
            f"알 수 없는 엔티티: {class_name}", field_name="class_name", field_value=class_name, validation_rule="known_entity"
        )
    return renderer(rng, size)


def apply_tag(image: np.ndarray, tag: TagSpec, rng: np.random.Generator) -> Tuple[np.ndarray, TagAnnotation]:
    """
    태그 스탬프: 색 사각형을 칠하고 그 안에 글자를 그린 사본을 반환

    사각형은 이미지 안에 완전히 들어가며 한 변은 tag.side_range 에서 균등 추출합니다.

    Raises:
        ValidationError: 태그 최소 크기가 이미지(여백 포함)보다 큰 경우
    """
    height, width = image.shape[:2]
    low, high = tag.side_range
    room = min(height, width) - 2 * tag.margin
    if low > room:
        raise ValidationError(
            f"태그 최소 크기({low}px)가 이미지 가용 영역({room}px)보다 큽니다",
            field_name="side_range",
            field_value=tag.side_range,
            validation_rule="tag_fits_image",
        )
    side = int(rng.integers(low, min(high, room) + 1))
    y0 = int(rng.integers(tag.margin, height - tag.margin - side + 1))
    x0 = int(rng.integers(tag.margin, width - tag.margin - side + 1))

    stamped = image.copy()
    stamped[y0 : y0 + side, x0 : x0 + side] = tag.fill_color

    pad = max(side // 6, 1)
    glyph_h = max(side - 2 * pad, 1)
    glyph_w = max(min(int(round(glyph_h * GLYPH_WIDTH / GLYPH_HEIGHT)), side - 2 * pad), 1)
    gy = y0 + (side - glyph_h) // 2
    gx = x0 + (side - glyph_w) // 2
    mask = glyph_mask(tag.letter, glyph_h, glyph_w)
    region = stamped[gy : gy + glyph_h, gx : gx + glyph_w]
    region[mask] = tag.glyph_color
    return stamped, TagAnnotation(tag=tag.letter, box=(y0, x0, y0 + side, x0 + side))


class SyntheticDataService:
    """
    데이터셋 패밀리 / 개념 예제 생성 서비스

    Args:
        config: 데이터셋 설정
        cohorts: 개념 예제 수 설정
    """

    def __init__(self, config: DatasetConfig, cohorts: Optional[CohortConfig] = None):
        self.config = config
        self.cohorts = cohorts or CohortConfig()
        self.class_names = list(config.classes)
        self.size = config.image_size
        self.tag_specs = {
            letter: TagSpec.canonical(letter, self.size, tuple(config.tag_side_range)) for letter in TAG_COLORS
        }

    def _rng(self, *stream: int) -> np.random.Generator:
        return np.random.default_rng([self.config.seed, *stream])

    def _render(self, split: int, class_index: int, i: int) -> np.ndarray:
        return render_entity(self.class_names[class_index], self._rng(split, class_index, i), self.size)

    def _stamp(self, image: np.ndarray, letter: str, *stream: int) -> Tuple[np.ndarray, TagAnnotation]:
        return apply_tag(image, self.tag_specs[letter], self._rng(*stream))

    def _untagged(self, name: str, split: int, per_class: int) -> Dataset:
        images, labels = [], []
        for c in range(len(self.class_names)):
            for i in range(per_class):
                images.append(self._render(split, c, i))
                labels.append(c)
        return Dataset(
            name=name,
            images=np.stack(images),
            labels=np.asarray(labels),
            annotations=[None] * len(images),
            class_names=list(self.class_names),
        )

    # ------------------------------------------------------------------
    # 데이터셋 패밀리
    # ------------------------------------------------------------------

    def tagged_indices(self, class_index: int, fraction: float) -> np.ndarray:
        """정규 태그가 찍힐 학습 이미지 인덱스 (비율이 커질수록 포함 관계 유지)"""
        n = self.config.train_per_class
        order = self._rng(ORDER_TAGGED, class_index).permutation(n)
        return np.sort(order[: int(round(fraction * n))])

    def build_train_set(self, fraction: float, base: Optional[List[np.ndarray]] = None) -> Dataset:
        """
        태그 비율 p 학습 세트

        클래스마다 round(p × n) 장에 정규 태그를 찍습니다. 같은 인덱스의 이미지는
        어떤 비율에서도 동일한 엔티티 렌더링과 동일한 태그 위치를 가집니다.
        """
        n = self.config.train_per_class
        images: List[np.ndarray] = []
        labels: List[int] = []
        annotations: List[Optional[TagAnnotation]] = []
        for c, class_name in enumerate(self.class_names):
            tagged = set(self.tagged_indices(c, fraction).tolist())
            letter = CANONICAL_TAGS[class_name]
            for i in range(n):
                image = base[c * n + i] if base is not None else self._render(SPLIT_TRAIN, c, i)
                if i in tagged:
                    image, ann = self._stamp(image, letter, STAMP_TRAIN, c, i)
                else:
                    ann = None
                images.append(image)
                labels.append(c)
                annotations.append(ann)
        dataset = Dataset(
            name=fraction_dirname(fraction),
            images=np.stack(images),
            labels=np.asarray(labels),
            annotations=annotations,
            class_names=list(self.class_names),
        )
        logger.debug("학습 세트 생성: p=%.2f, 이미지 %d장, 태그 %d장", fraction, len(dataset), dataset.tagged_count())
        return dataset

    def build_swapped_set(self) -> Dataset:
        """클래스마다 교환 태그가 찍힌 테스트 세트"""
        images, labels, annotations = [], [], []
        for c, class_name in enumerate(self.class_names):
            letter = SWAPPED_TAGS[class_name]
            for i in range(self.config.swapped_per_class):
                image, ann = self._stamp(self._render(SPLIT_SWAPPED, c, i), letter, STAMP_SWAPPED, c, i)
                images.append(image)
                labels.append(c)
                annotations.append(ann)
        return Dataset(
            name="swapped",
            images=np.stack(images),
            labels=np.asarray(labels),
            annotations=annotations,
            class_names=list(self.class_names),
        )

    def build_holdout_set(self) -> Dataset:
        """태그 없는 검증 세트"""
        return self._untagged("holdout", SPLIT_HOLDOUT, self.config.holdout_per_class)

    def concept_pool_layout(self) -> Tuple[int, int]:
        """
        개념 예제 풀의 클래스당 (학습 영역 크기, held-out 영역 크기)

        학습 영역은 positive 와 다른 클래스 개념의 negative 몫을 모두 담을 수 있어야 합니다.
        """
        others = max(len(self.class_names) - 1, 1)
        train_region = max(self.cohorts.concept_positives, math.ceil(self.cohorts.entity_negatives / others))
        heldout_region = self.cohorts.heldout_concept
        return train_region, heldout_region

    def build_family(self) -> DatasetFamily:
        """
        데이터셋 패밀리 생성

        Returns:
            DatasetFamily: 비율별 학습 세트, 태그 없는 holdout, 교환 태그 swapped,
            개념 예제 전용 concept_pool (모두 서로 다른 rng 스트림에서 생성)
        """
        fractions = sorted(self.config.tag_fractions)
        logger.info(
            "데이터셋 패밀리 생성 시작: classes=%s, size=%d, fractions=%s, seed=%d",
            self.class_names,
            self.size,
            fractions,
            self.config.seed,
        )
        n = self.config.train_per_class
        base = [self._render(SPLIT_TRAIN, c, i) for c in range(len(self.class_names)) for i in range(n)]
        train = {p: self.build_train_set(p, base) for p in fractions}
        holdout = self.build_holdout_set()
        swapped = self.build_swapped_set()
        train_region, heldout_region = self.concept_pool_layout()
        concept_pool = self._untagged("concept_pool", SPLIT_CONCEPT, train_region + heldout_region)
        family = DatasetFamily(
            train=train,
            holdout=holdout,
            swapped=swapped,
            concept_pool=concept_pool,
            class_names=list(self.class_names),
            image_size=self.size,
            seed=self.config.seed,
            tag_side_fraction=tuple(self.config.tag_side_range),
        )
        logger.info(
            "데이터셋 패밀리 생성 완료: train %d세트, holdout %d장, swapped %d장, concept_pool %d장",
            len(train),
            len(holdout),
            len(swapped),
            len(concept_pool),
        )
        return family

    # ------------------------------------------------------------------
    # 개념 예제 세트
    # ------------------------------------------------------------------

    def _pool_regions(self, pool: Dataset) -> Dict[int, Tuple[np.ndarray, np.ndarray]]:
        train_region, heldout_region = self.concept_pool_layout()
        regions = {}
        for c in range(len(self.class_names)):
            idx = pool.class_indices(c)
            if len(idx) < train_region + heldout_region:
                raise ValidationError(
                    f"concept_pool 의 '{self.class_names[c]}' 이미지가 부족합니다: {len(idx)}장",
                    field_name="concept_pool",
                    validation_rule="pool_size",
                )
            regions[c] = (idx[:train_region], idx[train_region : train_region + heldout_region])
        return regions

    @staticmethod
    def _interleave(groups: List[np.ndarray], count: int) -> np.ndarray:
        """클래스별 인덱스 목록을 번갈아 취해 count 개를 고름"""
        picked: List[int] = []
        depth = max((len(g) for g in groups), default=0)
        for j in range(depth):
            for g in groups:
                if j < len(g):
                    picked.append(int(g[j]))
                    if len(picked) == count:
                        return np.asarray(picked)
        return np.asarray(picked)

    def entity_examples(self, pool: Dataset, class_index: int) -> ConceptExamples:
        """엔티티 개념: positive = 해당 클래스, negative = 다른 클래스 (held-out 분리)"""
        regions = self._pool_regions(pool)
        cohorts = self.cohorts
        others = [c for c in range(len(self.class_names)) if c != class_index]
        train_idx, heldout_idx = regions[class_index]
        negatives = self._interleave([regions[c][0] for c in others], cohorts.entity_negatives)
        heldout_negatives = self._interleave([regions[c][1] for c in others], cohorts.heldout_concept)
        return ConceptExamples(
            concept=self.class_names[class_index],
            kind="entity",
            positives=pool.images[train_idx[: cohorts.concept_positives]],
            negatives=pool.images[negatives],
            heldout_positives=pool.images[heldout_idx],
            heldout_negatives=pool.images[heldout_negatives],
        )

    def tag_examples(self, pool: Dataset, letter: str) -> ConceptExamples:
        """
        태그 개념: positive = 랜덤 노이즈 배경 + 태그,
        negative = 다른 두 태그가 찍힌 클래스 이미지
        """
        cohorts = self.cohorts
        tag_index = TAG_LETTERS.index(letter)
        other_letters = [t for t in TAG_LETTERS if t != letter]

        def positives(start: int, count: int) -> Tuple[List[np.ndarray], List[TagAnnotation]]:
            images, annotations = [], []
            for i in range(start, start + count):
                background = quantize(uniform_noise_image(self._rng(SPLIT_TAG_NOISE, tag_index, i), self.size))
                image, ann = self._stamp(background, letter, STAMP_TAG_POSITIVE, tag_index, i)
                images.append(image)
                annotations.append(ann)
            return images, annotations

        regions = self._pool_regions(pool)
        classes = list(range(len(self.class_names)))

        def negatives(indices: np.ndarray, offset: int) -> List[np.ndarray]:
            images = []
            for j, idx in enumerate(indices):
                other = other_letters[(offset + j) % len(other_letters)]
                image, _ = self._stamp(pool.images[idx], other, STAMP_TAG_NEGATIVE, tag_index, offset + j)
                images.append(image)
            return images

        pos, pos_ann = positives(0, cohorts.concept_positives)
        held_pos, _ = positives(cohorts.concept_positives, cohorts.heldout_concept)
        neg_idx = self._interleave([regions[c][0] for c in classes], cohorts.tag_negatives)
        held_idx = self._interleave([regions[c][1] for c in classes], cohorts.heldout_concept)
        return ConceptExamples(
            concept=tag_concept_id(letter),
            kind="tag",
            positives=np.stack(pos),
            negatives=np.stack(negatives(neg_idx, 0)),
            heldout_positives=np.stack(held_pos),
            heldout_negatives=np.stack(negatives(held_idx, len(neg_idx))),
            positive_annotations=list(pos_ann),
        )

    def concept_example_sets(self, family: DatasetFamily) -> ConceptExampleSets:
        """엔티티 3개 + 태그 3개 개념의 예제 세트"""
        pool = family.concept_pool
        entity = {name: self.entity_examples(pool, c) for c, name in enumerate(self.class_names)}
        tag = {tag_concept_id(letter): self.tag_examples(pool, letter) for letter in TAG_LETTERS}
        log_step(logger, "concept_example_sets", f"entity={list(entity)}, tag={list(tag)}")
        return ConceptExampleSets(entity=entity, tag=tag)

    def random_pool(self, family: DatasetFamily) -> np.ndarray:
        """TCAV 랜덤 negative 풀: 태그 없는 concept_pool 전체"""
        return family.concept_pool.images


def build_family(config: DatasetConfig, cohorts: Optional[CohortConfig] = None) -> DatasetFamily:
    return SyntheticDataService(config, cohorts).build_family()
