"""
합성 데이터셋 모델

태그 명세(TagSpec), 태그 주석, 데이터셋, 데이터셋 패밀리, 개념 예제 세트를 정의합니다.

색상 값은 모두 k/255 로 양자화되어 있어 PNG 저장/로드 후에도 값이 정확히 보존됩니다.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

# 로깅 설정
logger = logging.getLogger(__name__)

Color = Tuple[float, float, float]
Box = Tuple[int, int, int, int]  # (y0, x0, y1, x1), 끝 좌표는 exclusive

PURPLE: Color = (128 / 255, 0.0, 128 / 255)
MAGENTA: Color = (1.0, 0.0, 1.0)
CYAN: Color = (0.0, 1.0, 1.0)
WHITE: Color = (1.0, 1.0, 1.0)
RESERVED_COLORS: Tuple[Color, ...] = (PURPLE, MAGENTA, CYAN)

# 클래스 -> 정규 태그 / 교환 태그
CANONICAL_TAGS: Dict[str, str] = {"cucumber": "C", "taxi": "T", "zebra": "Z"}
SWAPPED_TAGS: Dict[str, str] = {"cucumber": "T", "taxi": "Z", "zebra": "C"}
TAG_COLORS: Dict[str, Color] = {"Z": PURPLE, "T": MAGENTA, "C": CYAN}


@dataclass(frozen=True)
class TagSpec:
    """
    태그 명세: 색 사각형 안의 글자

    Attributes:
        letter: "Z" | "T" | "C"
        fill_color: 사각형 색
        glyph_color: 글자 색
        side_range: 한 변 픽셀 범위 (양 끝 포함)
        margin: 이미지 경계로부터 최소 여백 (픽셀)
    """

    letter: str
    fill_color: Color
    glyph_color: Color = WHITE
    side_range: Tuple[int, int] = (10, 19)
    margin: int = 0

    def __post_init__(self):
        low, high = self.side_range
        if low < 1 or high < low:
            raise ValueError(f"잘못된 side_range: {self.side_range}")
        if self.margin < 0:
            raise ValueError(f"margin 은 0 이상이어야 합니다: {self.margin}")

    @classmethod
    def canonical(cls, letter: str, image_size: int, side_fraction: Tuple[float, float] = (0.15, 0.30)) -> "TagSpec":
        """정규 태그 (Z→보라, T→마젠타, C→시안), 한 변은 이미지 크기 비율로 결정"""
        if letter not in TAG_COLORS:
            raise ValueError(f"알 수 없는 태그: {letter}")
        low = max(int(round(side_fraction[0] * image_size)), 1)
        high = max(int(round(side_fraction[1] * image_size)), low)
        return cls(letter=letter, fill_color=TAG_COLORS[letter], side_range=(low, high))


@dataclass(frozen=True)
class TagAnnotation:
    """이미지에 찍힌 태그의 ground truth"""

    tag: str
    box: Box

    def to_dict(self) -> Dict[str, object]:
        return {"tag": self.tag, "box": list(self.box)}


@dataclass
class Dataset:
    """
    이미지 데이터셋

    Attributes:
        images: (N, H, W, 3) float64, 값 범위 [0, 1]
        labels: (N,) 정수 클래스 인덱스
        annotations: 이미지별 태그 주석 (없으면 None)
        class_names: 라벨 인덱스 순서의 클래스 이름
        ids: 이미지 식별자 (매니페스트 경로 stem)
    """

    name: str
    images: np.ndarray
    labels: np.ndarray
    annotations: List[Optional[TagAnnotation]]
    class_names: List[str]
    ids: List[str] = field(default_factory=list)

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.images.ndim != 4 or self.images.shape[-1] != 3:
            raise ValueError(f"images 는 (N, H, W, 3) 이어야 합니다: {self.images.shape}")
        n = self.images.shape[0]
        if self.labels.shape != (n,) or len(self.annotations) != n:
            raise ValueError("images / labels / annotations 길이가 다릅니다")
        if n and (self.labels.min() < 0 or self.labels.max() >= len(self.class_names)):
            raise ValueError("레이블이 클래스 범위를 벗어났습니다")
        if not self.ids:
            self.ids = [f"{self.name}_{i:05d}" for i in range(n)]
        elif len(self.ids) != n:
            raise ValueError("ids 길이가 이미지 수와 다릅니다")

    def __len__(self) -> int:
        return int(self.images.shape[0])

    @property
    def image_shape(self) -> Tuple[int, int, int]:
        return tuple(self.images.shape[1:])

    def subset(self, indices: Sequence[int], name: Optional[str] = None) -> "Dataset":
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(
            name=name or self.name,
            images=self.images[idx],
            labels=self.labels[idx],
            annotations=[self.annotations[i] for i in idx],
            class_names=list(self.class_names),
            ids=[self.ids[i] for i in idx],
        )

    def class_indices(self, class_index: int) -> np.ndarray:
        return np.flatnonzero(self.labels == class_index)

    def of_class(self, class_index: int) -> "Dataset":
        return self.subset(self.class_indices(class_index), name=f"{self.name}_{self.class_names[class_index]}")

    def with_tag(self, tag: str) -> "Dataset":
        idx = [i for i, ann in enumerate(self.annotations) if ann is not None and ann.tag == tag]
        return self.subset(idx, name=f"{self.name}_tag{tag}")

    def tagged_count(self) -> int:
        return sum(ann is not None for ann in self.annotations)

    def per_class_counts(self) -> List[int]:
        return np.bincount(self.labels, minlength=len(self.class_names)).tolist()


@dataclass
class ConceptExamples:
    """개념 하나의 예제 이미지 (positive / negative / held-out)"""

    concept: str
    kind: str  # "entity" | "tag"
    positives: np.ndarray
    negatives: np.ndarray
    heldout_positives: np.ndarray
    heldout_negatives: np.ndarray
    positive_annotations: List[Optional[TagAnnotation]] = field(default_factory=list)

    def __post_init__(self):
        if self.kind not in ("entity", "tag"):
            raise ValueError(f"알 수 없는 개념 종류: {self.kind}")
        if len(self.positives) == 0 or len(self.negatives) == 0:
            raise ValueError(f"개념 '{self.concept}'의 예제 세트가 비어 있습니다")


@dataclass
class DatasetFamily:
    """
    태그 비율별 학습 세트와 공유 평가 세트

    Attributes:
        train: tag fraction -> 학습 세트
        holdout: 태그 없는 검증 세트
        swapped: 교환 태그 테스트 세트
        concept_pool: 개념 예제 전용 태그 없는 이미지 (다른 세트와 분리)
    """

    train: Dict[float, Dataset]
    holdout: Dataset
    swapped: Dataset
    concept_pool: Dataset
    class_names: List[str]
    image_size: int
    seed: int
    tag_side_fraction: Tuple[float, float] = (0.15, 0.30)

    def fractions(self) -> List[float]:
        return sorted(self.train)

    def all_sets(self) -> Dict[str, Dataset]:
        sets = {fraction_dirname(p): ds for p, ds in sorted(self.train.items())}
        sets.update({"holdout": self.holdout, "swapped": self.swapped, "concept_pool": self.concept_pool})
        return sets


@dataclass
class ConceptExampleSets:
    """엔티티/태그 개념 예제 세트 모음"""

    entity: Dict[str, ConceptExamples]
    tag: Dict[str, ConceptExamples]

    def all(self) -> Dict[str, ConceptExamples]:
        merged = dict(self.entity)
        merged.update(self.tag)
        return merged


def fraction_dirname(fraction: float) -> str:
    """tag fraction -> 디렉토리 이름 (예: 0.25 -> train_p025)"""
    return f"train_p{int(round(fraction * 100)):03d}"


def tag_concept_id(letter: str) -> str:
    """태그 개념 id (예: "Z" -> "tag_Z")"""
    return f"tag_{letter}"
