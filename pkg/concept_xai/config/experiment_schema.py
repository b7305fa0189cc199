"""
실험 설정 스키마 (Pydantic v2)

YAML 실험 설정 파일의 구조와 자료형을 검증하기 위한 모델 정의입니다.
모든 모델은 extra="forbid" 로 정의되어 알 수 없는 키가 있으면 로드 단계에서 거부됩니다.
"""

from __future__ import annotations

from typing import List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

# 렌더러가 지원하는 엔티티 클래스 (라벨 순서 = 인덱스)
KNOWN_ENTITIES = ("cucumber", "taxi", "zebra")
CANONICAL_TAG_FRACTIONS = (0.0, 0.25, 0.5, 0.75, 1.0)


class _StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


class DatasetConfig(_StrictModel):
    """합성 데이터셋 설정"""

    classes: List[str] = Field(default_factory=lambda: list(KNOWN_ENTITIES), description="엔티티 렌더러 id 목록")
    image_size: int = Field(default=64, ge=16, description="정사각 이미지 한 변 (픽셀)")
    train_per_class: int = Field(default=600, ge=1, description="클래스당 학습 이미지 수")
    holdout_per_class: int = Field(default=200, ge=1, description="클래스당 태그 없는 검증 이미지 수")
    swapped_per_class: int = Field(default=200, ge=1, description="클래스당 태그 교환 테스트 이미지 수")
    tag_fractions: List[float] = Field(default_factory=lambda: list(CANONICAL_TAG_FRACTIONS))
    tag_side_range: Tuple[float, float] = Field(default=(0.15, 0.30), description="태그 한 변 / 이미지 한 변 범위")
    seed: int = Field(default=0, ge=0)

    @field_validator("classes")
    @classmethod
    def validate_classes(cls, value: List[str]) -> List[str]:
        unknown = [name for name in value if name not in KNOWN_ENTITIES]
        if unknown:
            raise ValueError(f"지원되지 않는 엔티티: {unknown} (지원: {list(KNOWN_ENTITIES)})")
        if len(set(value)) != len(value) or len(value) < 2:
            raise ValueError("classes 는 중복 없는 2개 이상의 엔티티여야 합니다")
        return value

    @field_validator("tag_fractions")
    @classmethod
    def validate_fractions(cls, value: List[float]) -> List[float]:
        if not value:
            raise ValueError("tag_fractions 가 비어있습니다")
        bad = [p for p in value if not 0.0 <= p <= 1.0]
        if bad:
            raise ValueError(f"tag fraction은 [0, 1] 범위여야 합니다: {bad}")
        if len(set(value)) != len(value):
            raise ValueError("tag_fractions 에 중복 값이 있습니다")
        return value

    @field_validator("tag_side_range")
    @classmethod
    def validate_side_range(cls, value: Tuple[float, float]) -> Tuple[float, float]:
        low, high = value
        if not 0.0 < low <= high < 1.0:
            raise ValueError(f"tag_side_range 는 0 < low <= high < 1 이어야 합니다: {value}")
        return value


class ArchitectureConfig(_StrictModel):
    """검증용 CNN 구조 설정 (conv 6개 + GAP + dense)"""

    conv_channels: List[int] = Field(default_factory=lambda: [16, 16, 32, 32, 64, 64])
    kernel_size: int = Field(default=3, ge=1)
    pool_after: List[int] = Field(default_factory=lambda: [2, 4], description="maxpool을 둘 conv 번호 (1부터)")
    use_bias: bool = True

    @field_validator("conv_channels")
    @classmethod
    def validate_channels(cls, value: List[int]) -> List[int]:
        if not value or any(c <= 0 for c in value):
            raise ValueError("conv_channels 는 양의 정수 목록이어야 합니다")
        return value

    @model_validator(mode="after")
    def validate_pool_positions(self) -> "ArchitectureConfig":
        n_conv = len(self.conv_channels)
        bad = [p for p in self.pool_after if not 1 <= p < n_conv]
        if bad:
            raise ValueError(f"pool_after 위치가 conv 범위를 벗어났습니다: {bad}")
        return self


class TrainConfig(_StrictModel):
    """SGD + momentum 학습 설정"""

    learning_rate: float = Field(default=0.01, gt=0)
    momentum: float = Field(default=0.9, gt=0, lt=1)
    batch_size: int = Field(default=32, ge=1)
    epochs: int = Field(default=30, ge=1)
    seed: int = Field(default=0, ge=0)


class CohortConfig(_StrictModel):
    """개념 예제 / 평가 이미지 수"""

    concept_positives: int = Field(default=120, ge=1)
    entity_negatives: int = Field(default=500, ge=1)
    tag_negatives: int = Field(default=120, ge=1)
    class_images: int = Field(default=200, ge=1)
    heldout_concept: int = Field(default=30, ge=1, description="개념 맵 판별력 확인용 held-out 예제 수")
    tcav_runs: int = Field(default=10, ge=2)
    tcav_pool_size: int = Field(default=50, ge=1)


class ExplainConfig(_StrictModel):
    """설명 생성 설정"""

    ig_steps: int = Field(default=300, ge=2)
    convergence_steps: int = Field(
        default=3000, ge=2, description="completeness residual 수렴 확인에 쓰는 더 조밀한 적분 step 수"
    )
    layers: Optional[List[str]] = Field(
        default=None, description="None이면 설명 가능한 모든 conv 레이어 (검증 실험은 그중 마지막 레이어)"
    )
    topk: int = Field(default=3, ge=1)
    overlay_alpha: float = Field(default=0.5, ge=0, le=1)


class ExperimentConfig(_StrictModel):
    """실험 설정 루트 모델"""

    name: str = Field(default="validation", min_length=1)
    seed: int = Field(default=0, ge=0)
    dataset: DatasetConfig = Field(default_factory=DatasetConfig)
    architecture: ArchitectureConfig = Field(default_factory=ArchitectureConfig)
    train: TrainConfig = Field(default_factory=TrainConfig)
    cohorts: CohortConfig = Field(default_factory=CohortConfig)
    explain: ExplainConfig = Field(default_factory=ExplainConfig)
    output_dir: str = Field(default="outputs/validation", min_length=1)

    def with_seed(self, seed: int) -> "ExperimentConfig":
        """모든 하위 seed를 덮어쓴 사본"""
        return self.model_copy(
            update={
                "seed": seed,
                "dataset": self.dataset.model_copy(update={"seed": seed}),
                "train": self.train.model_copy(update={"seed": seed}),
            }
        )


__all__ = [
    "KNOWN_ENTITIES",
    "CANONICAL_TAG_FRACTIONS",
    "DatasetConfig",
    "ArchitectureConfig",
    "TrainConfig",
    "CohortConfig",
    "ExplainConfig",
    "ExperimentConfig",
    "ValidationError",
]
