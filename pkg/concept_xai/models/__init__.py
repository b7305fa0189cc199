"""
Data models module

구조 명세, 체크포인트, 데이터셋, 설명 도메인 값 객체, 실험 리포트 모델을 정의합니다.
"""

# 구조 / 체크포인트
from .architecture import ArchitectureSpec, LayerSpec, validation_architecture
from .checkpoint import Checkpoint, TrainingMetadata

# 데이터셋
from .dataset import (
    CANONICAL_TAGS,
    RESERVED_COLORS,
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

# 설명 도메인
from .domain import (
    Cav,
    ConceptAttribution,
    ConceptLayerArtifact,
    ConceptMap,
    GlobalAttribution,
    LayerIg,
    NormalizationRange,
    NormalizedConceptMap,
    NormalizedLayerIg,
    NormalizedPooledCav,
    PooledCav,
    TcavResult,
)

# 리포트
from .report import (
    AccuracyRow,
    AttributionRow,
    CorrelationStat,
    ExperimentReport,
    GlobalAttributionRow,
    LocalAttributionRow,
    Provenance,
    ResidualStat,
    TcavRow,
    TrendCheck,
)

__all__ = [
    # Architecture / checkpoint
    "ArchitectureSpec",
    "LayerSpec",
    "validation_architecture",
    "Checkpoint",
    "TrainingMetadata",
    # Dataset
    "CANONICAL_TAGS",
    "RESERVED_COLORS",
    "SWAPPED_TAGS",
    "TAG_COLORS",
    "ConceptExamples",
    "ConceptExampleSets",
    "Dataset",
    "DatasetFamily",
    "TagAnnotation",
    "TagSpec",
    "fraction_dirname",
    "tag_concept_id",
    # Domain
    "Cav",
    "ConceptAttribution",
    "ConceptLayerArtifact",
    "ConceptMap",
    "GlobalAttribution",
    "LayerIg",
    "NormalizationRange",
    "NormalizedConceptMap",
    "NormalizedLayerIg",
    "NormalizedPooledCav",
    "PooledCav",
    "TcavResult",
    # Report
    "AccuracyRow",
    "AttributionRow",
    "CorrelationStat",
    "ExperimentReport",
    "GlobalAttributionRow",
    "LocalAttributionRow",
    "Provenance",
    "ResidualStat",
    "TcavRow",
    "TrendCheck",
]
