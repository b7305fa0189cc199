"""
체크포인트 / 학습 메타데이터 모델
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np

from ..engine import ComputeGraph
from .architecture import ArchitectureSpec

# 로깅 설정
logger = logging.getLogger(__name__)


@dataclass
class TrainingMetadata:
    """학습 메타데이터"""

    seed: int
    epochs: int
    learning_rate: float
    momentum: float
    batch_size: int
    final_train_accuracy: float = 0.0
    final_val_accuracy: float = 0.0
    loss_history: List[float] = field(default_factory=list)
    model_id: str = "model"
    extra: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        for name in ("final_train_accuracy", "final_val_accuracy"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} 는 [0, 1] 범위여야 합니다: {value}")

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "TrainingMetadata":
        return cls(**data)


@dataclass
class Checkpoint:
    """
    학습된 모델: 구조 + 파라미터 + 메타데이터

    파라미터는 학습 이후 불변이며 freeze() 로 읽기 전용 플래그가 설정됩니다.
    여러 설명 작업이 파라미터를 공유할 때는 작업마다 build_graph() 로 새 그래프를 만듭니다.
    """

    architecture: ArchitectureSpec
    params: Dict[str, np.ndarray]
    metadata: TrainingMetadata
    _graph: Optional[ComputeGraph] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        expected = self.architecture.param_shapes()
        if set(expected) != set(self.params):
            raise ValueError(
                f"파라미터 이름이 구조와 다릅니다: 누락={sorted(set(expected) - set(self.params))}, "
                f"초과={sorted(set(self.params) - set(expected))}"
            )

    @property
    def model_id(self) -> str:
        return self.metadata.model_id

    @property
    def num_classes(self) -> int:
        return self.architecture.num_classes

    def freeze(self) -> "Checkpoint":
        """파라미터 배열을 읽기 전용으로 설정"""
        for value in self.params.values():
            value.flags.writeable = False
        return self

    def build_graph(self) -> ComputeGraph:
        """파라미터를 공유하는 새 그래프 (작업 단위 전용)"""
        return self.architecture.build_graph(self.params)

    @property
    def graph(self) -> ComputeGraph:
        """단일 스레드 사용을 위한 캐시된 그래프"""
        if self._graph is None:
            self._graph = self.build_graph()
        return self._graph

    def parameter_count(self) -> int:
        return int(sum(value.size for value in self.params.values()))
