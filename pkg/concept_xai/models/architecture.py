"""
CNN 구조 정의

ArchitectureSpec 은 레이어 기술자 목록을 담는 pydantic 모델입니다.
체크포인트 헤더에는 이 모델의 JSON 덤프(키 정렬)가 그대로 기록됩니다.

그래프 구성 규칙:
- conv 레이어 "<name>" 는 conv2d 노드 "<name>/preact" 와 relu 노드 "<name>" 로 전개되고,
  설명 대상(캡처/치환 가능) 노드는 활성화 이후의 "<name>" 입니다.
- 파라미터 이름은 "<name>/kernel", "<name>/bias" (dense는 "<name>/weights", "<name>/bias") 입니다.
"""

from __future__ import annotations

import logging
from typing import Dict, List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from ..engine import ComputeGraph, conv_output_geometry
from ..engine.ops import DTYPE

# 로깅 설정
logger = logging.getLogger(__name__)

VALIDATION_CONV_COUNT = 6


class LayerSpec(BaseModel):
    """레이어 기술자"""

    model_config = ConfigDict(extra="forbid")

    kind: Literal["conv", "maxpool", "gap", "dense"]
    name: str = Field(..., min_length=1)
    out_channels: Optional[int] = Field(default=None, ge=1)
    kernel_size: int = Field(default=3, ge=1)
    stride: int = Field(default=1, ge=1)
    padding: Literal["same", "valid"] = "same"
    activation: Optional[Literal["relu"]] = "relu"
    size: int = Field(default=2, ge=1, description="maxpool 윈도우")
    units: Optional[int] = Field(default=None, ge=1, description="dense 출력 수")

    @model_validator(mode="after")
    def validate_kind_fields(self) -> "LayerSpec":
        if self.kind == "conv" and self.out_channels is None:
            raise ValueError(f"conv 레이어 '{self.name}'에 out_channels 가 필요합니다")
        if self.kind == "dense" and self.units is None:
            raise ValueError(f"dense 레이어 '{self.name}'에 units 가 필요합니다")
        return self


class ArchitectureSpec(BaseModel):
    """
    CNN 구조 명세

    Attributes:
        input_shape: (H, W, C)
        num_classes: 클래스 수 (dense 헤드 출력 수와 같아야 함)
        layers: 순서가 있는 레이어 기술자
        use_bias: conv/dense bias 사용 여부
        class_names: 라벨 인덱스 순서의 클래스 이름 (선택)
    """

    model_config = ConfigDict(extra="forbid")

    name: str = "cnn"
    input_shape: Tuple[int, int, int]
    num_classes: int = Field(..., ge=1)
    layers: List[LayerSpec]
    use_bias: bool = True
    class_names: List[str] = Field(default_factory=list)

    @model_validator(mode="after")
    def validate_layers(self) -> "ArchitectureSpec":
        names = [layer.name for layer in self.layers]
        duplicated = sorted({n for n in names if names.count(n) > 1})
        if duplicated:
            raise ValueError(f"레이어 이름이 중복되었습니다: {duplicated}")
        if "input" in names:
            raise ValueError("'input' 은 예약된 레이어 이름입니다")
        if not self.layers or self.layers[-1].kind != "dense":
            raise ValueError("마지막 레이어는 dense 분류 헤드여야 합니다")
        if self.layers[-1].units != self.num_classes:
            raise ValueError(
                f"헤드 출력 수({self.layers[-1].units})와 num_classes({self.num_classes})가 다릅니다"
            )
        if self.class_names and len(self.class_names) != self.num_classes:
            raise ValueError(f"class_names 길이({len(self.class_names)})가 num_classes({self.num_classes})와 다릅니다")
        # 공간 shape 계산으로 기하 검증
        self.layer_shapes()
        return self

    # ------------------------------------------------------------------
    # shape 계산
    # ------------------------------------------------------------------

    def layer_shapes(self) -> Dict[str, Tuple[int, ...]]:
        """레이어별 출력 shape (배치 축 제외)"""
        h, w, c = self.input_shape
        shapes: Dict[str, Tuple[int, ...]] = {}
        flat: Optional[int] = None
        for layer in self.layers:
            if layer.kind == "conv":
                if flat is not None:
                    raise ValueError(f"conv 레이어 '{layer.name}'는 공간 입력이 필요합니다")
                h, _, _ = conv_output_geometry(h, layer.kernel_size, layer.stride, layer.padding)
                w, _, _ = conv_output_geometry(w, layer.kernel_size, layer.stride, layer.padding)
                c = layer.out_channels
                shapes[layer.name] = (h, w, c)
            elif layer.kind == "maxpool":
                if layer.size > h or layer.size > w:
                    raise ValueError(f"maxpool '{layer.name}' 윈도우가 입력({h}x{w})보다 큽니다")
                h = (h - layer.size) // layer.size + 1
                w = (w - layer.size) // layer.size + 1
                shapes[layer.name] = (h, w, c)
            elif layer.kind == "gap":
                flat = c
                shapes[layer.name] = (c,)
            else:
                flat = layer.units
                shapes[layer.name] = (layer.units,)
        return shapes

    def explainable_layers(self) -> List[str]:
        """설명 대상 레이어 (conv 레이어, H×W×K 출력)"""
        return [layer.name for layer in self.layers if layer.kind == "conv"]

    @property
    def logits_layer(self) -> str:
        return self.layers[-1].name

    def is_validation_layout(self) -> bool:
        """conv 6개 뒤에 GAP, dense 헤드가 오는 검증용 배치인지"""
        kinds = [layer.kind for layer in self.layers if layer.kind != "maxpool"]
        return kinds == ["conv"] * VALIDATION_CONV_COUNT + ["gap", "dense"]

    def class_label(self, index: int) -> str:
        if 0 <= index < len(self.class_names):
            return self.class_names[index]
        if self.num_classes == 1 and index == 1:
            # 단일 logit 헤드의 암묵적 반대 클래스
            return f"not {self.class_label(0)}"
        return str(index)

    def head_mode(self) -> str:
        """multiclass | binary (출력 1개: logit 클래스 / 여집합, 출력 2개: 클래스 0 / 1)"""
        return "binary" if self.num_classes <= 2 else "multiclass"

    # ------------------------------------------------------------------
    # 파라미터 / 그래프
    # ------------------------------------------------------------------

    def param_shapes(self) -> Dict[str, Tuple[int, ...]]:
        """파라미터 이름 -> shape (그래프 구성 순서)"""
        shapes: Dict[str, Tuple[int, ...]] = {}
        channels = self.input_shape[2]
        features: Optional[int] = None
        for layer in self.layers:
            if layer.kind == "conv":
                k = layer.kernel_size
                shapes[f"{layer.name}/kernel"] = (k, k, channels, layer.out_channels)
                if self.use_bias:
                    shapes[f"{layer.name}/bias"] = (layer.out_channels,)
                channels = layer.out_channels
            elif layer.kind == "gap":
                features = channels
            elif layer.kind == "dense":
                if features is None:
                    features = int(np.prod(self.layer_shapes()[self._previous(layer.name)]))
                shapes[f"{layer.name}/weights"] = (features, layer.units)
                if self.use_bias:
                    shapes[f"{layer.name}/bias"] = (layer.units,)
                features = layer.units
        return shapes

    def _previous(self, name: str) -> str:
        names = [layer.name for layer in self.layers]
        position = names.index(name)
        return names[position - 1] if position > 0 else "input"

    def init_params(self, seed: int) -> Dict[str, np.ndarray]:
        """He 초기화 (seed 고정), bias는 0"""
        rng = np.random.default_rng(seed)
        params: Dict[str, np.ndarray] = {}
        for name, shape in self.param_shapes().items():
            if name.endswith("/bias"):
                params[name] = np.zeros(shape, dtype=DTYPE)
                continue
            fan_in = int(np.prod(shape[:-1]))
            params[name] = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=shape).astype(DTYPE)
        return params

    def build_graph(self, params: Dict[str, np.ndarray]) -> ComputeGraph:
        """파라미터를 바인딩한 ComputeGraph 생성"""
        expected = self.param_shapes()
        missing = sorted(set(expected) - set(params))
        if missing:
            raise ValueError(f"파라미터가 누락되었습니다: {missing}")
        for name, shape in expected.items():
            if tuple(params[name].shape) != tuple(shape):
                raise ValueError(f"파라미터 '{name}' shape 불일치: {params[name].shape} != {shape}")

        graph = ComputeGraph({name: params[name] for name in expected})
        graph.add_input("input")
        previous = "input"
        spatial = True
        for layer in self.layers:
            bias = [f"{layer.name}/bias"] if self.use_bias else []
            if layer.kind == "conv":
                attrs = {"stride": layer.stride, "padding": layer.padding}
                if layer.activation == "relu":
                    graph.add_node(f"{layer.name}/preact", "conv2d", [previous], [f"{layer.name}/kernel"] + bias, attrs)
                    graph.add_node(layer.name, "relu", [f"{layer.name}/preact"], capturable=True)
                else:
                    graph.add_node(layer.name, "conv2d", [previous], [f"{layer.name}/kernel"] + bias, attrs, capturable=True)
            elif layer.kind == "maxpool":
                graph.add_node(layer.name, "maxpool2d", [previous], attrs={"size": layer.size, "stride": layer.size})
            elif layer.kind == "gap":
                graph.add_node(layer.name, "gap", [previous])
                spatial = False
            else:
                if spatial:
                    graph.add_node(f"{layer.name}/flatten", "flatten", [previous])
                    previous = f"{layer.name}/flatten"
                    spatial = False
                graph.add_node(layer.name, "dense", [previous], [f"{layer.name}/weights"] + bias)
            previous = layer.name
        return graph


def validation_architecture(
    conv_channels: List[int],
    image_size: int = 64,
    num_classes: int = 3,
    kernel_size: int = 3,
    pool_after: Optional[List[int]] = None,
    use_bias: bool = True,
    name: str = "validation-cnn",
    class_names: Optional[List[str]] = None,
) -> ArchitectureSpec:
    """
    검증용 구조 생성: conv(same, relu) 블록 + maxpool + GAP + dense(logits)

    Args:
        conv_channels: conv 레이어별 출력 채널 (기본 실험은 [16, 16, 32, 32, 64, 64])
        pool_after: 해당 번호(1부터) conv 뒤에 2×2 maxpool 삽입

    Examples:
        >>> arch = validation_architecture([16, 16, 32, 32, 64, 64], pool_after=[2, 4])
        >>> arch.layer_shapes()["conv6"]
        (16, 16, 64)
    """
    pool_positions = set(pool_after if pool_after is not None else [2, 4])
    layers: List[LayerSpec] = []
    pool_index = 0
    for i, channels in enumerate(conv_channels, start=1):
        layers.append(LayerSpec(kind="conv", name=f"conv{i}", out_channels=channels, kernel_size=kernel_size))
        if i in pool_positions:
            pool_index += 1
            layers.append(LayerSpec(kind="maxpool", name=f"pool{pool_index}", size=2))
    layers.append(LayerSpec(kind="gap", name="gap"))
    layers.append(LayerSpec(kind="dense", name="logits", units=num_classes, activation=None))

    spec = ArchitectureSpec(
        name=name,
        input_shape=(image_size, image_size, 3),
        num_classes=num_classes,
        layers=layers,
        use_bias=use_bias,
        class_names=list(class_names or []),
    )
    if not spec.is_validation_layout():
        logger.debug("conv %d개 구조 생성 (검증 실험 기본값은 %d개)", len(conv_channels), VALIDATION_CONV_COUNT)
    return spec
