"""
연산 그래프 (ComputeGraph)

노드는 삽입 순서가 곧 위상 정렬 순서인 비순환 그래프를 이룹니다.
각 노드는 forward 결과를 캐시하므로 중간 레이어의 활성값 캡처,
임의 노드 출력 치환(forward_from), 임의 스칼라 노드에서 임의 노드까지의
reverse-mode 미분(backward)을 prefix 재계산 없이 수행할 수 있습니다.

그래프 인스턴스는 단일 스레드 전용입니다. 병렬 작업은 clone()으로
파라미터를 읽기 전용 공유하는 독립 인스턴스를 만들어 사용합니다.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from ..exceptions import ShapeError, ValidationError
from .ops import DTYPE, as_tensor, get_operator

# 로깅 설정
logger = logging.getLogger(__name__)

NodeRef = Union[int, str]


@dataclass
class Node:
    """그래프 노드 레코드"""

    name: str
    kind: str
    inputs: Tuple[int, ...] = ()
    param_names: Tuple[str, ...] = ()
    attrs: Dict[str, Any] = field(default_factory=dict)
    capturable: bool = False
    output: Optional[np.ndarray] = None
    cache: Any = None

    def reset(self) -> None:
        self.output = None
        self.cache = None


class ComputeGraph:
    """
    소형 CNN용 정적 연산 그래프

    Args:
        params: 파라미터 이름 -> 텐서. 노드는 param_names로 이를 참조합니다.
    """

    def __init__(self, params: Optional[Mapping[str, np.ndarray]] = None):
        self.params: Dict[str, np.ndarray] = {k: as_tensor(v) for k, v in (params or {}).items()}
        self.nodes: List[Node] = []
        self._index: Dict[str, int] = {}

    # ------------------------------------------------------------------
    # 구성
    # ------------------------------------------------------------------

    def add_input(self, name: str = "input") -> int:
        """입력 노드 추가 (그래프당 1개)"""
        if any(node.kind == "input" for node in self.nodes):
            raise ValidationError("입력 노드는 하나만 허용됩니다", field_name="name", field_value=name)
        return self._append(Node(name=name, kind="input"))

    def add_node(
        self,
        name: str,
        kind: str,
        inputs: Sequence[NodeRef],
        params: Sequence[str] = (),
        attrs: Optional[Dict[str, Any]] = None,
        capturable: bool = False,
    ) -> int:
        """
        연산 노드 추가

        입력은 이미 추가된 노드만 참조할 수 있으므로 그래프는 항상 비순환입니다.

        Returns:
            int: 새 노드 인덱스
        """
        get_operator(kind)
        input_indices = tuple(self.node_index(ref) for ref in inputs)
        for param_name in params:
            if param_name not in self.params:
                raise ValidationError(
                    f"노드 '{name}'가 존재하지 않는 파라미터를 참조합니다: {param_name}",
                    field_name="params",
                    field_value=param_name,
                )
        node = Node(
            name=name,
            kind=kind,
            inputs=input_indices,
            param_names=tuple(params),
            attrs=dict(attrs or {}),
            capturable=capturable,
        )
        return self._append(node)

    def _append(self, node: Node) -> int:
        if node.name in self._index:
            raise ValidationError(f"중복된 노드 이름: {node.name}", field_name="name", field_value=node.name)
        self.nodes.append(node)
        self._index[node.name] = len(self.nodes) - 1
        return len(self.nodes) - 1

    def node_index(self, ref: NodeRef) -> int:
        """노드 이름 또는 인덱스를 인덱스로 변환"""
        if isinstance(ref, (int, np.integer)):
            if not 0 <= int(ref) < len(self.nodes):
                raise ValidationError(f"노드 인덱스 범위 초과: {ref}", field_name="node", field_value=ref)
            return int(ref)
        try:
            return self._index[ref]
        except KeyError:
            raise ValidationError(
                f"알 수 없는 노드: {ref}", field_name="node", field_value=ref, validation_rule="known_node"
            ) from None

    def node(self, ref: NodeRef) -> Node:
        return self.nodes[self.node_index(ref)]

    @property
    def output_index(self) -> int:
        if not self.nodes:
            raise ValidationError("빈 그래프입니다", field_name="nodes")
        return len(self.nodes) - 1

    def capturable_names(self) -> List[str]:
        """캡처/치환 가능한 노드 이름 목록 (삽입 순서)"""
        return [node.name for node in self.nodes if node.capturable]

    def clone(self) -> "ComputeGraph":
        """
        구조는 복제하고 파라미터 배열은 공유하는 새 그래프

        캐시는 비어 있는 상태로 시작합니다.
        """
        twin = ComputeGraph()
        twin.params = self.params
        for node in self.nodes:
            twin._append(
                Node(
                    name=node.name,
                    kind=node.kind,
                    inputs=node.inputs,
                    param_names=node.param_names,
                    attrs=dict(node.attrs),
                    capturable=node.capturable,
                )
            )
        return twin

    # ------------------------------------------------------------------
    # forward
    # ------------------------------------------------------------------

    def _run_node(self, index: int) -> None:
        node = self.nodes[index]
        inputs = []
        for src in node.inputs:
            value = self.nodes[src].output
            if value is None:
                raise ValidationError(
                    f"노드 '{node.name}'의 입력 '{self.nodes[src].name}'에 캐시된 출력이 없습니다",
                    field_name="node",
                    field_value=node.name,
                    validation_rule="forward_before_use",
                )
            inputs.append(value)
        params = [self.params[name] for name in node.param_names]
        node.output, node.cache = get_operator(node.kind).forward(inputs, params, node.attrs)

    def forward(self, x: np.ndarray) -> np.ndarray:
        """
        전체 forward

        Args:
            x: 배치 축이 포함된 입력 (N, ...)

        Returns:
            np.ndarray: 출력 노드 값 (N, ...)
        """
        batch = as_tensor(x)
        for node in self.nodes:
            node.reset()
        input_nodes = [i for i, node in enumerate(self.nodes) if node.kind == "input"]
        if len(input_nodes) != 1:
            raise ValidationError("그래프에 입력 노드가 정확히 하나 있어야 합니다", field_name="nodes")
        self.nodes[input_nodes[0]].output = batch

        for index in range(len(self.nodes)):
            if self.nodes[index].kind != "input":
                self._run_node(index)
        return self.nodes[self.output_index].output

    def _descendants(self, start: int) -> List[int]:
        """start 의 하위 노드 인덱스 (start 제외, 위상 순서)"""
        reached = {start}
        result = []
        for index in range(start + 1, len(self.nodes)):
            if any(src in reached for src in self.nodes[index].inputs):
                reached.add(index)
                result.append(index)
        return result

    def forward_from(self, node: NodeRef, substituted: np.ndarray) -> np.ndarray:
        """
        지정 노드의 출력을 substituted 로 치환하고 하위 노드만 재계산

        substituted 의 배치 크기는 캐시된 출력과 달라도 되지만
        배치 축을 제외한 shape은 같아야 합니다.

        Returns:
            np.ndarray: 치환 후 그래프 출력 (N', ...)
        """
        index = self.node_index(node)
        target = self.nodes[index]
        if not target.capturable:
            raise ValidationError(
                f"치환할 수 없는 노드입니다: {target.name}",
                field_name="node",
                field_value=target.name,
                validation_rule="capturable",
            )
        value = as_tensor(substituted)
        if target.output is not None and value.shape[1:] != target.output.shape[1:]:
            raise ShapeError(
                f"치환 텐서 shape이 노드 '{target.name}' 출력과 다릅니다",
                operator="forward_from",
                expected=target.output.shape[1:],
                actual=value.shape[1:],
            )

        target.output = value
        target.cache = None
        for desc in self._descendants(index):
            self._run_node(desc)
        return self.nodes[self.output_index].output

    # ------------------------------------------------------------------
    # backward
    # ------------------------------------------------------------------

    def _reverse(
        self,
        start: int,
        seed: np.ndarray,
        stop: int,
        want_params: bool,
    ) -> Tuple[Dict[int, np.ndarray], Dict[str, np.ndarray]]:
        """start 에서 stop 노드까지 역전파 (stop 이전 노드로는 전파하지 않음)"""
        grads: Dict[int, np.ndarray] = {start: seed}
        param_grads: Dict[str, np.ndarray] = {}

        for index in range(start, stop, -1):
            grad = grads.get(index)
            if grad is None:
                continue
            node = self.nodes[index]
            if node.kind == "input":
                continue
            need_inputs = any(
                src >= stop and (src == stop or self.nodes[src].kind != "input") for src in node.inputs
            )
            inputs = [self.nodes[src].output for src in node.inputs]
            params = [self.params[name] for name in node.param_names]
            input_grads, node_param_grads = get_operator(node.kind).backward(
                grad, node.cache, inputs, params, node.attrs, need_inputs=need_inputs, need_params=want_params
            )

            for src, g in zip(node.inputs, input_grads):
                if g is None or src < stop:
                    continue
                grads[src] = grads[src] + g if src in grads else g
            if want_params:
                for name, g in zip(node.param_names, node_param_grads):
                    if g is not None:
                        param_grads[name] = param_grads[name] + g if name in param_grads else g
        return grads, param_grads

    def backward(self, scalar_node: NodeRef, wrt: NodeRef, seed: Optional[np.ndarray] = None) -> np.ndarray:
        """
        scalar_node 출력에 대한 wrt 노드 출력의 gradient

        seed 를 생략하면 scalar_node 출력은 원소 1개여야 합니다.
        seed 를 주면 출력과 같은 shape의 upstream gradient로 사용되어
        배치 각 행의 gradient를 한 번의 역전파로 얻습니다.
        wrt 에서 scalar_node 로 가는 경로가 없으면 0 텐서를 반환합니다.
        """
        start = self.node_index(scalar_node)
        stop = self.node_index(wrt)
        out = self.nodes[start].output
        target = self.nodes[stop].output
        if out is None or target is None:
            raise ValidationError("backward 전에 forward가 필요합니다", field_name="graph", validation_rule="forward_first")

        if seed is None:
            if out.size != 1:
                raise ValidationError(
                    f"스칼라가 아닌 노드 '{self.nodes[start].name}'(shape={out.shape})의 gradient는 seed 없이 계산할 수 없습니다",
                    field_name="scalar_node",
                    field_value=self.nodes[start].name,
                    validation_rule="single_element",
                )
            seed_arr = np.ones_like(out)
        else:
            seed_arr = as_tensor(seed)
            if seed_arr.shape != out.shape:
                raise ShapeError("seed shape이 출력과 다릅니다", operator="backward", expected=out.shape, actual=seed_arr.shape)

        if stop > start:
            return np.zeros_like(target)
        if stop == start:
            return seed_arr.copy()

        grads, _ = self._reverse(start, seed_arr, stop, want_params=False)
        return grads.get(stop, np.zeros_like(target))

    def parameter_gradients(self, output_node: NodeRef, seed: np.ndarray) -> Dict[str, np.ndarray]:
        """출력 노드 upstream gradient 에 대한 전체 파라미터 gradient (학습용)"""
        start = self.node_index(output_node)
        seed_arr = as_tensor(seed)
        _, param_grads = self._reverse(start, seed_arr, -1, want_params=True)
        return {name: param_grads.get(name, np.zeros_like(value)) for name, value in self.params.items()}

    def outputs(self, refs: Iterable[NodeRef]) -> Dict[str, np.ndarray]:
        """캐시된 노드 출력 조회"""
        result = {}
        for ref in refs:
            node = self.node(ref)
            if node.output is None:
                raise ValidationError(f"노드 '{node.name}'의 출력이 캐시되지 않았습니다", field_name="node", field_value=node.name)
            result[node.name] = node.output
        return result


def zeros_like_params(params: Mapping[str, np.ndarray]) -> Dict[str, np.ndarray]:
    """파라미터와 같은 shape의 0 텐서 딕셔너리"""
    return {name: np.zeros_like(value, dtype=DTYPE) for name, value in params.items()}
