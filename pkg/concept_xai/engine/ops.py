"""
텐서 연산자 커널

소형 CNN에 필요한 연산자들의 forward/backward 구현입니다.
모든 텐서는 float64 numpy 배열이며, 특징맵은 channel-last (N, H, W, K) 레이아웃을 따릅니다.
그래프 내부에서는 항상 선두에 배치 축 N이 붙고, 모듈 하단의 함수형 API는
배치 축이 없는 단일 텐서(H×W×C 등)도 받아들입니다.

각 연산자는 Operator 를 상속하며 OPERATORS 레지스트리에 이름으로 등록됩니다.
  forward(inputs, params, attrs) -> (output, cache)
  backward(grad, cache, inputs, params, attrs, need_inputs, need_params)
      -> (input_grads, param_grads)
"""

from __future__ import annotations

import logging
import math
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..exceptions import ShapeError, ValidationError

# 로깅 설정
logger = logging.getLogger(__name__)

DTYPE = np.float64
PADDING_MODES = ("same", "valid")

Grads = Tuple[List[Optional[np.ndarray]], List[Optional[np.ndarray]]]


def as_tensor(data: Any) -> np.ndarray:
    """입력을 float64 numpy 배열로 변환"""
    return np.asarray(data, dtype=DTYPE)


def conv_output_geometry(
    size: int, kernel: int, stride: int, padding: str
) -> Tuple[int, int, int]:
    """
    한 공간 축의 출력 크기와 (앞, 뒤) padding 계산

    same: out = ceil(size / stride), 부족한 padding은 뒤쪽에 1 더 붙임
    valid: out = floor((size - kernel) / stride) + 1

    Returns:
        (out, pad_before, pad_after)
    """
    if stride <= 0:
        raise ValidationError("stride는 양의 정수여야 합니다", field_name="stride", field_value=stride)
    if padding not in PADDING_MODES:
        raise ValidationError(
            f"지원되지 않는 padding: {padding}", field_name="padding", field_value=padding, validation_rule="enum"
        )

    if padding == "same":
        out = math.ceil(size / stride)
        pad_total = max((out - 1) * stride + kernel - size, 0)
        before = pad_total // 2
        return out, before, pad_total - before

    if kernel > size:
        raise ShapeError(
            f"kernel 크기({kernel})가 padding 적용 입력 크기({size})보다 큽니다",
            operator="conv2d",
            expected=(kernel,),
            actual=(size,),
        )
    return (size - kernel) // stride + 1, 0, 0


class Operator:
    """연산자 기본 클래스"""

    name = "operator"
    num_params = 0

    def forward(self, inputs: Sequence[np.ndarray], params: Sequence[np.ndarray], attrs: Dict[str, Any]):
        raise NotImplementedError

    def backward(
        self,
        grad: np.ndarray,
        cache: Any,
        inputs: Sequence[np.ndarray],
        params: Sequence[np.ndarray],
        attrs: Dict[str, Any],
        need_inputs: bool = True,
        need_params: bool = True,
    ) -> Grads:
        raise NotImplementedError


class Conv2D(Operator):
    """2D cross-correlation (params: kernel kh×kw×C×K, 선택적 bias K)"""

    name = "conv2d"
    num_params = 2

    def forward(self, inputs, params, attrs):
        x = inputs[0]
        kernel = params[0]
        bias = params[1] if len(params) > 1 else None
        stride = int(attrs.get("stride", 1))
        padding = attrs.get("padding", "valid")

        if x.ndim != 4:
            raise ShapeError("conv2d 입력은 (N, H, W, C) 4차원이어야 합니다", operator=self.name, actual=x.shape)
        if kernel.ndim != 4:
            raise ShapeError("conv2d kernel은 (kh, kw, C, K) 4차원이어야 합니다", operator=self.name, actual=kernel.shape)
        n, h, w, c = x.shape
        kh, kw, kc, k = kernel.shape
        if kc != c:
            raise ShapeError(
                f"conv2d 채널 불일치: 입력 C={c}, kernel C={kc}",
                operator=self.name,
                expected=(kh, kw, c, k),
                actual=kernel.shape,
            )
        if bias is not None and bias.shape != (k,):
            raise ShapeError("conv2d bias shape 불일치", operator=self.name, expected=(k,), actual=bias.shape)

        out_h, pt, pb = conv_output_geometry(h, kh, stride, padding)
        out_w, pl, pr = conv_output_geometry(w, kw, stride, padding)
        if kh > h + pt + pb or kw > w + pl + pr:
            raise ShapeError(
                f"kernel 공간 크기 {kh}x{kw}가 padding 적용 입력 {h + pt + pb}x{w + pl + pr}보다 큽니다",
                operator=self.name,
                expected=(kh, kw),
                actual=(h + pt + pb, w + pl + pr),
            )

        xp = np.pad(x, ((0, 0), (pt, pb), (pl, pr), (0, 0))) if (pt or pb or pl or pr) else x
        # (N, H', W', C, kh, kw)
        windows = sliding_window_view(xp, (kh, kw), axis=(1, 2))[:, ::stride, ::stride][:, :out_h, :out_w]
        out = np.tensordot(windows, kernel.transpose(2, 0, 1, 3), axes=([3, 4, 5], [0, 1, 2]))
        if bias is not None:
            out = out + bias
        cache = {"windows": windows, "padded_shape": xp.shape, "pads": (pt, pb, pl, pr), "stride": stride}
        return out, cache

    def backward(self, grad, cache, inputs, params, attrs, need_inputs=True, need_params=True):
        kernel = params[0]
        kh, kw, _, _ = kernel.shape
        stride = cache["stride"]
        windows = cache["windows"]
        out_h, out_w = grad.shape[1], grad.shape[2]

        param_grads: List[Optional[np.ndarray]] = [None] * len(params)
        if need_params:
            # (C, kh, kw, K) -> (kh, kw, C, K)
            dk = np.tensordot(windows, grad, axes=([0, 1, 2], [0, 1, 2])).transpose(1, 2, 0, 3)
            param_grads[0] = dk
            if len(params) > 1:
                param_grads[1] = grad.sum(axis=(0, 1, 2))

        dx = None
        if need_inputs:
            # (N, H', W', C, kh, kw)
            dcols = np.tensordot(grad, kernel.transpose(3, 2, 0, 1), axes=([3], [0]))
            dxp = np.zeros(cache["padded_shape"], dtype=DTYPE)
            for i in range(kh):
                for j in range(kw):
                    dxp[:, i : i + stride * out_h : stride, j : j + stride * out_w : stride, :] += dcols[..., i, j]
            pt, pb, pl, pr = cache["pads"]
            dx = dxp[:, pt : dxp.shape[1] - pb, pl : dxp.shape[2] - pr, :]
        return [dx], param_grads


class MaxPool2D(Operator):
    """2D max pooling (valid, 동률은 윈도우 내 첫 위치가 승리)"""

    name = "maxpool2d"

    def forward(self, inputs, params, attrs):
        x = inputs[0]
        size = int(attrs.get("size", 2))
        stride = int(attrs.get("stride", size))
        if x.ndim != 4:
            raise ShapeError("maxpool2d 입력은 (N, H, W, C) 4차원이어야 합니다", operator=self.name, actual=x.shape)
        if size > x.shape[1] or size > x.shape[2]:
            raise ShapeError(
                f"pool 크기({size})가 입력 공간 크기보다 큽니다",
                operator=self.name,
                expected=(size, size),
                actual=x.shape[1:3],
            )
        n, h, w, c = x.shape
        out_h = (h - size) // stride + 1
        out_w = (w - size) // stride + 1
        windows = sliding_window_view(x, (size, size), axis=(1, 2))[:, ::stride, ::stride][:, :out_h, :out_w]
        flat = windows.reshape(n, out_h, out_w, c, size * size)
        argmax = flat.argmax(axis=-1)
        out = np.take_along_axis(flat, argmax[..., None], axis=-1)[..., 0]
        return out, {"argmax": argmax, "size": size, "stride": stride, "input_shape": x.shape}

    def backward(self, grad, cache, inputs, params, attrs, need_inputs=True, need_params=True):
        if not need_inputs:
            return [None], []
        size, stride = cache["size"], cache["stride"]
        argmax = cache["argmax"]
        out_h, out_w = grad.shape[1], grad.shape[2]
        dx = np.zeros(cache["input_shape"], dtype=DTYPE)
        for i in range(size):
            for j in range(size):
                routed = np.where(argmax == i * size + j, grad, 0.0)
                dx[:, i : i + stride * out_h : stride, j : j + stride * out_w : stride, :] += routed
        return [dx], []


class GlobalAveragePool(Operator):
    """공간 평균 (N, H, W, K) -> (N, K)"""

    name = "gap"

    def forward(self, inputs, params, attrs):
        x = inputs[0]
        if x.ndim != 4 or x.shape[1] < 1 or x.shape[2] < 1:
            raise ShapeError("gap 입력은 H, W >= 1 인 (N, H, W, K) 이어야 합니다", operator=self.name, actual=x.shape)
        return x.mean(axis=(1, 2)), {"input_shape": x.shape}

    def backward(self, grad, cache, inputs, params, attrs, need_inputs=True, need_params=True):
        n, h, w, k = cache["input_shape"]
        dx = np.broadcast_to(grad[:, None, None, :] / (h * w), (n, h, w, k)).copy()
        return [dx], []


class ReLU(Operator):
    """elementwise max(x, 0); x == 0 에서의 subgradient는 0"""

    name = "relu"

    def forward(self, inputs, params, attrs):
        x = inputs[0]
        return np.maximum(x, 0.0), None

    def backward(self, grad, cache, inputs, params, attrs, need_inputs=True, need_params=True):
        return [grad * (inputs[0] > 0.0)], []


class Dense(Operator):
    """완전연결 레이어 (params: weights D×U, 선택적 bias U)"""

    name = "dense"
    num_params = 2

    def forward(self, inputs, params, attrs):
        x = inputs[0]
        weights = params[0]
        if x.ndim != 2:
            raise ShapeError("dense 입력은 (N, D) 2차원이어야 합니다", operator=self.name, actual=x.shape)
        if weights.ndim != 2 or weights.shape[0] != x.shape[1]:
            raise ShapeError(
                f"dense 입력 차원 D={x.shape[1]} 과 weights 행 수가 다릅니다",
                operator=self.name,
                expected=(x.shape[1], weights.shape[-1]),
                actual=weights.shape,
            )
        out = x @ weights
        if len(params) > 1:
            out = out + params[1]
        return out, None

    def backward(self, grad, cache, inputs, params, attrs, need_inputs=True, need_params=True):
        x = inputs[0]
        param_grads: List[Optional[np.ndarray]] = [None] * len(params)
        if need_params:
            param_grads[0] = x.T @ grad
            if len(params) > 1:
                param_grads[1] = grad.sum(axis=0)
        dx = grad @ params[0].T if need_inputs else None
        return [dx], param_grads


class Flatten(Operator):
    """배치 축을 제외한 축을 펼침"""

    name = "flatten"

    def forward(self, inputs, params, attrs):
        x = inputs[0]
        return x.reshape(x.shape[0], -1), {"input_shape": x.shape}

    def backward(self, grad, cache, inputs, params, attrs, need_inputs=True, need_params=True):
        return [grad.reshape(cache["input_shape"])], []


class Softmax(Operator):
    """마지막 축 기준 수치 안정 softmax"""

    name = "softmax"

    def forward(self, inputs, params, attrs):
        probs = softmax(inputs[0])
        return probs, probs

    def backward(self, grad, cache, inputs, params, attrs, need_inputs=True, need_params=True):
        probs = cache
        dx = probs * (grad - np.sum(grad * probs, axis=-1, keepdims=True))
        return [dx], []


class SumAll(Operator):
    """배치 축을 제외한 모든 원소의 합 (N, ...) -> (N, 1)"""

    name = "sum"

    def forward(self, inputs, params, attrs):
        x = inputs[0]
        return x.reshape(x.shape[0], -1).sum(axis=1, keepdims=True), {"input_shape": x.shape}

    def backward(self, grad, cache, inputs, params, attrs, need_inputs=True, need_params=True):
        shape = cache["input_shape"]
        expand = grad.reshape((shape[0],) + (1,) * (len(shape) - 1))
        return [np.broadcast_to(expand, shape).copy()], []


class Select(Operator):
    """(N, D) 에서 attrs['index'] 열 선택 -> (N, 1)"""

    name = "select"

    def forward(self, inputs, params, attrs):
        x = inputs[0]
        index = int(attrs["index"])
        if x.ndim != 2 or not 0 <= index < x.shape[1]:
            raise ShapeError(f"select 인덱스 {index}가 범위를 벗어났습니다", operator=self.name, actual=x.shape)
        return x[:, index : index + 1], None

    def backward(self, grad, cache, inputs, params, attrs, need_inputs=True, need_params=True):
        dx = np.zeros_like(inputs[0])
        index = int(attrs["index"])
        dx[:, index : index + 1] = grad
        return [dx], []


class Scale(Operator):
    """상수배 attrs['factor'] * x"""

    name = "scale"

    def forward(self, inputs, params, attrs):
        return float(attrs["factor"]) * inputs[0], None

    def backward(self, grad, cache, inputs, params, attrs, need_inputs=True, need_params=True):
        return [float(attrs["factor"]) * grad], []


class Add(Operator):
    """동일 shape 두 입력의 elementwise 합"""

    name = "add"

    def forward(self, inputs, params, attrs):
        a, b = inputs
        if a.shape != b.shape:
            raise ShapeError("add 입력 shape 불일치", operator=self.name, expected=a.shape, actual=b.shape)
        return a + b, None

    def backward(self, grad, cache, inputs, params, attrs, need_inputs=True, need_params=True):
        return [grad, grad], []


OPERATORS: Dict[str, Operator] = {
    op.name: op
    for op in (
        Conv2D(),
        MaxPool2D(),
        GlobalAveragePool(),
        ReLU(),
        Dense(),
        Flatten(),
        Softmax(),
        SumAll(),
        Select(),
        Scale(),
        Add(),
    )
}


def get_operator(kind: str) -> Operator:
    """레지스트리에서 연산자 조회"""
    try:
        return OPERATORS[kind]
    except KeyError:
        raise ValidationError(
            f"알 수 없는 연산자: {kind}", field_name="kind", field_value=kind, validation_rule="registered_operator"
        ) from None


# ---------------------------------------------------------------------------
# 함수형 API (배치 축 유무 모두 지원)
# ---------------------------------------------------------------------------


def _with_batch(x: np.ndarray, rank: int) -> Tuple[np.ndarray, bool]:
    """rank 차원 단일 텐서면 배치 축을 추가"""
    if x.ndim == rank:
        return x[None, ...], True
    return x, False


def conv2d(
    input: np.ndarray,
    kernels: np.ndarray,
    stride: int = 1,
    padding: str = "valid",
    bias: Optional[np.ndarray] = None,
) -> np.ndarray:
    """
    2D cross-correlation

    Args:
        input: H×W×C 또는 N×H×W×C
        kernels: kh×kw×C×K
        stride: 양의 정수
        padding: "same" | "valid"
        bias: 선택적 길이 K 벡터

    Returns:
        H'×W'×K (입력에 배치 축이 있으면 N×H'×W'×K)
    """
    x, squeezed = _with_batch(as_tensor(input), 3)
    params = [as_tensor(kernels)] + ([as_tensor(bias)] if bias is not None else [])
    out, _ = OPERATORS["conv2d"].forward([x], params, {"stride": stride, "padding": padding})
    return out[0] if squeezed else out


def maxpool2d(input: np.ndarray, size: int = 2, stride: Optional[int] = None) -> np.ndarray:
    """2D max pooling (H×W×C 또는 N×H×W×C)"""
    x, squeezed = _with_batch(as_tensor(input), 3)
    out, _ = OPERATORS["maxpool2d"].forward([x], [], {"size": size, "stride": stride or size})
    return out[0] if squeezed else out


def gap(fmaps: np.ndarray) -> np.ndarray:
    """global average pooling: H×W×K -> K (또는 N×H×W×K -> N×K)"""
    x, squeezed = _with_batch(as_tensor(fmaps), 3)
    out, _ = OPERATORS["gap"].forward([x], [], {})
    return out[0] if squeezed else out


def relu(x: np.ndarray) -> np.ndarray:
    """elementwise max(x, 0)"""
    return np.maximum(as_tensor(x), 0.0)


def dense(x: np.ndarray, weights: np.ndarray, bias: Optional[np.ndarray] = None) -> np.ndarray:
    """완전연결: D 또는 N×D 입력"""
    inp, squeezed = _with_batch(as_tensor(x), 1)
    params = [as_tensor(weights)] + ([as_tensor(bias)] if bias is not None else [])
    out, _ = OPERATORS["dense"].forward([inp], params, {})
    return out[0] if squeezed else out


def softmax(logits: np.ndarray) -> np.ndarray:
    """마지막 축 기준 수치 안정 softmax"""
    z = as_tensor(logits)
    shifted = z - np.max(z, axis=-1, keepdims=True)
    exps = np.exp(shifted)
    return exps / np.sum(exps, axis=-1, keepdims=True)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    """마지막 축 기준 log-softmax"""
    z = as_tensor(logits)
    shifted = z - np.max(z, axis=-1, keepdims=True)
    return shifted - np.log(np.sum(np.exp(shifted), axis=-1, keepdims=True))


def cross_entropy_loss(logits: np.ndarray, labels: Sequence[int]) -> Tuple[float, np.ndarray]:
    """
    softmax + cross-entropy 평균 손실과 logits에 대한 gradient

    Args:
        logits: N×C (또는 C)
        labels: 길이 N 정수 레이블

    Returns:
        (loss, dloss/dlogits) - loss는 항상 0 이상
    """
    z, squeezed = _with_batch(as_tensor(logits), 1)
    y = np.asarray(labels, dtype=np.int64).reshape(-1)
    if y.shape[0] != z.shape[0]:
        raise ShapeError("labels 길이와 logits 배치 크기가 다릅니다", operator="cross_entropy",
                         expected=(z.shape[0],), actual=y.shape)
    if np.any(y < 0) or np.any(y >= z.shape[1]):
        raise ValidationError("레이블이 클래스 범위를 벗어났습니다", field_name="labels", validation_rule="range")

    n = z.shape[0]
    log_probs = log_softmax(z)
    picked = log_probs[np.arange(n), y]
    loss = float(max(-picked.mean(), 0.0))

    grad = np.exp(log_probs)
    grad[np.arange(n), y] -= 1.0
    grad /= n
    return loss, (grad[0] if squeezed else grad)
