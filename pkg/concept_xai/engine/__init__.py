"""
Tensor engine

float64 channel-last 텐서 연산자와 reverse-mode 미분을 지원하는 정적 연산 그래프
"""

from .graph import ComputeGraph, Node, zeros_like_params
from .ops import (
    DTYPE,
    OPERATORS,
    as_tensor,
    conv2d,
    conv_output_geometry,
    cross_entropy_loss,
    dense,
    gap,
    get_operator,
    log_softmax,
    maxpool2d,
    relu,
    softmax,
)

__all__ = [
    "ComputeGraph",
    "Node",
    "zeros_like_params",
    "DTYPE",
    "OPERATORS",
    "as_tensor",
    "conv2d",
    "conv_output_geometry",
    "cross_entropy_loss",
    "dense",
    "gap",
    "get_operator",
    "log_softmax",
    "maxpool2d",
    "relu",
    "softmax",
]
