"""
개념 맵 오버레이 렌더링과 PNG 입출력

- bilinear 업샘플링: scipy.ndimage.zoom(order=1)
- 컬러맵: matplotlib viridis (지각적으로 순서가 보존되는 컬러맵)
- PNG 저장/로드: matplotlib.image, 8bit 양자화 값은 왕복 시 정확히 보존
"""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Optional, Tuple, Union

import matplotlib

matplotlib.use("Agg")

import numpy as np
from matplotlib import colormaps
from matplotlib import image as mpimg
from scipy import ndimage

# 로깅 설정
logger = logging.getLogger(__name__)

DEFAULT_COLORMAP = "viridis"
DEFAULT_ALPHA = 0.5


def upsample_map(values: np.ndarray, target_shape: Tuple[int, int]) -> np.ndarray:
    """
    H×W 맵을 target_shape 로 bilinear 업샘플링

    경계는 가장 가까운 값으로 확장하므로 상수 맵은 상수로 유지됩니다.
    """
    src = np.asarray(values, dtype=np.float64)
    if src.shape == tuple(target_shape):
        return src.copy()
    factors = (target_shape[0] / src.shape[0], target_shape[1] / src.shape[1])
    out = ndimage.zoom(src, factors, order=1, mode="nearest", grid_mode=True)
    if out.shape != tuple(target_shape):
        # 반올림으로 한 픽셀 어긋나는 경우 보정
        out = out[: target_shape[0], : target_shape[1]]
        out = np.pad(
            out,
            ((0, target_shape[0] - out.shape[0]), (0, target_shape[1] - out.shape[1])),
            mode="edge",
        )
    return out


def apply_colormap(values: np.ndarray, name: str = DEFAULT_COLORMAP) -> np.ndarray:
    """[0, 1] 값 -> RGB (H×W×3)"""
    cmap = colormaps[name]
    return np.asarray(cmap(np.clip(values, 0.0, 1.0)), dtype=np.float64)[..., :3]


def blend_overlay(
    image: np.ndarray, normalized_map: np.ndarray, alpha: float = DEFAULT_ALPHA, colormap: str = DEFAULT_COLORMAP
) -> np.ndarray:
    """
    정규화된 맵을 이미지 크기로 업샘플링 후 컬러맵 적용, alpha 블렌딩

    Returns:
        (1 - alpha) * image + alpha * colormap(upsampled)
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha 는 [0, 1] 범위여야 합니다: {alpha}")
    img = np.asarray(image, dtype=np.float64)
    upsampled = np.clip(upsample_map(normalized_map, img.shape[:2]), 0.0, 1.0)
    heat = apply_colormap(upsampled, colormap)
    return (1.0 - alpha) * img + alpha * heat


def write_png(path: Union[str, Path], image: np.ndarray) -> Path:
    """H×W×3 [0, 1] 이미지를 8bit PNG 로 저장"""
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    pixels = np.round(np.clip(np.asarray(image, dtype=np.float64), 0.0, 1.0) * 255.0).astype(np.uint8)
    mpimg.imsave(out, pixels)
    return out


def read_png(path: Union[str, Path]) -> np.ndarray:
    """PNG -> H×W×3 float64 (k/255 값으로 복원)"""
    pixels = mpimg.imread(Path(path))
    if pixels.dtype == np.uint8:
        data = pixels.astype(np.float64) / 255.0
    else:
        data = np.round(pixels.astype(np.float64) * 255.0) / 255.0
    if data.ndim == 2:
        data = np.repeat(data[..., None], 3, axis=-1)
    return data[..., :3]


def render_overlay(
    image: np.ndarray,
    normalized_map: np.ndarray,
    output_path: Optional[Union[str, Path]] = None,
    alpha: float = DEFAULT_ALPHA,
    colormap: str = DEFAULT_COLORMAP,
) -> np.ndarray:
    """
    오버레이 생성 후 (경로가 주어지면) PNG 저장

    Returns:
        np.ndarray: 블렌딩된 H×W×3 이미지
    """
    blended = blend_overlay(image, normalized_map, alpha=alpha, colormap=colormap)
    if output_path is not None:
        write_png(output_path, blended)
        logger.debug("오버레이 저장: %s", output_path)
    return blended
