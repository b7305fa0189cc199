"""
래스터 드로잉 프리미티브

numpy 좌표 그리드 기반 마스크(타원, 회전 사각형, 원, 줄무늬)와
배경 생성, k/255 양자화를 제공합니다. 모든 이미지는 H×W×3 float64, [0, 1] 입니다.
"""

from __future__ import annotations

from typing import Sequence, Tuple

import numpy as np

Color = Sequence[float]

# 엔티티/배경 색 채널 허용 범위: 예약 태그 색(채널 값 0 또는 1 포함)과 겹치지 않도록 제한
PALETTE_LOW = 0.05
PALETTE_HIGH = 0.95


def coordinate_grid(size: int) -> Tuple[np.ndarray, np.ndarray]:
    """픽셀 중심 좌표 (yy, xx)"""
    coords = np.arange(size, dtype=np.float64) + 0.5
    return np.meshgrid(coords, coords, indexing="ij")


def _rotate(yy: np.ndarray, xx: np.ndarray, cy: float, cx: float, angle: float) -> Tuple[np.ndarray, np.ndarray]:
    dy, dx = yy - cy, xx - cx
    cos, sin = np.cos(angle), np.sin(angle)
    return dx * sin + dy * cos, dx * cos - dy * sin


def ellipse_mask(size: int, cy: float, cx: float, ry: float, rx: float, angle: float = 0.0) -> np.ndarray:
    """회전 타원 내부 마스크"""
    yy, xx = coordinate_grid(size)
    v, u = _rotate(yy, xx, cy, cx, angle)
    return (u / rx) ** 2 + (v / ry) ** 2 <= 1.0


def rotated_rect_mask(
    size: int, cy: float, cx: float, half_h: float, half_w: float, angle: float = 0.0
) -> np.ndarray:
    """회전 사각형 내부 마스크"""
    yy, xx = coordinate_grid(size)
    v, u = _rotate(yy, xx, cy, cx, angle)
    return (np.abs(u) <= half_w) & (np.abs(v) <= half_h)


def disk_mask(size: int, cy: float, cx: float, radius: float) -> np.ndarray:
    return ellipse_mask(size, cy, cx, radius, radius)


def stripe_field(size: int, period: float, angle: float, phase: float = 0.0) -> np.ndarray:
    """각도 angle 방향으로 반복되는 줄무늬 (True/False 교대)"""
    yy, xx = coordinate_grid(size)
    t = xx * np.cos(angle) + yy * np.sin(angle)
    return np.sin(2.0 * np.pi * t / period + phase) >= 0.0


def paint(image: np.ndarray, mask: np.ndarray, color: Color) -> None:
    """mask 위치를 color 로 칠함 (in-place)"""
    image[mask] = np.asarray(color, dtype=np.float64)


def noise_background(rng: np.random.Generator, size: int, base: Color, sigma: float = 0.04) -> np.ndarray:
    """기본 색 + 선형 그라디언트 + 픽셀 노이즈 배경"""
    yy, xx = coordinate_grid(size)
    angle = rng.uniform(0.0, 2.0 * np.pi)
    gradient = (np.cos(angle) * xx + np.sin(angle) * yy) / size - 0.5
    strength = rng.uniform(0.0, 0.15)
    image = np.asarray(base, dtype=np.float64)[None, None, :] + strength * gradient[..., None]
    image = image + rng.normal(0.0, sigma, size=(size, size, 3))
    return clamp_palette(image)


def uniform_noise_image(rng: np.random.Generator, size: int) -> np.ndarray:
    """팔레트 범위 내 균등 랜덤 픽셀 이미지"""
    return rng.uniform(PALETTE_LOW, PALETTE_HIGH, size=(size, size, 3))


def clamp_palette(image: np.ndarray) -> np.ndarray:
    return np.clip(image, PALETTE_LOW, PALETTE_HIGH)


def quantize(image: np.ndarray) -> np.ndarray:
    """[0, 1] 로 clip 후 k/255 로 양자화 (PNG 8bit 저장 시 무손실)"""
    return np.round(np.clip(image, 0.0, 1.0) * 255.0) / 255.0


def jitter_color(rng: np.random.Generator, color: Color, amount: float = 0.05) -> np.ndarray:
    """색 채널별 소폭 랜덤 변형 (팔레트 범위 유지)"""
    shifted = np.asarray(color, dtype=np.float64) + rng.uniform(-amount, amount, size=3)
    return np.clip(shifted, PALETTE_LOW, PALETTE_HIGH)
