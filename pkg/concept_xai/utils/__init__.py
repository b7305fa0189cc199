"""
Utility functions package

드로잉/글리프, 오버레이 렌더링, 통계, 차트 유틸리티를 제공합니다.
matplotlib/scipy 로딩 비용을 피하기 위해 지연 로딩을 사용합니다.
"""

from __future__ import annotations

import importlib
from typing import Any

_EXPORTS = {
    "glyph_mask": "glyphs",
    "GLYPHS": "glyphs",
    "quantize": "drawing",
    "noise_background": "drawing",
    "render_overlay": "rendering",
    "blend_overlay": "rendering",
    "upsample_map": "rendering",
    "apply_colormap": "rendering",
    "write_png": "rendering",
    "read_png": "rendering",
    "contraharmonic_mean": "statistics",
    "median": "statistics",
    "mean_and_std": "statistics",
    "spearman": "statistics",
    "two_sample_ttest": "statistics",
    "grouped_bar_chart": "charts",
    "line_chart": "charts",
}

__all__ = list(_EXPORTS)


def __getattr__(name: str) -> Any:  # PEP 562
    module = _EXPORTS.get(name)
    if module is None:
        raise AttributeError(f"module {__name__!r} has no attribute {name!r}")
    return getattr(importlib.import_module(f"{__name__}.{module}"), name)
