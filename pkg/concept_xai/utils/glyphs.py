"""
태그 글자 래스터

5×7 비트맵 글꼴과 nearest-neighbor 확대로 임의 크기의 글자 마스크를 만듭니다.
"""

from __future__ import annotations

from typing import Dict

import numpy as np

_GLYPH_ROWS: Dict[str, tuple] = {
    "Z": (
        "#####",
        "....#",
        "...#.",
        "..#..",
        ".#...",
        "#....",
        "#####",
    ),
    "T": (
        "#####",
        "..#..",
        "..#..",
        "..#..",
        "..#..",
        "..#..",
        "..#..",
    ),
    "C": (
        ".####",
        "#....",
        "#....",
        "#....",
        "#....",
        "#....",
        ".####",
    ),
}

GLYPHS: Dict[str, np.ndarray] = {
    letter: np.array([[ch == "#" for ch in row] for row in rows], dtype=bool) for letter, rows in _GLYPH_ROWS.items()
}
GLYPH_HEIGHT, GLYPH_WIDTH = 7, 5


def glyph_mask(letter: str, height: int, width: int) -> np.ndarray:
    """
    글자 비트맵을 height×width 로 확대한 bool 마스크

    Raises:
        ValueError: 알 수 없는 글자 또는 0 이하 크기
    """
    if letter not in GLYPHS:
        raise ValueError(f"글리프가 없는 글자입니다: {letter} (지원: {sorted(GLYPHS)})")
    if height < 1 or width < 1:
        raise ValueError(f"글리프 크기는 1 이상이어야 합니다: {height}x{width}")
    rows = np.arange(height) * GLYPH_HEIGHT // height
    cols = np.arange(width) * GLYPH_WIDTH // width
    return GLYPHS[letter][np.ix_(rows, cols)]
