"""
차트 생성 (matplotlib Agg 백엔드)

리포트 값에서만 그려지는 파생 뷰입니다. 모든 함수는 저장된 파일 경로를 반환합니다.
"""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Union

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

# 로깅 설정
logger = logging.getLogger(__name__)

FIGURE_DPI = 100
FIGURE_SIZE = (6.4, 4.0)


def _save(fig, path: Union[str, Path]) -> Path:
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    # 재실행 시 동일 바이트를 위해 메타데이터 제거
    metadata = {"Software": None} if out.suffix.lower() == ".png" else {"Date": None, "Creator": None}
    fig.savefig(out, dpi=FIGURE_DPI, metadata=metadata)
    plt.close(fig)
    logger.debug("차트 저장: %s", out)
    return out


def grouped_bar_chart(
    path: Union[str, Path],
    groups: Sequence[str],
    series: Dict[str, Sequence[float]],
    errors: Optional[Dict[str, Sequence[float]]] = None,
    title: str = "",
    ylabel: str = "",
    ylim: Optional[Sequence[float]] = (0.0, 1.0),
    markers: Optional[Dict[str, Sequence[bool]]] = None,
) -> Path:
    """
    그룹 막대 차트 (그룹 = x축 범주, 시리즈 = 막대 색)

    Args:
        markers: 시리즈별 True 인 막대 위에 '*' 표시 (예: 유의하지 않은 TCAV 점수)
    """
    if not groups or not series:
        raise ValueError("막대 차트에 그룹과 시리즈가 필요합니다")
    fig, ax = plt.subplots(figsize=FIGURE_SIZE)
    x = np.arange(len(groups), dtype=np.float64)
    width = 0.8 / len(series)
    for i, (label, values) in enumerate(series.items()):
        offsets = x - 0.4 + width * (i + 0.5)
        err = None if errors is None else errors.get(label)
        ax.bar(offsets, values, width=width, yerr=err, capsize=2 if err is not None else 0, label=label)
        if markers and label in markers:
            for xpos, value, flag in zip(offsets, values, markers[label]):
                if flag:
                    ax.text(xpos, value + 0.02, "*", ha="center", va="bottom")
    ax.set_xticks(x)
    ax.set_xticklabels(groups)
    if ylim is not None:
        ax.set_ylim(*ylim)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.legend(fontsize="small")
    return _save(fig, path)


def line_chart(
    path: Union[str, Path],
    x: Sequence[float],
    series: Dict[str, Mapping[float, float]],
    title: str = "",
    xlabel: str = "",
    ylabel: str = "",
    ylim: Optional[Sequence[float]] = (0.0, 1.0),
) -> Path:
    """
    x 공유 꺾은선 차트 (시리즈마다 선 하나)

    series 값은 x -> y 매핑이며, 값이 없거나 NaN 인 x 는 건너뜁니다.
    x 는 눈금 위치로 쓰이고, x 에 없는 키는 그리지 않습니다.
    """
    if not series:
        raise ValueError("꺾은선 차트에 시리즈가 필요합니다")
    fig, ax = plt.subplots(figsize=FIGURE_SIZE)
    for label, points in series.items():
        pairs = [(p, float(points[p])) for p in x if p in points and np.isfinite(points[p])]
        xs = [p for p, _ in pairs]
        ys = [v for _, v in pairs]
        ax.plot(xs, ys, marker="o", label=label)
    ax.set_xticks(list(x))
    if ylim is not None:
        ax.set_ylim(*ylim)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.grid(alpha=0.3)
    ax.legend(fontsize="small")
    return _save(fig, path)


def percent_labels(fractions: Sequence[float]) -> List[str]:
    return [f"{int(round(p * 100))}%" for p in fractions]
