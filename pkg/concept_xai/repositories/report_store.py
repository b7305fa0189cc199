"""
Report Repository

실험 리포트(JSON), CSV 테이블, Markdown 요약(Jinja2)을 기록합니다.
"""

from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Any, Dict, Iterable, Sequence, Union

import pandas as pd
from jinja2 import Environment, StrictUndefined
from pydantic import BaseModel

from ..exceptions import RepositoryError
from ..models import ExperimentReport

# 로깅 설정
logger = logging.getLogger(__name__)

SUMMARY_TEMPLATE = """\
# 검증 실험 요약: {{ report.provenance.experiment_name }}

- seed: {{ report.provenance.seed }}
- 설정 해시: `{{ report.provenance.config_hash }}`
- 설명 레이어: `{{ report.layer }}`, IG steps: {{ report.ig_steps }}

## 교환 태그 테스트 정확도

| tag fraction |{% for name in report.class_names %} {{ name }} |{% endfor %}
|---|{% for name in report.class_names %}---|{% endfor %}
{% for p in report.tag_fractions -%}
| {{ "%.0f%%" | format(p * 100) }} |{% for name in report.class_names %} {{ "n/a" if swapped[name].get(p) is none else "%.3f" | format(swapped[name][p]) }} |{% endfor %}
{% endfor %}
## 개념 기여도 (평균 ± 표준편차)

| tag fraction | concept | class | mean | std |
|---|---|---|---|---|
{% for row in report.attributions -%}
| {{ "%.0f%%" | format(row.tag_fraction * 100) }} | {{ row.concept }} | {{ row.class_name }} | {{ "%.4f" | format(row.mean) }} | {{ "%.4f" | format(row.std) }} |
{% endfor %}
## TCAV (* = 유의하지 않음, p > 0.05)

| tag fraction | concept | class | score | p-value |
|---|---|---|---|---|
{% for row in report.tcav -%}
| {{ "%.0f%%" | format(row.tag_fraction * 100) }} | {{ row.concept }} | {{ row.class_name }} | {{ "%.3f" | format(row.score) }}{% if not row.significant %}*{% endif %} | {{ "%.4f" | format(row.p_value) }} |
{% endfor %}
## IG completeness 상대 잔차

| model | layer | steps | median | max | 조밀 steps | 조밀 median |
|---|---|---|---|---|---|---|
{% for stat in report.residuals -%}
| {{ stat.model_id }} | {{ stat.layer }} | {{ stat.steps }} | {{ "%.2e" | format(stat.median_relative_residual) }} | {{ "%.2e" | format(stat.max_relative_residual) }} | {{ "n/a" if stat.convergence_steps is none else stat.convergence_steps }} | {{ "n/a" if stat.convergence_median_relative_residual is none else "%.2e" | format(stat.convergence_median_relative_residual) }} |
{% endfor %}
## 상관 통계

{% for stat in report.correlations -%}
- {{ stat.name }}: rho = {{ "n/a" if stat.rho is none else "%.3f" | format(stat.rho) }}
{% endfor %}
## 검사 결과

{% for check in report.checks -%}
- [{{ "PASS" if check.passed else "FAIL" }}] {{ check.name }}{% if check.detail %}: {{ check.detail }}{% endif %}
{% endfor %}
"""


def rows_to_frame(rows: Iterable[Union[BaseModel, Dict[str, Any]]]) -> pd.DataFrame:
    records = [row.model_dump() if isinstance(row, BaseModel) else dict(row) for row in rows]
    return pd.DataFrame.from_records(records)


class ReportStore:
    """리포트 산출물 저장소"""

    def __init__(self, root: Union[str, Path]):
        self.root = Path(root)
        self._env = Environment(undefined=StrictUndefined, keep_trailing_newline=True, autoescape=False)

    def _path(self, name: str) -> Path:
        self.root.mkdir(parents=True, exist_ok=True)
        return self.root / name

    def write_table(self, name: str, rows: Sequence[Union[BaseModel, Dict[str, Any]]]) -> Path:
        """행 목록을 CSV 로 저장"""
        path = self._path(name)
        try:
            rows_to_frame(rows).to_csv(path, index=False, lineterminator="\n")
        except OSError as e:
            raise RepositoryError(
                f"테이블 저장 실패: {e}", repository_name="ReportStore", operation_type="save", resource=str(path)
            ) from e
        logger.debug("테이블 저장: %s (%d행)", path, len(rows))
        return path

    def write_json(self, name: str, payload: Any) -> Path:
        path = self._path(name)
        try:
            path.write_text(json.dumps(payload, indent=2, sort_keys=True, ensure_ascii=False), encoding="utf-8")
        except OSError as e:
            raise RepositoryError(
                f"JSON 저장 실패: {e}", repository_name="ReportStore", operation_type="save", resource=str(path)
            ) from e
        return path

    def render_summary(self, report: ExperimentReport) -> str:
        swapped = {
            name: {row.tag_fraction: row.accuracy for row in report.accuracy if row.dataset == "swapped" and row.class_name == name}
            for name in report.class_names
        }
        template = self._env.from_string(SUMMARY_TEMPLATE)
        return template.render(report=report, swapped=swapped)

    def save_report(self, report: ExperimentReport) -> Dict[str, Path]:
        """
        report.json, CSV 테이블, summary.md 저장

        Returns:
            산출물 이름 -> 경로
        """
        paths: Dict[str, Path] = {}
        report_path = self._path("report.json")
        try:
            report_path.write_text(report.model_dump_json(indent=2), encoding="utf-8")
        except OSError as e:
            raise RepositoryError(
                f"리포트 저장 실패: {e}", repository_name="ReportStore", operation_type="save", resource=str(report_path)
            ) from e
        paths["report"] = report_path
        paths["accuracy"] = self.write_table("accuracy.csv", report.accuracy)
        paths["attributions"] = self.write_table("attributions.csv", report.attributions)
        paths["tcav"] = self.write_table("tcav.csv", report.tcav)
        paths["correlations"] = self.write_table(
            "correlations.csv",
            [{"name": s.name, "x": s.x_label, "y": s.y_label, "rho": s.rho, "p_value": s.p_value} for s in report.correlations],
        )
        summary_path = self._path("summary.md")
        summary_path.write_text(self.render_summary(report), encoding="utf-8")
        paths["summary"] = summary_path
        logger.info("리포트 저장 완료: %s", self.root)
        return paths

    def load_report(self, path: Union[str, Path, None] = None) -> ExperimentReport:
        src = Path(path) if path is not None else self.root / "report.json"
        try:
            return ExperimentReport.model_validate_json(src.read_text(encoding="utf-8"))
        except OSError as e:
            raise RepositoryError(
                f"리포트 읽기 실패: {e}", repository_name="ReportStore", operation_type="load", resource=str(src)
            ) from e
