"""
검증 실험 서비스

태그 비율별 데이터셋 생성 → 모델 학습 → 평가 → CAV → 개념 기여도 → TCAV → 리포트 순서로
전체 검증 실험을 실행합니다. 각 단계는 StageErrorHandler 로 감싸져 실패 시
단계 이름이 붙은 오류와 errors.json 을 남기고, 이미 생성된 산출물은 보존됩니다.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field
from importlib import metadata
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..config import ExperimentConfig
from ..exceptions import StageErrorHandler
from ..models import (
    CANONICAL_TAGS,
    AccuracyRow,
    AttributionRow,
    Checkpoint,
    ConceptExampleSets,
    ConceptLayerArtifact,
    CorrelationStat,
    Dataset,
    DatasetFamily,
    ExperimentReport,
    Provenance,
    ResidualStat,
    TcavRow,
    TrendCheck,
    tag_concept_id,
)
from ..repositories import BinaryCheckpointStore, CavStore, DatasetStore, ReportStore
from ..utils.charts import grouped_bar_chart, line_chart, percent_labels
from ..utils.statistics import is_non_increasing, median, spearman, variance
from .attribution_service import AttributionService
from .baseline_service import BaselineService
from .cav_service import CavService
from .conceptmap_service import ConceptMapService
from .model_service import ModelService, build_architecture
from .synthdata_service import SyntheticDataService

# 로깅 설정
logger = logging.getLogger(__name__)

TRACKED_PACKAGES = ("numpy", "scipy", "pandas", "matplotlib", "pydantic")
RHO_THRESHOLD = 0.8
RESIDUAL_SAMPLE = 50
RESIDUAL_TOLERANCE = 0.05
RESIDUAL_FLOOR = 1e-9
DISCRIMINATION_RATIO = 2.0
SCALE_TOLERANCE = 1e-12


def model_id_for(fraction: float) -> str:
    return f"model_p{int(round(fraction * 100)):03d}"


def config_hash(config: ExperimentConfig) -> str:
    """설정 JSON (키 정렬) 의 SHA-256"""
    payload = json.dumps(config.model_dump(mode="json"), sort_keys=True)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def package_versions() -> Dict[str, str]:
    versions = {}
    for name in TRACKED_PACKAGES:
        try:
            versions[name] = metadata.version(name)
        except metadata.PackageNotFoundError:
            versions[name] = "unknown"
    return versions


@dataclass
class ValidationState:
    """단계 사이에 전달되는 중간 산출물"""

    family: Optional[DatasetFamily] = None
    concept_sets: Optional[ConceptExampleSets] = None
    manifest_hashes: Dict[str, str] = field(default_factory=dict)
    models: Dict[float, Checkpoint] = field(default_factory=dict)
    artifacts: Dict[float, Dict[str, Dict[str, ConceptLayerArtifact]]] = field(default_factory=dict)
    accuracy: List[AccuracyRow] = field(default_factory=list)
    attributions: List[AttributionRow] = field(default_factory=list)
    attribution_values: List[float] = field(default_factory=list)
    scale_violations: int = 0
    tcav: List[TcavRow] = field(default_factory=list)
    residuals: List[ResidualStat] = field(default_factory=list)
    discrimination: Dict[Tuple[float, str], Tuple[float, float]] = field(default_factory=dict)


class ExperimentService:
    """
    검증 실험 오케스트레이터

    Args:
        config: 실험 설정
        output_dir: 산출물 디렉토리 (None 이면 config.output_dir)
        max_workers: 이미지 단위 설명 동시 작업 수
        ig_batch_size: IG 보간 배치 크기
        train_log_every: 학습 로그 주기
    """

    def __init__(
        self,
        config: ExperimentConfig,
        output_dir: Optional[Union[str, Path]] = None,
        max_workers: int = 1,
        ig_batch_size: int = 64,
        train_log_every: int = 1,
    ):
        self.config = config
        self.output_dir = Path(output_dir or config.output_dir)
        self.class_names = list(config.dataset.classes)
        self.model_service = ModelService(log_every=train_log_every)
        self.cav_service = CavService(self.model_service)
        self.conceptmap_service = ConceptMapService(self.model_service)
        self.attribution_service = AttributionService(
            self.model_service, ig_steps=config.explain.ig_steps, ig_batch_size=ig_batch_size, max_workers=max_workers
        )
        self.baseline_service = BaselineService(
            self.model_service,
            n_runs=config.cohorts.tcav_runs,
            pool_size=config.cohorts.tcav_pool_size,
            seed=config.seed,
        )
        self.synth = SyntheticDataService(config.dataset, config.cohorts)
        self.errors = StageErrorHandler(self.output_dir)

    # ------------------------------------------------------------------
    # 공통
    # ------------------------------------------------------------------

    def explained_layer(self, model: Checkpoint) -> str:
        """설정 레이어의 마지막 항목, 없으면 마지막 conv 레이어"""
        if self.config.explain.layers:
            return self.config.explain.layers[-1]
        return model.architecture.explainable_layers()[-1]

    def model_seed(self, index: int) -> int:
        return self.config.train.seed + index

    def concept_kind(self, concept: str) -> str:
        return "entity" if concept in self.class_names else "tag"

    def concept_target(self, concept: str, swapped: Dataset) -> Optional[Tuple[int, np.ndarray]]:
        """
        개념별 (대상 클래스, 설명 이미지)

        엔티티 c: 클래스 c 의 교환 태그 이미지.
        태그 t: 태그 t 의 정규 클래스, 태그 t 가 찍힌 교환 태그 이미지.
        정규 클래스가 실험에 없거나 이미지가 없으면 None.
        """
        limit = self.config.cohorts.class_images
        if concept in self.class_names:
            class_index = self.class_names.index(concept)
            return class_index, swapped.of_class(class_index).images[:limit]
        letter = concept.split("_", 1)[1]
        owners = [name for name in self.class_names if CANONICAL_TAGS[name] == letter]
        if not owners:
            return None
        images = swapped.with_tag(letter).images[:limit]
        if len(images) == 0:
            return None
        return self.class_names.index(owners[0]), images

    # ------------------------------------------------------------------
    # 단계
    # ------------------------------------------------------------------

    def stage_dataset(self, state: ValidationState) -> None:
        state.family = self.synth.build_family()
        state.manifest_hashes = DatasetStore(self.output_dir / "datasets").save_family(state.family)
        state.concept_sets = self.synth.concept_example_sets(state.family)

    def stage_train(self, state: ValidationState) -> None:
        family = state.family
        store = BinaryCheckpointStore()
        arch = build_architecture(self.config.architecture, family.image_size, self.class_names)
        for index, fraction in enumerate(family.fractions()):
            model_id = model_id_for(fraction)
            train_cfg = self.config.train.model_copy(update={"seed": self.model_seed(index)})
            model = self.model_service.train(arch, family.train[fraction], family.holdout, train_cfg, model_id=model_id)
            store.save(model, self.output_dir / "models" / f"{model_id}.ckpt")
            state.models[fraction] = model

    def stage_evaluate(self, state: ValidationState) -> None:
        for index, (fraction, model) in enumerate(sorted(state.models.items())):
            for dataset in (state.family.holdout, state.family.swapped):
                result = self.model_service.evaluate(model, dataset)
                for c, name in enumerate(self.class_names):
                    state.accuracy.append(
                        AccuracyRow(
                            model_id=model.model_id,
                            tag_fraction=fraction,
                            dataset=dataset.name,
                            class_name=name,
                            accuracy=result.per_class_accuracy[c],
                            count=result.counts[c],
                            seed=self.model_seed(index),
                        )
                    )
            logger.info("평가 완료: %s", model.model_id)

    def stage_cav(self, state: ValidationState) -> None:
        concept_sets = state.concept_sets.all()
        for fraction, model in sorted(state.models.items()):
            layer = self.explained_layer(model)
            table = self.cav_service.learn_all(model, concept_sets, [layer])
            store = CavStore(self.output_dir / "cavs" / model.model_id)
            for per_layer in table.values():
                for artifact in per_layer.values():
                    store.save(artifact, model_id=model.model_id)
            state.artifacts[fraction] = table
            for concept, examples in concept_sets.items():
                state.discrimination[(fraction, concept)] = self.conceptmap_service.heldout_discrimination(
                    model, table[concept][layer], examples.heldout_positives, examples.heldout_negatives
                )

    def stage_explain(self, state: ValidationState) -> None:
        swapped = state.family.swapped
        for index, (fraction, model) in enumerate(sorted(state.models.items())):
            layer = self.explained_layer(model)
            table = state.artifacts[fraction]
            for concept in table:
                target = self.concept_target(concept, swapped)
                if target is None:
                    logger.warning("개념 '%s' 의 설명 이미지가 없어 건너뜁니다", concept)
                    continue
                class_index, images = target
                result = self.attribution_service.global_attribution(
                    model, images, {concept: table[concept]}, class_index, [layer]
                )
                summary = result[concept][layer]
                violations = sum(1 for v, s in zip(summary.values, summary.scales) if v > s + SCALE_TOLERANCE)
                state.attribution_values.extend(summary.values)
                state.scale_violations += violations
                state.attributions.append(
                    AttributionRow(
                        model_id=model.model_id,
                        tag_fraction=fraction,
                        concept=concept,
                        concept_kind=self.concept_kind(concept),
                        class_name=self.class_names[class_index],
                        layer=layer,
                        mean=summary.mean,
                        std=summary.std,
                        count=summary.count,
                        max_class_scale_violations=violations,
                        inactive=table[concept][layer].inactive,
                        seed=self.model_seed(index),
                    )
                )
            state.residuals.append(self._residual_stat(model, swapped, layer))

    def _residual_stat(self, model: Checkpoint, swapped: Dataset, layer: str) -> ResidualStat:
        """설정 step 수와 더 조밀한 step 수에서 상대 residual 을 함께 측정"""
        images = swapped.images[:RESIDUAL_SAMPLE]
        probabilities = self.model_service.predict_proba(model, images)
        steps = self.config.explain.ig_steps
        fine = max(self.config.explain.convergence_steps, steps)
        steps_list = [steps] if fine == steps else [steps, fine]
        sweeps = [
            self.attribution_service.residual_sweep(model, image, layer, int(np.argmax(probs)), steps_list)
            for image, probs in zip(images, probabilities)
        ]
        residuals = [sweep[steps] for sweep in sweeps]
        converged = [sweep[fine] for sweep in sweeps] if fine != steps else None
        stat = ResidualStat(
            model_id=model.model_id,
            layer=layer,
            steps=steps,
            count=len(residuals),
            median_relative_residual=median(residuals),
            max_relative_residual=float(max(residuals)),
            convergence_steps=fine if converged else None,
            convergence_median_relative_residual=median(converged) if converged else None,
        )
        logger.debug(
            "IG residual: model=%s, layer=%s, steps=%d -> %.3g, convergence=%s -> %s",
            model.model_id,
            layer,
            steps,
            stat.median_relative_residual,
            stat.convergence_steps,
            stat.convergence_median_relative_residual,
        )
        return stat

    def stage_tcav(self, state: ValidationState) -> None:
        concept_sets = state.concept_sets.all()
        negative_pool = self.synth.random_pool(state.family)
        for index, (fraction, model) in enumerate(sorted(state.models.items())):
            layer = self.explained_layer(model)
            for concept, examples in concept_sets.items():
                target = self.concept_target(concept, state.family.swapped)
                if target is None:
                    continue
                class_index, images = target
                result = self.baseline_service.tcav_significance(
                    model, images, examples.positives, negative_pool, layer, class_index, concept=concept
                )
                state.tcav.append(
                    TcavRow(
                        model_id=model.model_id,
                        tag_fraction=fraction,
                        concept=concept,
                        concept_kind=self.concept_kind(concept),
                        class_name=self.class_names[class_index],
                        layer=layer,
                        score=result.score,
                        p_value=result.p_value,
                        n_runs=result.n_runs,
                        significant=result.significant,
                        seed=self.model_seed(index),
                    )
                )

    # ------------------------------------------------------------------
    # 리포트
    # ------------------------------------------------------------------

    def build_report(self, state: ValidationState) -> ExperimentReport:
        fractions = state.family.fractions()
        layer = self.explained_layer(next(iter(state.models.values())))
        report = ExperimentReport(
            class_names=self.class_names,
            tag_fractions=fractions,
            layer=layer,
            ig_steps=self.config.explain.ig_steps,
            accuracy=state.accuracy,
            attributions=state.attributions,
            tcav=state.tcav,
            residuals=state.residuals,
            provenance=Provenance(
                experiment_name=self.config.name,
                seed=self.config.seed,
                config_hash=config_hash(self.config),
                manifest_hashes=state.manifest_hashes,
                versions=package_versions(),
                model_seeds={model_id_for(p): self.model_seed(i) for i, p in enumerate(fractions)},
            ),
        )
        report.correlations = self.correlations(report)
        report.checks = self.checks(report, state)
        return report

    def correlations(self, report: ExperimentReport) -> List[CorrelationStat]:
        stats: List[CorrelationStat] = []
        for letter in sorted(set(CANONICAL_TAGS[name] for name in self.class_names)):
            concept = tag_concept_id(letter)
            covered = {r.tag_fraction for r in report.attributions if r.concept == concept}
            xs = [p for p in report.tag_fractions if p in covered]
            series = report.attribution_for(concept)
            rho, p_value = spearman(xs, series) if len(series) >= 2 else (None, None)
            stats.append(
                CorrelationStat(
                    name=f"fraction_vs_attribution[{concept}]",
                    x_label="tag_fraction",
                    y_label=f"attribution[{concept}]",
                    x=xs,
                    y=series,
                    rho=rho,
                    p_value=p_value,
                )
            )
        for name in self.class_names:
            attribution = report.attribution_for(name)
            accuracy = report.accuracy_for("swapped", name)
            usable = min(len(attribution), len(accuracy))
            rho, p_value = spearman(attribution[:usable], accuracy[:usable]) if usable >= 2 else (None, None)
            stats.append(
                CorrelationStat(
                    name=f"attribution_vs_accuracy[{name}]",
                    x_label=f"attribution[{name}]",
                    y_label=f"swapped_accuracy[{name}]",
                    x=attribution[:usable],
                    y=accuracy[:usable],
                    rho=rho,
                    p_value=p_value,
                )
            )
        return stats

    def _rho_check(self, name: str, stats: Sequence[CorrelationStat], required: int) -> TrendCheck:
        values = {s.name: s.rho for s in stats}
        passing = sum(1 for s in stats if s.rho is not None and s.rho >= RHO_THRESHOLD)
        return TrendCheck(
            name=name,
            passed=passing >= required,
            detail=f"rho >= {RHO_THRESHOLD} 인 항목 {passing}/{len(stats)} (필요 {required})",
            values=values,
        )

    def checks(self, report: ExperimentReport, state: ValidationState) -> List[TrendCheck]:
        checks: List[TrendCheck] = []
        fractions = report.tag_fractions

        if "cucumber" in self.class_names:
            series = report.accuracy_for("swapped", "cucumber")
            checks.append(
                TrendCheck(
                    name="swapped_accuracy_non_increasing[cucumber]",
                    passed=is_non_increasing(series),
                    detail="역전 1회, 2%p 이내 허용",
                    values={f"{p:.2f}": v for p, v in zip(fractions, series)},
                )
            )

        tag_stats = [s for s in report.correlations if s.name.startswith("fraction_vs_attribution")]
        entity_stats = [s for s in report.correlations if s.name.startswith("attribution_vs_accuracy")]
        checks.append(self._rho_check("tag_attribution_rises_with_fraction", tag_stats, min(2, len(tag_stats))))
        checks.append(self._rho_check("entity_attribution_tracks_accuracy", entity_stats, min(2, len(entity_stats))))

        out_of_range = sum(1 for v in state.attribution_values if not 0.0 <= v <= 1.0)
        out_of_range += sum(1 for r in report.attributions if not 0.0 <= r.mean <= 1.0)
        checks.append(
            TrendCheck(
                name="attribution_bounds",
                passed=out_of_range == 0 and state.scale_violations == 0,
                detail=(
                    f"[0, 1] 범위 밖 값 {out_of_range}개, 클래스 n_t 초과 {state.scale_violations}개 "
                    f"/ 이미지 값 {len(state.attribution_values)}개, 평균 {len(report.attributions)}개"
                ),
            )
        )

        for stat in report.residuals:
            checks.append(
                TrendCheck(
                    name=f"ig_completeness[{stat.model_id}]",
                    passed=stat.max_relative_residual <= RESIDUAL_TOLERANCE,
                    detail=f"steps={stat.steps}, 표본 {stat.count}개",
                    values={"median": stat.median_relative_residual, "max": stat.max_relative_residual},
                )
            )
            if stat.convergence_median_relative_residual is not None:
                coarse, fine = stat.median_relative_residual, stat.convergence_median_relative_residual
                checks.append(
                    TrendCheck(
                        name=f"ig_convergence[{stat.model_id}]",
                        passed=fine < coarse or fine <= RESIDUAL_FLOOR,
                        detail=f"median residual steps={stat.steps} -> steps={stat.convergence_steps}",
                        values={"coarse": coarse, "fine": fine},
                    )
                )

        checks.extend(self._tcav_checks(report))
        checks.extend(self._discrimination_checks(state))
        return checks

    def _tcav_checks(self, report: ExperimentReport) -> List[TrendCheck]:
        checks: List[TrendCheck] = []
        if not report.tcav:
            return checks
        fractions = report.tag_fractions
        lowest, highest = fractions[0], fractions[-1]
        by_key = {(r.tag_fraction, r.concept): r for r in report.tcav}
        attribution = {(r.tag_fraction, r.concept): r.mean for r in report.attributions}
        tags = [tag_concept_id(CANONICAL_TAGS[name]) for name in self.class_names]

        entity_rows = [by_key[(lowest, c)] for c in self.class_names if (lowest, c) in by_key]
        tag_rows = [by_key[(lowest, t)] for t in tags if (lowest, t) in by_key]
        checks.append(
            TrendCheck(
                name="tcav_untagged_model",
                passed=all(r.score >= 0.9 for r in entity_rows)
                and all((not r.significant) or 0.35 <= r.score <= 0.65 for r in tag_rows),
                detail="엔티티 점수 >= 0.9, 태그는 유의하지 않거나 [0.35, 0.65]",
                values={r.concept: r.score for r in entity_rows + tag_rows},
            )
        )

        strong = [tag_concept_id(t) for t in ("T", "C")]
        weak = tag_concept_id("Z")
        strong_rows = [by_key[(highest, t)] for t in strong if (highest, t) in by_key]
        weak_row = by_key.get((highest, weak))
        weak_ok = weak_row is None or (
            ((not weak_row.significant) or weak_row.score <= 0.6) and attribution.get((highest, weak), 0.0) <= 0.1
        )
        checks.append(
            TrendCheck(
                name="tcav_fully_tagged_model",
                passed=all(r.significant and r.score >= 0.8 for r in strong_rows) and weak_ok,
                detail="T/C 태그 유의 + 점수 >= 0.8, Z 태그는 유의하지 않거나 <= 0.6 이고 기여도 <= 0.1",
                values={r.concept: r.score for r in strong_rows + ([weak_row] if weak_row else [])},
            )
        )

        partial = [p for p in fractions if p < highest]
        tcav_var, attr_var = 0.0, 0.0
        for name in self.class_names:
            scores = [by_key[(p, name)].score for p in partial if (p, name) in by_key]
            means = [attribution[(p, name)] for p in partial if (p, name) in attribution]
            tcav_var += variance(_unit_scale(scores))
            attr_var += variance(_unit_scale(means))
        checks.append(
            TrendCheck(
                name="tcav_flatter_than_attribution",
                passed=tcav_var < attr_var,
                detail="0-75% 모델의 엔티티 TCAV 분산 < 엔티티 기여도 분산 (각 시계열 최대값으로 정규화)",
                values={"tcav_variance": tcav_var, "attribution_variance": attr_var},
            )
        )
        return checks

    def _discrimination_checks(self, state: ValidationState) -> List[TrendCheck]:
        if not state.discrimination:
            return []
        fractions = state.family.fractions()
        lowest, highest = fractions[0], fractions[-1]
        tags = [tag_concept_id(CANONICAL_TAGS[name]) for name in self.class_names]
        checks = []
        for label, fraction, concepts in (
            ("entity_map_discrimination", lowest, self.class_names),
            ("tag_map_discrimination", highest, tags),
        ):
            values: Dict[str, float] = {}
            passed = True
            for concept in concepts:
                pos, neg = state.discrimination.get((fraction, concept), (0.0, 0.0))
                values[f"{concept}/positive"] = pos
                values[f"{concept}/negative"] = neg
                passed = passed and pos > 0.0 and pos >= DISCRIMINATION_RATIO * neg
            checks.append(
                TrendCheck(
                    name=f"{label}[{model_id_for(fraction)}]",
                    passed=passed,
                    detail=f"held-out positive 평균 >= {DISCRIMINATION_RATIO} × negative 평균",
                    values=values,
                )
            )
        return checks

    def render_charts(self, report: ExperimentReport) -> Dict[str, Path]:
        """리포트 값으로부터 차트 생성"""
        charts_dir = self.output_dir / "charts"
        fractions = report.tag_fractions
        paths = {
            "accuracy": line_chart(
                charts_dir / "accuracy_vs_fraction.png",
                fractions,
                {name: report.accuracy_points("swapped", name) for name in report.class_names},
                title="Swapped-tag accuracy",
                xlabel="tag fraction",
                ylabel="accuracy",
            ),
        }
        concepts = sorted({r.concept for r in report.attributions})
        if concepts:
            paths["attribution"] = line_chart(
                charts_dir / "attribution_vs_fraction.png",
                fractions,
                {concept: report.attribution_points(concept) for concept in concepts},
                title=f"Concept attribution ({report.layer})",
                xlabel="tag fraction",
                ylabel="attribution",
            )
        if report.tcav:
            tcav_concepts = sorted({r.concept for r in report.tcav})
            rows = {(r.tag_fraction, r.concept): r for r in report.tcav}
            paths["tcav"] = grouped_bar_chart(
                charts_dir / "tcav_scores.png",
                groups=percent_labels(fractions),
                series={c: [rows[(p, c)].score if (p, c) in rows else 0.0 for p in fractions] for c in tcav_concepts},
                markers={c: [(p, c) in rows and not rows[(p, c)].significant for p in fractions] for c in tcav_concepts},
                title="TCAV scores (* = p > 0.05)",
                ylabel="TCAV score",
            )
        return paths

    # ------------------------------------------------------------------
    # 실행
    # ------------------------------------------------------------------

    def run_validation(self) -> ExperimentReport:
        """
        전체 검증 실험 실행

        Returns:
            ExperimentReport: report.json / CSV / summary.md / 차트로도 저장됨

        Raises:
            ExperimentStageError: 실패한 단계 이름과 산출물 디렉토리를 담은 오류
        """
        logger.info("검증 실험 시작: %s -> %s", self.config.name, self.output_dir)
        self.output_dir.mkdir(parents=True, exist_ok=True)
        state = ValidationState()
        with self.errors.stage("dataset"):
            self.stage_dataset(state)
        with self.errors.stage("train"):
            self.stage_train(state)
        with self.errors.stage("evaluate"):
            self.stage_evaluate(state)
        with self.errors.stage("cav"):
            self.stage_cav(state)
        with self.errors.stage("explain"):
            self.stage_explain(state)
        with self.errors.stage("tcav"):
            self.stage_tcav(state)
        with self.errors.stage("report"):
            report = self.build_report(state)
            ReportStore(self.output_dir).save_report(report)
            self.render_charts(report)
        failed = report.failed_checks()
        if failed:
            logger.warning("통과하지 못한 검사: %s", failed)
        logger.info("검증 실험 완료: %s", self.output_dir)
        return report


def _unit_scale(values: Sequence[float]) -> List[float]:
    top = max(values, default=0.0)
    if top <= 0.0:
        return [0.0 for _ in values]
    return [v / top for v in values]
