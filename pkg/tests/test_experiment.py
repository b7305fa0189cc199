"""검증 실험 전체 실행 (축소 설정)"""

import json

import pytest

from concept_xai.exceptions import ExperimentStageError
from concept_xai.repositories import ReportStore
from concept_xai.services import ExperimentService, model_id_for
from concept_xai.services.experiment_service import ValidationState, config_hash


@pytest.fixture
def run(tiny_experiment_config):
    service = ExperimentService(tiny_experiment_config)
    return service, service.run_validation()


def test_model_ids():
    assert model_id_for(0.0) == "model_p000"
    assert model_id_for(0.25) == "model_p025"
    assert model_id_for(1.0) == "model_p100"


def test_report_tables_have_expected_rows(run):
    service, report = run
    # 모델 3개 × (holdout, swapped) × 클래스 3개
    assert len(report.accuracy) == 18
    # 모델 3개 × (엔티티 3 + 태그 3)
    assert len(report.attributions) == 18
    assert len(report.tcav) == 18
    assert {r.layer for r in report.attributions} == {"conv3"}
    assert all(0.0 <= r.mean <= 1.0 for r in report.attributions)
    assert all(r.max_class_scale_violations == 0 for r in report.attributions)
    assert len(report.residuals) == 3


def test_artifacts_are_written(run):
    service, report = run
    out = service.output_dir
    for name in ("report.json", "accuracy.csv", "attributions.csv", "tcav.csv", "correlations.csv", "summary.md"):
        assert (out / name).exists(), name
    for p in (0.0, 0.5, 1.0):
        assert (out / "models" / f"{model_id_for(p)}.ckpt").exists()
        assert len(list((out / "cavs" / model_id_for(p)).glob("*.cav"))) == 6
    for chart in ("accuracy_vs_fraction.png", "attribution_vs_fraction.png", "tcav_scores.png"):
        assert (out / "charts" / chart).exists()
    assert (out / "datasets" / "train_p050" / "manifest.csv").exists()
    assert ReportStore(out).load_report() == report


def test_report_checks_and_provenance(run, tiny_experiment_config):
    _, report = run
    names = {c.name for c in report.checks}
    assert {
        "swapped_accuracy_non_increasing[cucumber]",
        "tag_attribution_rises_with_fraction",
        "entity_attribution_tracks_accuracy",
        "attribution_bounds",
        "tcav_untagged_model",
        "tcav_fully_tagged_model",
        "tcav_flatter_than_attribution",
    } <= names
    assert next(c for c in report.checks if c.name == "attribution_bounds").passed
    provenance = report.provenance
    assert provenance.config_hash == config_hash(tiny_experiment_config)
    assert provenance.model_seeds == {"model_p000": 7, "model_p050": 8, "model_p100": 9}
    assert set(provenance.manifest_hashes) >= {"holdout", "swapped"}


def test_rerun_is_byte_identical(tiny_experiment_config):
    service = ExperimentService(tiny_experiment_config)
    service.run_validation()
    first = (service.output_dir / "report.json").read_bytes()
    ExperimentService(tiny_experiment_config).run_validation()
    assert (service.output_dir / "report.json").read_bytes() == first


def test_stage_failure_is_named(tiny_experiment_config):
    broken = tiny_experiment_config.model_copy(
        update={"explain": tiny_experiment_config.explain.model_copy(update={"layers": ["conv9"]})}
    )
    service = ExperimentService(broken)
    with pytest.raises(ExperimentStageError) as info:
        service.run_validation()
    assert info.value.stage == "cav"
    errors = json.loads((service.output_dir / "errors.json").read_text(encoding="utf-8"))
    assert errors[-1]["stage"] == "cav"
    # 앞 단계 산출물은 보존
    assert (service.output_dir / "models" / "model_p000.ckpt").exists()


def test_residuals_include_finer_step_count(run, tiny_experiment_config):
    _, report = run
    explain = tiny_experiment_config.explain
    for stat in report.residuals:
        assert stat.steps == explain.ig_steps
        assert stat.convergence_steps == explain.convergence_steps
        assert stat.convergence_median_relative_residual is not None
    convergence = [c for c in report.checks if c.name.startswith("ig_convergence[")]
    assert {c.name for c in convergence} == {f"ig_convergence[{model_id_for(p)}]" for p in (0.0, 0.5, 1.0)}
    # 마지막 conv 뒤가 선형이라 잔차가 0 근처
    assert all(c.passed for c in convergence)


def test_out_of_range_mean_is_stored_and_flagged(run):
    service, report = run
    row = report.attributions[0].model_copy(update={"mean": 1.25})
    tampered = report.model_copy(update={"attributions": [row, *report.attributions[1:]]})
    assert tampered.attributions[0].mean == 1.25
    bounds = next(c for c in service.checks(tampered, ValidationState()) if c.name == "attribution_bounds")
    assert not bounds.passed
