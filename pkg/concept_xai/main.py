"""
=====================================================================================
개념 기반 CNN 설명 툴킷 CLI
=====================================================================================

## 📋 시스템 개요
numpy 자동미분 CNN 위에서 CAV · 개념 맵 · 레이어 Integrated Gradients 로
개념 기여도를 계산하고, 태그가 찍힌 합성 데이터셋으로 그 결과를 검증하는 명령행 도구입니다.

## 🏗️ 계층 구조
### Presentation Layer (이 모듈)
- 인자 파싱, 실험 설정 로드와 플래그 덮어쓰기
- 오류 → 종료 코드 변환 (0 성공, 1 사용법 오류, 2 실행 실패)

### Service Layer
- SyntheticDataService / ModelService / CavService / ExplanationService
- BaselineService (TCAV) / ExperimentService (검증 실험 전체)

### Repository Layer
- DatasetStore, BinaryCheckpointStore, CavStore, ReportStore

## 🧪 실행 예시
- 데이터셋 생성: `python -m concept_xai.main generate-dataset --config config/experiments/default.yaml`
- 학습: `python -m concept_xai.main train --fraction 0.5 --output-dir outputs/run1`
- CAV 학습: `python -m concept_xai.main compute-cav --model outputs/run1/models/model_p050.ckpt --concepts-dir outputs/run1/concepts`
- 로컬 설명: `python -m concept_xai.main explain-local --model ... --image img.png --cav-dir outputs/run1/cavs`
- 전역 설명: `python -m concept_xai.main explain-global --model ... --images-dir dir --class zebra --cav-dir ...`
- TCAV: `python -m concept_xai.main tcav --model ... --images-dir dir --class zebra --concepts-dir ... --random-dir ...`
- 검증 실험: `python -m concept_xai.main run-validation --config config/experiments/default.yaml`
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence

from config.logging_config import setup_custom_logging_levels
from config.settings import Settings, get_settings

from .config import ExperimentConfig, ExperimentConfigurationError, load_experiment_config
from .exceptions import ExplainerError, ValidationError
from .models import Checkpoint
from .repositories import BinaryCheckpointStore, CavStore, DatasetStore, ReportStore
from .services import (
    AttributionService,
    BaselineService,
    CavService,
    ExperimentService,
    ExplanationService,
    ModelService,
    SyntheticDataService,
    build_architecture,
    model_id_for,
)
from .utils.rendering import read_png

setup_custom_logging_levels()

# 로깅 설정
logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_FAILURE = 2


class CliUsageError(Exception):
    """잘못된 명령행 사용"""


class ExplainerArgumentParser(argparse.ArgumentParser):
    """argparse 기본 동작(SystemExit 2) 대신 CliUsageError 발생"""

    def error(self, message: str) -> None:  # type: ignore[override]
        raise CliUsageError(message)


# ===========================================
# 공통 헬퍼
# ===========================================


def _emit(payload: Dict[str, Any]) -> None:
    print(json.dumps(payload, ensure_ascii=False, indent=2, default=str))


def resolve_config(args: argparse.Namespace, settings: Settings) -> ExperimentConfig:
    """
    실험 설정 로드 후 명령행 플래그 적용

    우선순위: 플래그 > YAML > 스키마 기본값
    """
    config = load_experiment_config(args.config or settings.experiment_config_path)
    if args.seed is not None:
        config = config.with_seed(args.seed)
    explain_updates: Dict[str, Any] = {}
    if getattr(args, "steps", None) is not None:
        explain_updates["ig_steps"] = args.steps
    if getattr(args, "layers", None):
        explain_updates["layers"] = list(args.layers)
    if explain_updates:
        config = config.model_copy(update={"explain": config.explain.model_copy(update=explain_updates)})
    if args.output_dir:
        config = config.model_copy(update={"output_dir": args.output_dir})
    elif "output_dir" not in config.model_fields_set:
        config = config.model_copy(update={"output_dir": str(settings.get_output_dir())})
    return config


def load_model(path: str) -> Checkpoint:
    return BinaryCheckpointStore().load(path)


def resolve_class(model: Checkpoint, value: str) -> int:
    """클래스 이름 또는 인덱스 -> 인덱스"""
    names = list(model.architecture.class_names)
    if value in names:
        return names.index(value)
    try:
        index = int(value)
    except ValueError:
        raise ValidationError(f"알 수 없는 클래스: {value} (가능: {names})", field_name="class", field_value=value) from None
    if not 0 <= index < model.num_classes:
        raise ValidationError(
            f"클래스 인덱스 범위 초과: {index} (클래스 {model.num_classes}개)", field_name="class", field_value=index
        )
    return index


def _services(settings: Settings, config: ExperimentConfig) -> ExplanationService:
    model_service = ModelService(log_every=settings.train_log_every)
    attribution = AttributionService(
        model_service,
        ig_steps=config.explain.ig_steps,
        ig_batch_size=settings.ig_batch_size,
        max_workers=settings.max_workers,
    )
    return ExplanationService(attribution, CavService(model_service), overlay_alpha=config.explain.overlay_alpha)


def _artifacts(explainer: ExplanationService, model: Checkpoint, layers: List[str], args: argparse.Namespace):
    if not args.cav_dir and not args.concepts_dir:
        raise CliUsageError("--cav-dir 또는 --concepts-dir 중 하나가 필요합니다")
    example_sets = None
    if args.concepts_dir:
        example_sets = DatasetStore(args.concepts_dir).load_concept_dir(args.concepts_dir, args.concepts)
    return explainer.load_artifacts(model, layers, cav_dir=args.cav_dir, example_sets=example_sets, concepts=args.concepts)


# ===========================================
# 서브커맨드
# ===========================================


def cmd_generate_dataset(args: argparse.Namespace, settings: Settings) -> int:
    config = resolve_config(args, settings)
    out = Path(config.output_dir)
    synth = SyntheticDataService(config.dataset, config.cohorts)
    family = synth.build_family()
    hashes = DatasetStore(out / "datasets").save_family(family)
    concepts_dir = DatasetStore(out / "concepts").save_concept_examples(synth.concept_example_sets(family).all())
    _emit({"datasets": str(out / "datasets"), "concepts": str(concepts_dir), "manifest_sha256": hashes})
    return EXIT_OK


def cmd_train(args: argparse.Namespace, settings: Settings) -> int:
    config = resolve_config(args, settings)
    if not 0.0 <= args.fraction <= 1.0:
        raise CliUsageError(f"--fraction 은 [0, 1] 범위여야 합니다: {args.fraction}")
    out = Path(config.output_dir)
    synth = SyntheticDataService(config.dataset, config.cohorts)
    class_names = list(config.dataset.classes)
    arch = build_architecture(config.architecture, config.dataset.image_size, class_names)
    model_id = model_id_for(args.fraction)
    model = ModelService(log_every=settings.train_log_every).train(
        arch, synth.build_train_set(args.fraction), synth.build_holdout_set(), config.train, model_id=model_id
    )
    path = BinaryCheckpointStore().save(model, out / "models" / f"{model_id}.ckpt")
    _emit(
        {
            "checkpoint": str(path),
            "train_accuracy": model.metadata.final_train_accuracy,
            "val_accuracy": model.metadata.final_val_accuracy,
        }
    )
    return EXIT_OK


def cmd_compute_cav(args: argparse.Namespace, settings: Settings) -> int:
    config = resolve_config(args, settings)
    model = load_model(args.model)
    explainer = _services(settings, config)
    layers = explainer.resolve_layers(model, config.explain.layers)
    example_sets = DatasetStore(args.concepts_dir).load_concept_dir(args.concepts_dir, args.concepts)
    table = explainer.cav_service.learn_all(model, example_sets, layers)
    store = CavStore(Path(config.output_dir) / "cavs")
    saved = [
        str(store.save(artifact, model_id=model.model_id)) for per_layer in table.values() for artifact in per_layer.values()
    ]
    _emit({"cavs": saved})
    return EXIT_OK


def cmd_explain_local(args: argparse.Namespace, settings: Settings) -> int:
    config = resolve_config(args, settings)
    model = load_model(args.model)
    explainer = _services(settings, config)
    layers = explainer.resolve_layers(model, config.explain.layers)
    artifacts = _artifacts(explainer, model, layers, args)
    image = read_png(args.image)
    rows = explainer.explain_local(
        model,
        image,
        artifacts,
        layers,
        config.output_dir,
        image_id=Path(args.image).stem,
        topk=args.topk or config.explain.topk,
        steps=config.explain.ig_steps,
    )
    _emit({"rows": len(rows), "table": str(Path(config.output_dir) / "local_attributions.csv")})
    return EXIT_OK


def cmd_explain_global(args: argparse.Namespace, settings: Settings) -> int:
    config = resolve_config(args, settings)
    model = load_model(args.model)
    explainer = _services(settings, config)
    layers = explainer.resolve_layers(model, config.explain.layers)
    artifacts = _artifacts(explainer, model, layers, args)
    images = DatasetStore(args.images_dir).load_images(args.images_dir)
    class_index = resolve_class(model, args.target_class)
    rows = explainer.explain_global(
        model, images, class_index, artifacts, layers, config.output_dir, steps=config.explain.ig_steps
    )
    _emit({r.concept + "@" + r.layer: r.mean for r in rows})
    return EXIT_OK


def cmd_tcav(args: argparse.Namespace, settings: Settings) -> int:
    config = resolve_config(args, settings)
    model = load_model(args.model)
    layers = config.explain.layers or [model.architecture.explainable_layers()[-1]]
    store = DatasetStore(args.images_dir)
    class_images = store.load_images(args.images_dir)
    random_pool = store.load_images(args.random_dir)
    example_sets = store.load_concept_dir(args.concepts_dir, args.concepts)
    class_index = resolve_class(model, args.target_class)
    baseline = BaselineService(
        ModelService(),
        n_runs=args.runs or config.cohorts.tcav_runs,
        pool_size=args.pool_size or config.cohorts.tcav_pool_size,
        seed=config.seed,
    )
    rows = []
    for layer in layers:
        for concept, examples in example_sets.items():
            result = baseline.tcav_significance(
                model, class_images, examples.positives, random_pool, layer, class_index, concept=concept
            )
            row = result.to_dict()
            row["class_name"] = model.architecture.class_label(class_index)
            rows.append(row)
    path = ReportStore(config.output_dir).write_table("tcav.csv", rows)
    _emit({"table": str(path), "results": [{k: r[k] for k in ("concept", "layer", "score", "p_value", "significant")} for r in rows]})
    return EXIT_OK


def cmd_run_validation(args: argparse.Namespace, settings: Settings) -> int:
    config = resolve_config(args, settings)
    service = ExperimentService(
        config,
        max_workers=settings.max_workers,
        ig_batch_size=settings.ig_batch_size,
        train_log_every=settings.train_log_every,
    )
    report = service.run_validation()
    _emit(
        {
            "output_dir": str(service.output_dir),
            "checks": {c.name: c.passed for c in report.checks},
            "failed": report.failed_checks(),
        }
    )
    return EXIT_OK


# ===========================================
# 인자 파서
# ===========================================


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", default=None, help="실험 설정 YAML (기본: EXPERIMENT_CONFIG_PATH 또는 default.yaml)")
    parser.add_argument("--seed", type=int, default=None, help="모든 하위 seed 덮어쓰기")
    parser.add_argument("--output-dir", default=None, help="산출물 디렉토리")


def _explain_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--steps", type=int, default=None, help="IG 보간 step 수")
    parser.add_argument("--layers", nargs="+", default=None, help="설명할 레이어 (기본: 설정값 또는 전체)")


def _concept_sources(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--cav-dir", default=None, help="저장된 CAV 디렉토리")
    parser.add_argument("--concepts-dir", default=None, help="개념 예제 디렉토리 루트")
    parser.add_argument("--concepts", nargs="+", default=None, help="사용할 개념 (기본: 전체)")


def build_parser() -> ExplainerArgumentParser:
    parser = ExplainerArgumentParser(prog="concept-xai", description="개념 기반 CNN 설명 툴킷")
    sub = parser.add_subparsers(dest="command", parser_class=ExplainerArgumentParser)
    sub.required = True

    p = sub.add_parser("generate-dataset", help="태그 비율별 합성 데이터셋과 개념 예제 생성")
    _common(p)
    p.set_defaults(handler=cmd_generate_dataset)

    p = sub.add_parser("train", help="태그 비율 p 데이터셋으로 모델 학습")
    _common(p)
    p.add_argument("--fraction", type=float, required=True, help="태그 비율 (0~1)")
    p.set_defaults(handler=cmd_train)

    p = sub.add_parser("compute-cav", help="개념 예제로 CAV 학습 및 저장")
    _common(p)
    _explain_flags(p)
    p.add_argument("--model", required=True)
    p.add_argument("--concepts-dir", required=True)
    p.add_argument("--concepts", nargs="+", default=None)
    p.set_defaults(handler=cmd_compute_cav)

    p = sub.add_parser("explain-local", help="이미지 하나의 개념 기여도와 개념 맵 오버레이")
    _common(p)
    _explain_flags(p)
    _concept_sources(p)
    p.add_argument("--model", required=True)
    p.add_argument("--image", required=True)
    p.add_argument("--topk", type=int, default=None)
    p.set_defaults(handler=cmd_explain_local)

    p = sub.add_parser("explain-global", help="클래스 이미지 집합의 평균 개념 기여도")
    _common(p)
    _explain_flags(p)
    _concept_sources(p)
    p.add_argument("--model", required=True)
    p.add_argument("--images-dir", required=True)
    p.add_argument("--class", dest="target_class", required=True, help="클래스 이름 또는 인덱스")
    p.set_defaults(handler=cmd_explain_global)

    p = sub.add_parser("tcav", help="TCAV 점수와 유의성 검정")
    _common(p)
    p.add_argument("--layers", nargs="+", default=None)
    p.add_argument("--model", required=True)
    p.add_argument("--images-dir", required=True)
    p.add_argument("--class", dest="target_class", required=True)
    p.add_argument("--concepts-dir", required=True)
    p.add_argument("--concepts", nargs="+", default=None)
    p.add_argument("--random-dir", required=True, help="랜덤 negative 풀 이미지 디렉토리")
    p.add_argument("--runs", type=int, default=None)
    p.add_argument("--pool-size", type=int, default=None)
    p.set_defaults(handler=cmd_tcav)

    p = sub.add_parser("run-validation", help="태그 비율 검증 실험 전체 실행")
    _common(p)
    _explain_flags(p)
    p.set_defaults(handler=cmd_run_validation)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    CLI 진입점

    Returns:
        int: 0 성공, 1 사용법/설정 오류, 2 실행 실패
    """
    try:
        args = build_parser().parse_args(argv)
        if getattr(args, "steps", None) is not None and args.steps < 2:
            raise CliUsageError(f"--steps 는 2 이상이어야 합니다: {args.steps}")
        handler: Callable[[argparse.Namespace, Settings], int] = args.handler
        settings = get_settings()
        logger.info(
            "%s v%s: %s 시작 (연산 설정: %s)",
            settings.app_name,
            settings.app_version,
            args.command,
            settings.get_compute_config_dict(),
        )
        return handler(args, settings)
    except CliUsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except ExperimentConfigurationError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except ExplainerError as e:
        logger.debug("실행 실패", exc_info=True)
        print(f"error: {e}", file=sys.stderr)
        return EXIT_FAILURE
    except Exception as e:
        logger.exception("예상치 못한 오류: %s", e)
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
