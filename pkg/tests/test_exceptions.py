"""예외 계층과 단계 에러 핸들러"""

import json

import pytest

from concept_xai.exceptions import (
    CalibrationError,
    CheckpointFormatError,
    ErrorSeverity,
    ErrorType,
    ExperimentStageError,
    ExplainerError,
    RepositoryError,
    StageErrorHandler,
    TrainingDivergenceError,
    ValidationError,
)


def test_hierarchy():
    assert issubclass(CheckpointFormatError, RepositoryError)
    assert issubclass(ExperimentStageError, ExplainerError)
    error = ExplainerError("집계 실패", {"layer": "conv6"})
    assert str(error) == "집계 실패"
    assert error.get_full_message() == "집계 실패 (상세: layer=conv6)"
    assert error.to_dict()["error_type"] == "ExplainerError"


@pytest.mark.parametrize(
    "error, expected",
    [
        (TrainingDivergenceError("nan", epoch=1, learning_rate=0.1), (ErrorType.TRAINING_DIVERGENCE, ErrorSeverity.HIGH)),
        (CalibrationError("range", layer="conv1", lower=1.0, upper=0.5), (ErrorType.CALIBRATION_ERROR, ErrorSeverity.LOW)),
        (ValidationError("bad"), (ErrorType.VALIDATION_ERROR, ErrorSeverity.MEDIUM)),
        (OSError("disk"), (ErrorType.IO_ERROR, ErrorSeverity.HIGH)),
        (ZeroDivisionError(), (ErrorType.CALCULATION_ERROR, ErrorSeverity.MEDIUM)),
        (KeyError("x"), (ErrorType.UNKNOWN_ERROR, ErrorSeverity.HIGH)),
    ],
)
def test_classification(error, expected):
    assert StageErrorHandler().classify_error(error) == expected


def test_stage_wraps_and_records(tmp_path):
    handler = StageErrorHandler(tmp_path)
    with handler.stage("ok"):
        pass
    with pytest.raises(ExperimentStageError) as info:
        with handler.stage("train", model="m"):
            raise ValidationError("빈 데이터셋", field_name="train_set")
    assert info.value.stage == "train"
    assert isinstance(info.value.__cause__, ValidationError)
    history = json.loads((tmp_path / "errors.json").read_text(encoding="utf-8"))
    assert [entry["stage"] for entry in history] == ["train"]
    assert history[0]["details"]["model"] == "m"
    assert handler.get_error_summary() == {"total_errors": 1, "by_stage": {"train": 1}}


def test_nested_stage_error_not_rewrapped():
    handler = StageErrorHandler()
    with pytest.raises(ExperimentStageError) as info:
        with handler.stage("outer"):
            with handler.stage("inner"):
                raise RuntimeError("boom")
    assert info.value.stage == "inner"
    assert len(handler.error_history) == 1
