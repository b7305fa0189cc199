"""구조 명세와 체크포인트 모델"""

import numpy as np
import pytest
from pydantic import ValidationError as PydanticValidationError

from concept_xai.models import ArchitectureSpec, LayerSpec, validation_architecture
from concept_xai.services import build_architecture
from concept_xai.config import ArchitectureConfig


def test_default_validation_layout_shapes():
    arch = validation_architecture([16, 16, 32, 32, 64, 64], pool_after=[2, 4])
    shapes = arch.layer_shapes()
    assert arch.is_validation_layout()
    assert shapes["conv1"] == (64, 64, 16)
    assert shapes["conv6"] == (16, 16, 64)
    assert arch.explainable_layers() == [f"conv{i}" for i in range(1, 7)]
    assert arch.logits_layer == "logits"


def test_head_units_must_match_num_classes():
    with pytest.raises(PydanticValidationError):
        ArchitectureSpec(
            input_shape=(8, 8, 3),
            num_classes=3,
            layers=[
                LayerSpec(kind="conv", name="c", out_channels=2),
                LayerSpec(kind="gap", name="g"),
                LayerSpec(kind="dense", name="logits", units=2, activation=None),
            ],
        )


def test_duplicate_layer_names_rejected():
    with pytest.raises(PydanticValidationError):
        ArchitectureSpec(
            input_shape=(8, 8, 3),
            num_classes=2,
            layers=[
                LayerSpec(kind="conv", name="c", out_channels=2),
                LayerSpec(kind="conv", name="c", out_channels=2),
                LayerSpec(kind="gap", name="g"),
                LayerSpec(kind="dense", name="logits", units=2, activation=None),
            ],
        )


def test_class_labels_and_head_mode():
    arch = validation_architecture([2], image_size=8, num_classes=2, pool_after=[], class_names=["taxi", "zebra"])
    assert arch.class_label(1) == "zebra"
    assert arch.class_label(5) == "5"
    assert arch.head_mode() == "binary"
    assert validation_architecture([2], image_size=8, num_classes=3, pool_after=[]).head_mode() == "multiclass"


def test_init_params_is_seeded():
    arch = validation_architecture([3, 4], image_size=8, pool_after=[1])
    a, b = arch.init_params(5), arch.init_params(5)
    assert set(a) == set(arch.param_shapes())
    for name in a:
        np.testing.assert_array_equal(a[name], b[name])
    assert not np.array_equal(a["conv1/kernel"], arch.init_params(6)["conv1/kernel"])


def test_build_architecture_from_config():
    arch = build_architecture(ArchitectureConfig(), 64, ["cucumber", "taxi", "zebra"])
    assert arch.is_validation_layout()
    assert arch.class_names == ["cucumber", "taxi", "zebra"]
    assert arch.num_classes == 3


def test_checkpoint_is_frozen(tiny_model):
    with pytest.raises(ValueError):
        tiny_model.params["conv1/kernel"][0, 0, 0, 0] = 1.0
    assert tiny_model.model_id == "tiny"
    assert tiny_model.num_classes == 3
