"""
공통 테스트 픽스처

작은 구조/모델, 고정 seed rng, 축소된 합성 데이터 설정을 제공합니다.
"""

import os
import sys
from pathlib import Path

import numpy as np
import pytest

PROJECT_ROOT = Path(__file__).resolve().parent.parent
if str(PROJECT_ROOT) not in sys.path:
    sys.path.insert(0, str(PROJECT_ROOT))

os.environ.setdefault("APP_ENVIRONMENT", "testing")

from concept_xai.config import CohortConfig, DatasetConfig, ExperimentConfig  # noqa: E402
from concept_xai.models import Checkpoint, TrainingMetadata, validation_architecture  # noqa: E402

CLASS_NAMES = ["cucumber", "taxi", "zebra"]


def make_model(conv_channels=(4, 6), image_size=8, num_classes=3, pool_after=(1,), seed=0, model_id="tiny"):
    names = CLASS_NAMES[:num_classes] if num_classes <= len(CLASS_NAMES) else []
    arch = validation_architecture(
        list(conv_channels),
        image_size=image_size,
        num_classes=num_classes,
        pool_after=list(pool_after),
        class_names=names,
    )
    params = arch.init_params(seed)
    # bias 를 0 이 아닌 값으로 두어 ReLU 경계가 한쪽으로 몰리지 않게 함
    rng = np.random.default_rng(seed + 100)
    for name in params:
        if name.endswith("/bias"):
            params[name] = rng.normal(0.0, 0.1, size=params[name].shape)
    metadata = TrainingMetadata(seed=seed, epochs=1, learning_rate=0.01, momentum=0.9, batch_size=4, model_id=model_id)
    return Checkpoint(architecture=arch, params=params, metadata=metadata).freeze()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_model():
    return make_model()


@pytest.fixture
def binary_model():
    return make_model(num_classes=2, seed=3, model_id="binary")


@pytest.fixture
def tiny_images(rng):
    return rng.uniform(0.0, 1.0, size=(6, 8, 8, 3))


@pytest.fixture
def small_dataset_config():
    return DatasetConfig(
        image_size=32,
        train_per_class=6,
        holdout_per_class=3,
        swapped_per_class=4,
        tag_fractions=[0.0, 0.5, 1.0],
        seed=7,
    )


@pytest.fixture
def small_cohorts():
    return CohortConfig(
        concept_positives=4,
        entity_negatives=4,
        tag_negatives=4,
        class_images=3,
        heldout_concept=2,
        tcav_runs=2,
        tcav_pool_size=2,
    )


@pytest.fixture
def tiny_experiment_config(small_dataset_config, small_cohorts, tmp_path):
    return ExperimentConfig.model_validate(
        {
            "name": "tiny",
            "seed": 7,
            "dataset": small_dataset_config.model_dump(),
            "architecture": {"conv_channels": [4, 4, 6], "pool_after": [1, 2]},
            "train": {"learning_rate": 0.05, "momentum": 0.9, "batch_size": 6, "epochs": 2, "seed": 7},
            "cohorts": small_cohorts.model_dump(),
            "explain": {"ig_steps": 8, "convergence_steps": 32, "layers": None, "topk": 2},
            "output_dir": str(tmp_path / "validation"),
        }
    )
