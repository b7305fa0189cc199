"""학습 / 평가 / 활성값 캡처"""

import numpy as np
import pytest

from concept_xai.config import TrainConfig
from concept_xai.exceptions import TrainingDivergenceError, ValidationError
from concept_xai.models import Dataset, validation_architecture
from concept_xai.services import ModelService


@pytest.fixture
def color_dataset(rng):
    # 빨강 우세 = 0, 파랑 우세 = 1
    images = rng.uniform(0.0, 0.3, size=(12, 8, 8, 3))
    labels = np.array([0, 1] * 6)
    images[labels == 0, ..., 0] += 0.7
    images[labels == 1, ..., 2] += 0.7
    return Dataset(name="colors", images=images, labels=labels, annotations=[None] * 12, class_names=["red", "blue"])


@pytest.fixture
def color_arch():
    return validation_architecture([4, 4], image_size=8, num_classes=2, pool_after=[1], class_names=["red", "blue"])


def test_training_reduces_loss(color_arch, color_dataset):
    cfg = TrainConfig(learning_rate=0.05, momentum=0.9, batch_size=4, epochs=15, seed=3)
    model = ModelService().train(color_arch, color_dataset, color_dataset, cfg, model_id="colors")
    history = model.metadata.loss_history
    assert len(history) == 15
    assert history[-1] < history[0]
    assert model.model_id == "colors"
    assert 0.0 <= model.metadata.final_val_accuracy <= 1.0


def test_training_is_bit_reproducible(color_arch, color_dataset):
    cfg = TrainConfig(learning_rate=0.05, batch_size=5, epochs=2, seed=11)
    first = ModelService().train(color_arch, color_dataset, None, cfg)
    second = ModelService().train(color_arch, color_dataset, None, cfg)
    for name, value in first.params.items():
        np.testing.assert_array_equal(second.params[name], value)


def test_divergence_is_reported(color_arch, color_dataset):
    color_dataset.images[3, 0, 0, 0] = np.nan
    with pytest.raises(TrainingDivergenceError):
        ModelService().train(color_arch, color_dataset, None, TrainConfig(batch_size=12, epochs=1))


def test_training_rejects_mismatched_images(color_arch, rng):
    wrong = Dataset(name="w", images=rng.uniform(size=(2, 6, 6, 3)), labels=[0, 1], annotations=[None, None], class_names=["a", "b"])
    with pytest.raises(ValidationError):
        ModelService().train(color_arch, wrong, None, TrainConfig(epochs=1))


def test_evaluate_confusion_matrix(tiny_model, tiny_images):
    service = ModelService()
    predictions = service.predict_logits(tiny_model, tiny_images).argmax(axis=1)
    dataset = Dataset(
        name="eval", images=tiny_images, labels=[0, 1, 2, 0, 1, 2], annotations=[None] * 6, class_names=["a", "b", "c"]
    )
    result = service.evaluate(tiny_model, dataset)
    assert result.confusion.sum() == 6
    assert result.accuracy == pytest.approx(float(np.mean(predictions == dataset.labels)))
    assert result.counts == [2, 2, 2]


def test_predictions_are_batch_independent(tiny_model, tiny_images):
    full = ModelService(inference_batch=64).predict_logits(tiny_model, tiny_images)
    chunked = ModelService(inference_batch=2).predict_logits(tiny_model, tiny_images)
    np.testing.assert_allclose(full, chunked, atol=1e-12)
    single = ModelService().predict_logits(tiny_model, tiny_images[2])
    np.testing.assert_allclose(single[0], full[2], atol=1e-12)


def test_capture_batch_matches_single_capture(tiny_model, tiny_images):
    service = ModelService(inference_batch=4)
    batch = service.capture_batch(tiny_model, tiny_images, "conv2")
    _, captured = service.forward_with_capture(tiny_model, tiny_images[5], ["conv2"])
    np.testing.assert_allclose(batch[5], captured["conv2"], atol=1e-12)


def test_gradient_accessors_validate_inputs(tiny_model, tiny_images):
    service = ModelService()
    with pytest.raises(ValidationError):
        service.logit_gradients(tiny_model, tiny_images[0], "gap", 0)
    with pytest.raises(ValidationError):
        service.gradients_batch(tiny_model, tiny_images, "conv1", 7)
    grads = service.gradients_batch(tiny_model, tiny_images, "conv1", 0)
    np.testing.assert_allclose(grads[1], service.logit_gradients(tiny_model, tiny_images[1], "conv1", 0), atol=1e-12)


def test_last_conv_gradient_matches_pooled_dense_weights(tiny_model, tiny_images):
    # conv2 -> GAP -> dense 이므로 위치마다 w[:, c] / (H·W)
    grads = ModelService().logit_gradients(tiny_model, tiny_images[2], "conv2", 1)
    height, width, _ = grads.shape
    expected = np.broadcast_to(tiny_model.params["logits/weights"][:, 1] / (height * width), grads.shape)
    np.testing.assert_allclose(grads, expected, atol=1e-12)
