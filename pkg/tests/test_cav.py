"""CAV / pooled-CAV / 정규화"""

import numpy as np
import pytest

from concept_xai.exceptions import ShapeError, ValidationError
from concept_xai.models import Cav, ConceptExamples, PooledCav
from concept_xai.services import CavService, ConceptMapService, compute_cav, normalize_pooled, pool_cav


def test_compute_cav_is_mean_difference(rng):
    pos = rng.normal(size=(5, 3, 3, 4))
    neg = rng.normal(size=(7, 3, 3, 4))
    cav = compute_cav(pos, neg, layer="conv1", concept="c")
    np.testing.assert_allclose(cav.direction, pos.mean(axis=0) - neg.mean(axis=0))
    assert (cav.n_positives, cav.n_negatives) == (5, 7)


def test_compute_cav_rejects_bad_sets(rng):
    with pytest.raises(ValidationError):
        compute_cav(np.zeros((0, 3, 3, 4)), rng.normal(size=(2, 3, 3, 4)))
    with pytest.raises(ShapeError):
        compute_cav(rng.normal(size=(2, 3, 3, 4)), rng.normal(size=(2, 3, 3, 5)))


def test_pool_cav_averages_spatially():
    direction = np.zeros((2, 2, 3))
    direction[..., 0] = [[1.0, 2.0], [3.0, 4.0]]
    direction[..., 2] = -1.0
    pooled = pool_cav(Cav(layer="l", direction=direction))
    np.testing.assert_allclose(pooled.values, [2.5, 0.0, -1.0])


def test_normalize_pooled_min_max_after_relu():
    normalized = normalize_pooled(PooledCav(layer="l", values=np.array([-2.0, 1.0, 3.0, 0.5])))
    # ReLU 후 [0, 1, 3, 0.5], min 0, max 3
    np.testing.assert_allclose(normalized.values, [0.0, 1 / 3, 1.0, 0.5 / 3])
    assert not normalized.inactive


def test_normalize_pooled_all_positive_shifts_minimum_to_zero():
    normalized = normalize_pooled(PooledCav(layer="l", values=np.array([2.0, 4.0, 3.0])))
    np.testing.assert_allclose(normalized.values, [0.0, 1.0, 0.5])


def test_normalize_pooled_constant_positive_vector():
    normalized = normalize_pooled(PooledCav(layer="l", values=np.array([0.7, 0.7])))
    np.testing.assert_allclose(normalized.values, [1.0, 1.0])


def test_normalize_pooled_inactive_concept():
    normalized = normalize_pooled(PooledCav(layer="l", values=np.array([-1.0, -0.5, 0.0])))
    assert normalized.inactive
    assert np.all(normalized.values == 0.0)


def test_learn_produces_artifact_per_layer(tiny_model, rng):
    examples = ConceptExamples(
        concept="bright",
        kind="entity",
        positives=rng.uniform(0.7, 1.0, size=(4, 8, 8, 3)),
        negatives=rng.uniform(0.0, 0.3, size=(4, 8, 8, 3)),
        heldout_positives=np.zeros((0, 8, 8, 3)),
        heldout_negatives=np.zeros((0, 8, 8, 3)),
    )
    artifacts = CavService().learn(tiny_model, examples, ["conv1", "conv2"])
    assert sorted(artifacts) == ["conv1", "conv2"]
    assert artifacts["conv1"].cav.direction.shape == (8, 8, 4)
    assert artifacts["conv2"].cav.direction.shape == (4, 4, 6)
    for artifact in artifacts.values():
        assert artifact.concept == "bright"
        if artifact.range is None:
            assert artifact.calibration_error
        else:
            assert artifact.range.upper > artifact.range.lower


def test_collect_activations_checks_input_shape(tiny_model):
    with pytest.raises(ShapeError):
        CavService().collect_activations(tiny_model, np.zeros((2, 9, 9, 3)), "conv1")


def test_swapping_sets_negates_cav(rng):
    pos = rng.normal(size=(4, 2, 2, 3))
    neg = rng.normal(size=(6, 2, 2, 3))
    forward = compute_cav(pos, neg, layer="l")
    backward = compute_cav(neg, pos, layer="l")
    np.testing.assert_allclose(backward.direction, -forward.direction, atol=1e-12)


@pytest.mark.parametrize("alpha", [0.01, 1.0, 37.5])
def test_normalized_pooled_cav_ignores_positive_scale(rng, alpha):
    values = rng.normal(size=6)
    base = normalize_pooled(PooledCav(layer="l", values=values))
    scaled = normalize_pooled(PooledCav(layer="l", values=alpha * values))
    np.testing.assert_allclose(scaled.values, base.values, atol=1e-12)
    assert scaled.inactive == base.inactive


def test_learn_calibrates_through_concept_map_service(tiny_model, rng):
    examples = ConceptExamples(
        concept="bright",
        kind="entity",
        positives=rng.uniform(0.7, 1.0, size=(4, 8, 8, 3)),
        negatives=rng.uniform(0.0, 0.3, size=(4, 8, 8, 3)),
        heldout_positives=np.zeros((0, 8, 8, 3)),
        heldout_negatives=np.zeros((0, 8, 8, 3)),
    )
    service = CavService()
    calls = []
    original = service.conceptmap_service.calibrate_range

    def record(*args, **kwargs):
        calls.append(args[1])
        return original(*args, **kwargs)

    service.conceptmap_service.calibrate_range = record
    artifacts = service.learn(tiny_model, examples, ["conv2"])
    assert calls == ["conv2"]

    artifact = artifacts["conv2"]
    if artifact.range is not None:
        fresh = ConceptMapService().calibrate_range(
            tiny_model, "conv2", artifact.pooled, examples.positives, examples.negatives
        )
        assert fresh.lower == pytest.approx(artifact.range.lower)
        assert fresh.upper == pytest.approx(artifact.range.upper)
