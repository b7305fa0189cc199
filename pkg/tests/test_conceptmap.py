"""개념 맵 / 정규화 범위 보정"""

import numpy as np
import pytest

from concept_xai.exceptions import CalibrationError, ShapeError
from concept_xai.models import Cav, ConceptMap, NormalizationRange, PooledCav
from concept_xai.services import (
    ConceptMapService,
    calibrate_from_activations,
    contraharmonic_mean,
    normalize_map,
    raw_concept_map,
)
from concept_xai.services.cav_service import build_artifact


def test_raw_concept_map_matches_loop(rng):
    fmaps = rng.normal(size=(5, 4, 3))
    weights = rng.normal(size=3)
    expected = np.zeros((5, 4))
    for i in range(5):
        for j in range(4):
            expected[i, j] = max(0.0, sum(weights[k] * fmaps[i, j, k] for k in range(3)))
    result = raw_concept_map(PooledCav(layer="l", values=weights), fmaps)
    np.testing.assert_allclose(result.values, expected)
    assert result.layer == "l"


def test_raw_concept_map_channel_mismatch(rng):
    with pytest.raises(ShapeError):
        raw_concept_map(np.ones(4), rng.normal(size=(2, 2, 3)))


def test_contraharmonic_mean():
    assert contraharmonic_mean(np.array([[1.0, 3.0]])) == pytest.approx(10.0 / 4.0)
    assert contraharmonic_mean(np.zeros((2, 2))) == 0.0


def test_calibration_orders_positive_above_negative():
    pooled = PooledCav(layer="l", values=np.array([1.0, 0.0]), concept="c")
    pos = np.zeros((3, 2, 2, 2))
    pos[..., 0] = [[[2.0]], [[3.0]], [[4.0]]]
    neg = np.zeros((3, 2, 2, 2))
    neg[..., 0] = 0.5
    norm_range = calibrate_from_activations(pooled, pos, neg)
    assert norm_range.upper == pytest.approx(3.0)
    assert norm_range.lower == pytest.approx(0.5)


def test_calibration_fails_when_not_separable():
    pooled = PooledCav(layer="l", values=np.array([1.0]), concept="c")
    acts = np.ones((2, 2, 2, 1))
    with pytest.raises(CalibrationError):
        calibrate_from_activations(pooled, acts, acts)


def test_normalize_map_clips_to_unit_interval():
    raw = ConceptMap(layer="l", values=np.array([[0.0, 1.0], [2.0, 5.0]]))
    normalized = normalize_map(raw, NormalizationRange(lower=1.0, upper=3.0))
    np.testing.assert_allclose(normalized.values, [[0.0, 0.0], [0.5, 1.0]])


def test_concept_map_for_uncalibrated_artifact_is_zero(tiny_model, tiny_images, rng):
    artifact = build_artifact(Cav(layer="conv2", direction=rng.normal(size=(4, 4, 6)), concept="c"), None, "failed")
    raw, normalized = ConceptMapService().concept_map(tiny_model, tiny_images[0], artifact)
    assert raw.values.shape == (4, 4)
    assert np.all(normalized.values == 0.0)


def test_heldout_discrimination_in_unit_range(tiny_model, tiny_images, rng):
    artifact = build_artifact(
        Cav(layer="conv1", direction=np.abs(rng.normal(size=(8, 8, 4))), concept="c"),
        NormalizationRange(lower=0.0, upper=1.0, layer="conv1"),
    )
    pos, neg = ConceptMapService().heldout_discrimination(tiny_model, artifact, tiny_images[:3], tiny_images[3:])
    assert 0.0 <= pos <= 1.0
    assert 0.0 <= neg <= 1.0
