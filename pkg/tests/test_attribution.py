"""레이어 IG / 개념 기여도 / Grad-CAM 경로"""

import numpy as np
import pytest

from concept_xai.engine import gap
from concept_xai.exceptions import ValidationError
from concept_xai.models import Cav, NormalizationRange, NormalizedConceptMap, NormalizedLayerIg, NormalizedPooledCav
from concept_xai.services import AttributionService, ModelService, concept_attribution, raw_concept_map, trapezoid_weights
from concept_xai.services.attribution_service import normalize_layer_ig, normalize_logit_deltas, split_and_rectify
from concept_xai.services.cav_service import build_artifact
from tests.conftest import make_model


def _artifact(rng, layer, shape, calibrated=True):
    cav = Cav(layer=layer, direction=rng.normal(size=shape), concept=f"c_{layer}")
    norm_range = NormalizationRange(lower=0.0, upper=1.0, layer=layer) if calibrated else None
    return build_artifact(cav, norm_range, None if calibrated else "upper <= lower")


@pytest.mark.parametrize("steps", [2, 3, 10, 300])
def test_trapezoid_weights_sum_to_one(steps):
    alphas, weights = trapezoid_weights(steps)
    assert alphas[0] == 0.0 and alphas[-1] == 1.0
    assert weights.sum() == pytest.approx(1.0)
    assert weights[0] == pytest.approx(weights[1] / 2)


def test_trapezoid_rejects_single_step():
    with pytest.raises(ValidationError):
        trapezoid_weights(1)


def test_ig_is_exact_when_suffix_is_linear(tiny_model, tiny_images):
    # conv2 뒤에는 GAP + dense 만 있으므로 적분 대상이 α 에 대해 상수
    ig = AttributionService().layer_ig(tiny_model, tiny_images[0], "conv2", 1, steps=2)
    assert abs(ig.residual) < 1e-9
    assert ig.attributions.shape == (4, 4, 6)


def test_ig_batching_does_not_change_result(tiny_model, tiny_images):
    a = AttributionService(ig_batch_size=64).layer_ig(tiny_model, tiny_images[2], "conv1", 2, steps=20)
    b = AttributionService(ig_batch_size=3).layer_ig(tiny_model, tiny_images[2], "conv1", 2, steps=20)
    np.testing.assert_allclose(a.attributions, b.attributions, atol=1e-12)


def test_ig_rejects_unknown_layer_and_class(tiny_model, tiny_images):
    service = AttributionService()
    with pytest.raises(ValidationError):
        service.layer_ig(tiny_model, tiny_images[0], "pool1", 0, steps=4)
    with pytest.raises(ValidationError):
        service.layer_ig(tiny_model, tiny_images[0], "conv1", 3, steps=4)


def test_normalize_logit_deltas():
    scales, degenerate = normalize_logit_deltas({0: 2.0, 1: -1.0, 2: 0.5})
    assert not degenerate
    assert scales == pytest.approx({0: 1.0, 1: 0.0, 2: 0.5})


def test_normalize_logit_deltas_degenerate():
    scales, degenerate = normalize_logit_deltas({0: 0.3, 1: 0.3})
    assert degenerate
    assert scales == {0: 0.0, 1: 0.0}


def test_split_and_rectify_binary():
    ig = np.array([[[1.0, -2.0]]])
    parts = split_and_rectify({0: -ig, 1: ig}, mode="binary", num_classes=2)
    np.testing.assert_array_equal(parts[1], [[[1.0, 0.0]]])
    np.testing.assert_array_equal(parts[0], [[[0.0, 2.0]]])
    with pytest.raises(ValidationError):
        split_and_rectify({0: ig}, mode="binary", num_classes=3)
    with pytest.raises(ValidationError):
        split_and_rectify({0: ig}, mode="softmax")


def test_normalized_ig_mass_matches_scale(rng):
    igs = {0: rng.normal(size=(2, 2, 3)), 1: rng.normal(size=(2, 2, 3)), 2: rng.normal(size=(2, 2, 3))}
    normalized = normalize_layer_ig("l", igs, {0: 1.0, 1: 3.0, 2: 2.0})
    for t, tensor in normalized.per_class.items():
        assert np.all(tensor >= 0.0)
        assert tensor.sum() == pytest.approx(normalized.scale[t])
    assert normalized.scale[1] == pytest.approx(1.0)


def test_binary_mass_split_sums_to_one(rng):
    ig = rng.normal(size=(2, 2, 3))
    normalized = normalize_layer_ig("l", {0: -ig, 1: ig}, {0: -1.0, 1: 1.0}, mode="binary", num_classes=2)
    assert normalized.scale[0] + normalized.scale[1] == pytest.approx(1.0)


def test_full_mask_and_weights_recover_class_scale():
    ig = NormalizedLayerIg(layer="l", per_class={0: np.full((2, 2, 2), 0.1)}, scale={0: 0.8})
    mask = NormalizedConceptMap(layer="l", values=np.ones((2, 2)))
    weights = NormalizedPooledCav(layer="l", values=np.ones(2), concept="c")
    assert concept_attribution(mask, weights, ig, 0).value == pytest.approx(0.8)


def test_one_hot_concepts_split_attribution():
    tensor = np.zeros((1, 1, 2))
    tensor[..., 0], tensor[..., 1] = 0.3, 0.2
    ig = NormalizedLayerIg(layer="l", per_class={0: tensor}, scale={0: 0.5})
    mask = NormalizedConceptMap(layer="l", values=np.ones((1, 1)))
    first = NormalizedPooledCav(layer="l", values=np.array([1.0, 0.0]))
    second = NormalizedPooledCav(layer="l", values=np.array([0.0, 1.0]))
    assert concept_attribution(mask, first, ig, 0).value == pytest.approx(0.3)
    assert concept_attribution(mask, second, ig, 0).value == pytest.approx(0.2)


def test_mismatched_layers_rejected():
    ig = NormalizedLayerIg(layer="a", per_class={0: np.zeros((1, 1, 1))}, scale={0: 0.0})
    with pytest.raises(ValidationError):
        concept_attribution(
            NormalizedConceptMap(layer="b", values=np.zeros((1, 1))), NormalizedPooledCav(layer="a", values=np.zeros(1)), ig, 0
        )


def test_explain_image_respects_bounds(tiny_model, tiny_images, rng):
    artifacts = {
        "first": {"conv1": _artifact(rng, "conv1", (8, 8, 4)), "conv2": _artifact(rng, "conv2", (4, 4, 6))},
        "second": {"conv1": _artifact(rng, "conv1", (8, 8, 4)), "conv2": _artifact(rng, "conv2", (4, 4, 6))},
    }
    explanation = AttributionService(ig_steps=16).explain_image(
        tiny_model, tiny_images[0], artifacts, ["conv1", "conv2"], [0, 2]
    )
    assert len(explanation.attributions) == 2 * 2 * 2
    for attribution in explanation.attributions:
        assert 0.0 <= attribution.value <= attribution.class_scale <= 1.0
    assert set(explanation.masks) == {(c, l) for c in artifacts for l in ("conv1", "conv2")}


def test_uncalibrated_concept_reports_zero(tiny_model, tiny_images, rng):
    artifacts = {"c": {"conv2": _artifact(rng, "conv2", (4, 4, 6), calibrated=False)}}
    explanation = AttributionService(ig_steps=4).explain_image(tiny_model, tiny_images[0], artifacts, ["conv2"], [1])
    attribution = explanation.attribution("c", 1, "conv2")
    assert attribution.value == 0.0
    assert "uncalibrated" in attribution.flags


def test_missing_layer_artifact_raises(tiny_model, tiny_images, rng):
    artifacts = {"c": {"conv1": _artifact(rng, "conv1", (8, 8, 4))}}
    with pytest.raises(ValidationError):
        AttributionService(ig_steps=4).explain_image(tiny_model, tiny_images[0], artifacts, ["conv2"], [0])


def test_binary_model_attributions(binary_model, tiny_images, rng):
    artifacts = {"c": {"conv2": _artifact(rng, "conv2", (4, 4, 6))}}
    explanation = AttributionService(ig_steps=4).explain_image(binary_model, tiny_images[0], artifacts, ["conv2"], [0, 1])
    scales = explanation.normalized_igs["conv2"].scale
    assert scales[0] + scales[1] == pytest.approx(1.0)
    for t in (0, 1):
        assert explanation.attribution("c", t, "conv2").value <= scales[t] + 1e-9


def test_global_of_single_image_equals_local(tiny_model, tiny_images, rng):
    artifacts = {"c": {"conv2": _artifact(rng, "conv2", (4, 4, 6))}}
    service = AttributionService(ig_steps=6)
    local = service.explain_image(tiny_model, tiny_images[3], artifacts, ["conv2"], [2]).value("c", 2, "conv2")
    result = service.global_attribution(tiny_model, tiny_images[3:4], artifacts, 2, ["conv2"])
    assert result["c"]["conv2"].mean == pytest.approx(local)
    assert result["c"]["conv2"].std == 0.0
    assert result["c"]["conv2"].count == 1


def test_global_attribution_parallel_matches_serial(tiny_model, tiny_images, rng):
    artifacts = {"c": {"conv2": _artifact(rng, "conv2", (4, 4, 6))}}
    serial = AttributionService(ig_steps=4).global_attribution(tiny_model, tiny_images, artifacts, 0, ["conv2"])
    parallel = AttributionService(ig_steps=4, max_workers=3).global_attribution(tiny_model, tiny_images, artifacts, 0, ["conv2"])
    assert serial["c"]["conv2"].values == parallel["c"]["conv2"].values


def test_gradcam_uses_concept_map_path(tiny_model, tiny_images):
    image = tiny_images[4]
    result = AttributionService().gradcam_map(tiny_model, image, "conv1", 1)
    model_service = ModelService()
    grads = model_service.logit_gradients(tiny_model, image, "conv1", 1)
    _, captured = model_service.forward_with_capture(tiny_model, image, ["conv1"])
    expected = raw_concept_map(gap(grads), captured["conv1"])
    np.testing.assert_allclose(result.values, expected.values, atol=1e-12)


def test_ig_completeness_residual_is_small_relative_to_logit_change(tiny_model, tiny_images):
    service = AttributionService()
    relative = [service.layer_ig(tiny_model, image, "conv1", 0, steps=500).relative_residual for image in tiny_images]
    assert float(np.median(relative)) <= 0.02


def test_residual_does_not_grow_when_steps_double(tiny_model, tiny_images):
    service = AttributionService()
    steps_list = [50, 100, 200, 400, 800]
    sweeps = [service.residual_sweep(tiny_model, image, "conv1", 1, steps_list) for image in tiny_images]
    medians = [float(np.median([sweep[s] for sweep in sweeps])) for s in steps_list]
    for earlier, later in zip(medians, medians[1:]):
        assert later <= 1.1 * earlier + 1e-4


def test_residual_sweep_reports_each_step_count(tiny_model, tiny_images):
    service = AttributionService()
    sweep = service.residual_sweep(tiny_model, tiny_images[0], "conv1", 2, [4, 16])
    assert set(sweep) == {4, 16}
    assert sweep[16] == pytest.approx(service.layer_ig(tiny_model, tiny_images[0], "conv1", 2, steps=16).relative_residual)


def test_larger_mask_never_lowers_attribution(rng):
    tensor = np.abs(rng.normal(size=(3, 3, 4)))
    ig = NormalizedLayerIg(layer="l", per_class={0: tensor / tensor.sum() * 0.7}, scale={0: 0.7})
    weights = NormalizedPooledCav(layer="l", values=rng.uniform(size=4), concept="c")
    small = rng.uniform(size=(3, 3))
    large = np.minimum(small + rng.uniform(0.0, 0.5, size=(3, 3)), 1.0)
    low = concept_attribution(NormalizedConceptMap(layer="l", values=small), weights, ig, 0).value
    high = concept_attribution(NormalizedConceptMap(layer="l", values=large), weights, ig, 0).value
    assert low <= high + 1e-12


def test_single_logit_split_keeps_logit_class_positive():
    ig = np.array([[[1.5, -0.5, 0.0]]])
    parts = split_and_rectify({0: ig}, mode="binary", num_classes=1)
    np.testing.assert_array_equal(parts[0], [[[1.5, 0.0, 0.0]]])
    np.testing.assert_array_equal(parts[1], [[[0.0, 0.5, 0.0]]])


def test_two_class_split_requires_second_logit():
    with pytest.raises(ValidationError):
        split_and_rectify({0: np.ones((1, 1, 1))}, mode="binary", num_classes=2)


def test_single_logit_model_attributions(tiny_images, rng):
    model = make_model(num_classes=1, seed=5, model_id="single")
    assert model.architecture.class_label(1) == "not cucumber"
    artifacts = {"c": {"conv2": _artifact(rng, "conv2", (4, 4, 6))}}
    explanation = AttributionService(ig_steps=4).explain_image(model, tiny_images[0], artifacts, ["conv2"], [0, 1])
    raw = explanation.layer_igs[("conv2", 0)].attributions
    normalized = explanation.normalized_igs["conv2"]
    assert np.all(normalized.per_class[0][raw <= 0.0] == 0.0)
    assert np.all(normalized.per_class[1][raw >= 0.0] == 0.0)
    positive, negative = np.maximum(raw, 0.0).sum(), np.maximum(-raw, 0.0).sum()
    assert normalized.scale[0] == pytest.approx(positive / (positive + negative))
    assert normalized.scale[0] + normalized.scale[1] == pytest.approx(1.0)
