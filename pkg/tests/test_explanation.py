"""로컬 / 전역 설명 서비스"""

import json

import numpy as np
import pandas as pd
import pytest

from concept_xai.exceptions import ValidationError
from concept_xai.models import ConceptExamples
from concept_xai.repositories import CavStore
from concept_xai.services import AttributionService, ExplanationService, top_classes


@pytest.fixture
def example_sets(rng):
    def images(n, low, high):
        return rng.uniform(low, high, size=(n, 8, 8, 3))

    empty = np.zeros((0, 8, 8, 3))
    return {
        "bright": ConceptExamples("bright", "entity", images(4, 0.6, 1.0), images(4, 0.0, 1.0), empty, empty),
        "dark": ConceptExamples("dark", "entity", images(4, 0.0, 0.4), images(4, 0.0, 1.0), empty, empty),
    }


@pytest.fixture
def explainer():
    return ExplanationService(AttributionService(ig_steps=4))


def test_top_classes_breaks_ties_by_index():
    assert top_classes(np.array([0.2, 0.4, 0.4]), 2) == [1, 2]
    assert top_classes(np.array([0.5, 0.3, 0.2]), 5) == [0, 1, 2]


def test_resolve_layers(explainer, tiny_model):
    assert explainer.resolve_layers(tiny_model, None) == ["conv1", "conv2"]
    assert explainer.resolve_layers(tiny_model, ["conv2"]) == ["conv2"]
    with pytest.raises(ValidationError):
        explainer.resolve_layers(tiny_model, ["logits"])


def test_load_artifacts_requires_source(explainer, tiny_model):
    with pytest.raises(ValidationError):
        explainer.load_artifacts(tiny_model, ["conv1"])


def test_load_artifacts_from_examples_and_files(explainer, tiny_model, example_sets, tmp_path):
    table = explainer.load_artifacts(tiny_model, ["conv2"], example_sets=example_sets)
    assert sorted(table) == ["bright", "dark"]
    store = CavStore(tmp_path / "cavs")
    store.save(table["bright"]["conv2"], model_id=tiny_model.model_id)
    from_files = explainer.load_artifacts(tiny_model, ["conv2"], cav_dir=tmp_path / "cavs")
    np.testing.assert_array_equal(from_files["bright"]["conv2"].cav.direction, table["bright"]["conv2"].cav.direction)
    with pytest.raises(ValidationError):
        explainer.load_artifacts(tiny_model, ["conv2"], cav_dir=tmp_path / "cavs", concepts=["dark"])


def test_explain_local_table(explainer, tiny_model, tiny_images, example_sets, tmp_path):
    layers = ["conv1", "conv2"]
    artifacts = explainer.load_artifacts(tiny_model, layers, example_sets=example_sets)
    rows = explainer.explain_local(tiny_model, tiny_images[0], artifacts, layers, tmp_path, image_id="img", topk=2)
    assert len(rows) == 2 * 2 * 2
    assert [r.rank for r in rows] == sorted(r.rank for r in rows)
    assert {r.class_name for r in rows} <= {"cucumber", "taxi", "zebra"}
    for row in rows:
        assert 0.0 <= row.value <= row.class_scale
        assert row.overlay_path is not None
    assert len(list((tmp_path / "overlays").glob("img__*.png"))) == 4
    raw_maps = sorted((tmp_path / "concept_maps").glob("img__*.json"))
    assert len(raw_maps) == 4
    payload = json.loads((tmp_path / "concept_maps" / "img__bright__conv2.json").read_text(encoding="utf-8"))
    assert payload["concept"] == "bright" and payload["layer"] == "conv2"
    assert payload["shape"] == [4, 4]
    assert np.asarray(payload["values"]).shape == (4, 4)
    assert len(pd.read_csv(tmp_path / "local_attributions.csv")) == 8


def test_explain_global_single_image_matches_local(explainer, tiny_model, tiny_images, example_sets, tmp_path):
    artifacts = explainer.load_artifacts(tiny_model, ["conv2"], example_sets=example_sets)
    local = explainer.explain_local(tiny_model, tiny_images[2], artifacts, ["conv2"], tmp_path / "l", topk=3)
    rows = explainer.explain_global(tiny_model, tiny_images[2:3], 1, artifacts, ["conv2"], tmp_path / "g")
    for row in rows:
        expected = next(r.value for r in local if r.concept == row.concept and r.class_index == 1)
        assert row.mean == pytest.approx(expected)
        assert row.count == 1
    assert (tmp_path / "g" / "global_attributions.png").exists()


def test_explain_global_requires_images(explainer, tiny_model, example_sets, tmp_path):
    artifacts = explainer.load_artifacts(tiny_model, ["conv2"], example_sets=example_sets)
    with pytest.raises(ValidationError):
        explainer.explain_global(tiny_model, np.zeros((0, 8, 8, 3)), 0, artifacts, ["conv2"], tmp_path)
