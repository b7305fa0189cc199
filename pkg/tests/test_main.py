"""명령행 인터페이스: 종료 코드와 서브커맨드 산출물"""

import json

import numpy as np
import pytest
import yaml

from concept_xai.main import EXIT_FAILURE, EXIT_OK, EXIT_USAGE, main
from concept_xai.models import ConceptExamples
from concept_xai.repositories import BinaryCheckpointStore, DatasetStore
from concept_xai.utils.rendering import write_png


@pytest.fixture
def config_file(tiny_experiment_config, tmp_path):
    path = tmp_path / "experiment.yaml"
    path.write_text(yaml.safe_dump(tiny_experiment_config.model_dump(mode="json")), encoding="utf-8")
    return path


@pytest.fixture
def saved_model(tiny_model, tmp_path):
    return BinaryCheckpointStore().save(tiny_model, tmp_path / "tiny.ckpt")


@pytest.fixture
def concepts_dir(tmp_path):
    rng = np.random.default_rng(0)

    def images(n, low, high):
        return np.round(rng.uniform(low, high, size=(n, 8, 8, 3)) * 255) / 255

    examples = {
        name: ConceptExamples(
            concept=name,
            kind="entity",
            positives=images(4, low, high),
            negatives=images(4, 0.0, 1.0),
            heldout_positives=images(0, 0.0, 1.0),
            heldout_negatives=images(0, 0.0, 1.0),
        )
        for name, low, high in (("bright", 0.6, 1.0), ("dark", 0.0, 0.4))
    }
    return DatasetStore(tmp_path / "concepts").save_concept_examples(examples)


@pytest.fixture
def image_dir(tmp_path):
    rng = np.random.default_rng(1)
    target = tmp_path / "images"
    for i in range(3):
        write_png(target / f"img{i}.png", rng.uniform(size=(8, 8, 3)))
    return target


def _payload(capsys):
    return json.loads(capsys.readouterr().out)


class TestUsageErrors:
    def test_missing_subcommand(self):
        assert main([]) == EXIT_USAGE

    def test_unknown_flag(self, config_file):
        assert main(["generate-dataset", "--config", str(config_file), "--bogus"]) == EXIT_USAGE

    def test_steps_below_two(self, config_file, saved_model):
        argv = ["explain-local", "--config", str(config_file), "--model", str(saved_model), "--image", "x.png", "--steps", "1"]
        assert main(argv) == EXIT_USAGE

    def test_missing_config_file(self, tmp_path):
        assert main(["generate-dataset", "--config", str(tmp_path / "nope.yaml")]) == EXIT_USAGE

    def test_concept_source_required(self, config_file, saved_model, image_dir):
        argv = [
            "explain-local", "--config", str(config_file), "--model", str(saved_model),
            "--image", str(image_dir / "img0.png"),
        ]
        assert main(argv) == EXIT_USAGE

    def test_fraction_out_of_range(self, config_file):
        assert main(["train", "--config", str(config_file), "--fraction", "1.5"]) == EXIT_USAGE


class TestRuntimeFailures:
    def test_missing_checkpoint(self, config_file, tmp_path, concepts_dir):
        argv = [
            "explain-local", "--config", str(config_file), "--model", str(tmp_path / "missing.ckpt"),
            "--image", "x.png", "--concepts-dir", str(concepts_dir),
        ]
        assert main(argv) == EXIT_FAILURE

    def test_unknown_class(self, config_file, saved_model, image_dir, concepts_dir, tmp_path):
        argv = [
            "explain-global", "--config", str(config_file), "--model", str(saved_model),
            "--images-dir", str(image_dir), "--class", "giraffe", "--concepts-dir", str(concepts_dir),
            "--layers", "conv2", "--steps", "4", "--output-dir", str(tmp_path / "g"),
        ]
        assert main(argv) == EXIT_FAILURE

    def test_unknown_layer(self, config_file, saved_model, image_dir, concepts_dir, tmp_path):
        argv = [
            "explain-local", "--config", str(config_file), "--model", str(saved_model),
            "--image", str(image_dir / "img0.png"), "--concepts-dir", str(concepts_dir),
            "--layers", "conv9", "--output-dir", str(tmp_path / "l"),
        ]
        assert main(argv) == EXIT_FAILURE


class TestCommands:
    def test_generate_dataset(self, config_file, tmp_path, capsys):
        out = tmp_path / "gen"
        assert main(["generate-dataset", "--config", str(config_file), "--output-dir", str(out)]) == EXIT_OK
        payload = _payload(capsys)
        assert set(payload["manifest_sha256"]) == {"train_p000", "train_p050", "train_p100", "holdout", "swapped", "concept_pool"}
        assert (out / "datasets" / "swapped" / "manifest.csv").exists()
        assert (out / "concepts" / "tag_Z" / "positives").is_dir()

    def test_explain_local_writes_table_and_overlays(self, config_file, saved_model, image_dir, concepts_dir, tmp_path, capsys):
        out = tmp_path / "local"
        argv = [
            "explain-local", "--config", str(config_file), "--model", str(saved_model),
            "--image", str(image_dir / "img1.png"), "--concepts-dir", str(concepts_dir),
            "--steps", "4", "--topk", "2", "--output-dir", str(out),
        ]
        assert main(argv) == EXIT_OK
        # 개념 2개 × top-2 × 레이어 2개
        assert _payload(capsys)["rows"] == 8
        assert (out / "local_attributions.csv").exists()
        assert len(list((out / "overlays").glob("*.png"))) == 4

    def test_compute_cav_then_explain_global(self, config_file, saved_model, image_dir, concepts_dir, tmp_path, capsys):
        out = tmp_path / "cavs_run"
        argv = [
            "compute-cav", "--config", str(config_file), "--model", str(saved_model),
            "--concepts-dir", str(concepts_dir), "--layers", "conv2", "--output-dir", str(out),
        ]
        assert main(argv) == EXIT_OK
        assert len(_payload(capsys)["cavs"]) == 2

        argv = [
            "explain-global", "--config", str(config_file), "--model", str(saved_model),
            "--images-dir", str(image_dir), "--class", "taxi", "--cav-dir", str(out / "cavs"),
            "--layers", "conv2", "--steps", "4", "--output-dir", str(out / "global"),
        ]
        assert main(argv) == EXIT_OK
        means = _payload(capsys)
        assert set(means) == {"bright@conv2", "dark@conv2"}
        assert all(0.0 <= v <= 1.0 for v in means.values())
        assert (out / "global" / "global_attributions.png").exists()

    def test_tcav(self, config_file, saved_model, image_dir, concepts_dir, tmp_path, capsys):
        random_dir = tmp_path / "random"
        rng = np.random.default_rng(2)
        for i in range(6):
            write_png(random_dir / f"r{i}.png", rng.uniform(size=(8, 8, 3)))
        argv = [
            "tcav", "--config", str(config_file), "--model", str(saved_model), "--images-dir", str(image_dir),
            "--class", "0", "--concepts-dir", str(concepts_dir), "--random-dir", str(random_dir),
            "--runs", "2", "--pool-size", "3", "--output-dir", str(tmp_path / "tcav"),
        ]
        assert main(argv) == EXIT_OK
        results = _payload(capsys)["results"]
        assert {r["concept"] for r in results} == {"bright", "dark"}
        assert all(r["layer"] == "conv2" for r in results)
        assert (tmp_path / "tcav" / "tcav.csv").exists()
