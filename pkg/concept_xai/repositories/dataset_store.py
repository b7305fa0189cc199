"""
Dataset Repository

데이터셋을 PNG 파일 디렉토리와 manifest.csv 로 내보내고 다시 읽습니다.

manifest 컬럼: path, label, class_name, tag, y0, x0, y1, x1, pixel_sha1
(태그가 없으면 tag 와 box 컬럼은 비어 있음)
이미지 값은 k/255 로 양자화되어 있으므로 PNG 왕복은 비트 단위로 정확합니다.
"""

from __future__ import annotations

import hashlib
import json
import logging
from pathlib import Path
from typing import Dict, List, Optional, Union

import numpy as np
import pandas as pd

from ..exceptions import RepositoryError
from ..models import ConceptExamples, Dataset, DatasetFamily, TagAnnotation
from ..utils.rendering import read_png, write_png

# 로깅 설정
logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.csv"
FAMILY_INDEX_NAME = "family.json"
MANIFEST_COLUMNS = ["path", "label", "class_name", "tag", "y0", "x0", "y1", "x1", "pixel_sha1"]
CONCEPT_PARTS = ("positives", "negatives", "heldout_positives", "heldout_negatives")


def pixel_digest(image: np.ndarray) -> str:
    """8bit 픽셀 값의 SHA-1"""
    pixels = np.round(np.clip(image, 0.0, 1.0) * 255.0).astype(np.uint8)
    return hashlib.sha1(pixels.tobytes()).hexdigest()


def file_sha256(path: Union[str, Path]) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


class DatasetStore:
    """PNG + manifest 데이터셋 저장소"""

    def __init__(self, root: Union[str, Path]):
        self.root = Path(root)

    def manifest_frame(self, dataset: Dataset) -> pd.DataFrame:
        rows = []
        for i in range(len(dataset)):
            ann = dataset.annotations[i]
            label = int(dataset.labels[i])
            rows.append(
                {
                    "path": f"images/{dataset.ids[i]}.png",
                    "label": label,
                    "class_name": dataset.class_names[label],
                    "tag": ann.tag if ann else "",
                    "y0": ann.box[0] if ann else None,
                    "x0": ann.box[1] if ann else None,
                    "y1": ann.box[2] if ann else None,
                    "x1": ann.box[3] if ann else None,
                    "pixel_sha1": pixel_digest(dataset.images[i]),
                }
            )
        frame = pd.DataFrame(rows, columns=MANIFEST_COLUMNS)
        for col in ("y0", "x0", "y1", "x1"):
            frame[col] = frame[col].astype("Int64")
        return frame

    def save(self, dataset: Dataset, subdir: Optional[str] = None) -> Path:
        """
        데이터셋 저장

        Returns:
            Path: manifest.csv 경로
        """
        target = self.root / (subdir or dataset.name)
        try:
            (target / "images").mkdir(parents=True, exist_ok=True)
            for i in range(len(dataset)):
                write_png(target / "images" / f"{dataset.ids[i]}.png", dataset.images[i])
            frame = self.manifest_frame(dataset)
            manifest = target / MANIFEST_NAME
            frame.to_csv(manifest, index=False, lineterminator="\n")
            (target / "classes.json").write_text(json.dumps(dataset.class_names), encoding="utf-8")
        except OSError as e:
            raise RepositoryError(
                f"데이터셋 저장 실패: {e}", repository_name="DatasetStore", operation_type="save", resource=str(target)
            ) from e
        logger.info("데이터셋 저장: %s (%d장, 태그 %d장)", target, len(dataset), dataset.tagged_count())
        return manifest

    def load(self, directory: Union[str, Path], name: Optional[str] = None) -> Dataset:
        """manifest 와 PNG 로부터 데이터셋 로드"""
        src = Path(directory)
        manifest = src / MANIFEST_NAME
        if not manifest.exists():
            raise RepositoryError(
                f"manifest 가 없습니다: {manifest}", repository_name="DatasetStore", operation_type="load", resource=str(manifest)
            )
        try:
            frame = pd.read_csv(manifest, keep_default_na=False, dtype={"tag": str})
            class_file = src / "classes.json"
            if class_file.exists():
                class_names = json.loads(class_file.read_text(encoding="utf-8"))
            else:
                pairs = frame[["label", "class_name"]].drop_duplicates().sort_values("label")
                class_names = pairs["class_name"].tolist()
            images, annotations, ids = [], [], []
            for row in frame.itertuples(index=False):
                images.append(read_png(src / row.path))
                ids.append(Path(row.path).stem)
                if row.tag:
                    annotations.append(
                        TagAnnotation(tag=row.tag, box=(int(row.y0), int(row.x0), int(row.y1), int(row.x1)))
                    )
                else:
                    annotations.append(None)
        except (OSError, ValueError, KeyError) as e:
            raise RepositoryError(
                f"데이터셋 로드 실패: {e}", repository_name="DatasetStore", operation_type="load", resource=str(src)
            ) from e

        if not images:
            raise RepositoryError(
                f"빈 데이터셋입니다: {src}", repository_name="DatasetStore", operation_type="load", resource=str(src)
            )
        return Dataset(
            name=name or src.name,
            images=np.stack(images),
            labels=frame["label"].to_numpy(dtype=np.int64),
            annotations=annotations,
            class_names=list(class_names),
            ids=ids,
        )

    def load_images(self, directory: Union[str, Path]) -> List[np.ndarray]:
        """manifest 가 있으면 그 순서, 없으면 파일 이름 순서로 PNG 로드"""
        src = Path(directory)
        if (src / MANIFEST_NAME).exists():
            return list(self.load(src).images)
        paths = sorted(src.glob("*.png"))
        if not paths:
            raise RepositoryError(
                f"PNG 이미지가 없습니다: {src}", repository_name="DatasetStore", operation_type="load", resource=str(src)
            )
        return [read_png(p) for p in paths]

    def save_family(self, family: DatasetFamily) -> Dict[str, str]:
        """
        패밀리 전체 저장

        Returns:
            세트 이름 -> manifest SHA-256
        """
        hashes: Dict[str, str] = {}
        for set_name, dataset in family.all_sets().items():
            manifest = self.save(dataset, subdir=set_name)
            hashes[set_name] = file_sha256(manifest)
        index = {
            "class_names": family.class_names,
            "image_size": family.image_size,
            "seed": family.seed,
            "tag_fractions": family.fractions(),
            "tag_side_fraction": list(family.tag_side_fraction),
            "manifest_sha256": hashes,
        }
        (self.root / FAMILY_INDEX_NAME).write_text(json.dumps(index, indent=2, sort_keys=True), encoding="utf-8")
        logger.info("데이터셋 패밀리 저장 완료: %s (세트 %d개)", self.root, len(hashes))
        return hashes

    # ------------------------------------------------------------------
    # 개념 예제 디렉토리
    # ------------------------------------------------------------------

    def save_images(self, directory: Union[str, Path], images: np.ndarray) -> Path:
        """이미지 배열을 00000.png, 00001.png ... 로 저장"""
        target = Path(directory)
        try:
            target.mkdir(parents=True, exist_ok=True)
            for i, image in enumerate(images):
                write_png(target / f"{i:05d}.png", image)
        except OSError as e:
            raise RepositoryError(
                f"이미지 저장 실패: {e}", repository_name="DatasetStore", operation_type="save", resource=str(target)
            ) from e
        return target

    def save_concept_examples(self, example_sets: Dict[str, ConceptExamples]) -> Path:
        """
        개념 예제를 <root>/<concept>/{positives,negatives,heldout_positives,heldout_negatives}/ 로 저장

        Returns:
            Path: 개념 디렉토리 루트
        """
        for concept, examples in example_sets.items():
            base = self.root / concept
            for part in CONCEPT_PARTS:
                self.save_images(base / part, getattr(examples, part))
            (base / "concept.json").write_text(
                json.dumps({"concept": concept, "kind": examples.kind}, sort_keys=True), encoding="utf-8"
            )
        logger.info("개념 예제 저장: %s (개념 %d개)", self.root, len(example_sets))
        return self.root

    def load_concept_examples(self, directory: Union[str, Path]) -> ConceptExamples:
        """
        개념 예제 디렉토리 로드

        positives/negatives 는 필수, held-out 디렉토리는 없으면 빈 배열입니다.
        """
        src = Path(directory)
        meta_file = src / "concept.json"
        meta = json.loads(meta_file.read_text(encoding="utf-8")) if meta_file.exists() else {}
        parts: Dict[str, np.ndarray] = {}
        for part in CONCEPT_PARTS:
            if any((src / part).glob("*.png")):
                parts[part] = np.stack(self.load_images(src / part))
            elif part.startswith("heldout"):
                parts[part] = np.zeros((0,) + parts["positives"].shape[1:])
            else:
                raise RepositoryError(
                    f"개념 예제 디렉토리에 '{part}' 가 없습니다: {src}",
                    repository_name="DatasetStore",
                    operation_type="load",
                    resource=str(src),
                )
        return ConceptExamples(
            concept=meta.get("concept", src.name),
            kind=meta.get("kind", "tag" if src.name.startswith("tag_") else "entity"),
            **parts,
        )

    def load_concept_dir(self, root: Union[str, Path], concepts: Optional[List[str]] = None) -> Dict[str, ConceptExamples]:
        """루트 아래 개념 디렉토리 전체 (또는 지정 개념) 로드"""
        base = Path(root)
        names = concepts or sorted(p.name for p in base.iterdir() if (p / "positives").is_dir())
        return {name: self.load_concept_examples(base / name) for name in names}
