"""
CAV Repository

개념 × 레이어 설명 재료(CAV 방향 + 선택적 정규화 범위)를 파일로 저장해
CLI 호출 간에 재사용합니다. pooled / 정규화 pooled CAV 는 로드 시 방향에서 다시 계산됩니다.
"""

from __future__ import annotations

import logging
import re
from pathlib import Path
from typing import Dict, List, Optional, Union

from ..exceptions import CheckpointFormatError, RepositoryError
from ..models import Cav, ConceptLayerArtifact, NormalizationRange
from .container import pack_container, unpack_container

# 로깅 설정
logger = logging.getLogger(__name__)

CAV_MAGIC = b"CXAICV"
CAV_VERSION = 1
CAV_SUFFIX = ".cav"


def cav_filename(concept: str, layer: str) -> str:
    """파일 이름에 안전한 '<concept>__<layer>.cav'"""
    safe = lambda s: re.sub(r"[^A-Za-z0-9_.-]", "-", s)  # noqa: E731
    return f"{safe(concept)}__{safe(layer)}{CAV_SUFFIX}"


class CavStore:
    """CAV 파일 저장소"""

    def __init__(self, root: Union[str, Path]):
        self.root = Path(root)

    def encode(self, artifact: ConceptLayerArtifact, model_id: str = "") -> bytes:
        header = {
            "format": "concept-xai-cav",
            "concept": artifact.concept,
            "layer": artifact.layer,
            "model_id": model_id,
            "n_positives": artifact.cav.n_positives,
            "n_negatives": artifact.cav.n_negatives,
            "range": artifact.range.to_dict() if artifact.range is not None else None,
            "calibration_error": artifact.calibration_error,
        }
        return pack_container(CAV_MAGIC, CAV_VERSION, header, [("direction", artifact.cav.direction)])

    def decode(self, data: bytes, resource: str = "<memory>") -> ConceptLayerArtifact:
        # 순환 import 방지
        from ..services.cav_service import build_artifact

        version, header, tensors = unpack_container(data, CAV_MAGIC, [CAV_VERSION], resource)
        try:
            cav = Cav(
                layer=header["layer"],
                direction=tensors["direction"],
                concept=header["concept"],
                n_positives=int(header["n_positives"]),
                n_negatives=int(header["n_negatives"]),
            )
            stored_range = header.get("range")
            norm_range = (
                NormalizationRange(lower=stored_range["lower"], upper=stored_range["upper"], layer=cav.layer)
                if stored_range
                else None
            )
        except (KeyError, TypeError, ValueError) as e:
            raise CheckpointFormatError(f"CAV 파일이 유효하지 않습니다: {e}", resource=resource, format_version=version) from e
        artifact = build_artifact(cav, norm_range)
        artifact.calibration_error = header.get("calibration_error")
        return artifact

    def save(self, artifact: ConceptLayerArtifact, model_id: str = "", path: Optional[Union[str, Path]] = None) -> Path:
        out = Path(path) if path is not None else self.root / cav_filename(artifact.concept, artifact.layer)
        try:
            out.parent.mkdir(parents=True, exist_ok=True)
            out.write_bytes(self.encode(artifact, model_id))
        except OSError as e:
            raise RepositoryError(
                f"CAV 저장 실패: {e}", repository_name="CavStore", operation_type="save", resource=str(out)
            ) from e
        logger.debug("CAV 저장: %s", out)
        return out

    def load(self, path: Union[str, Path]) -> ConceptLayerArtifact:
        src = Path(path)
        try:
            data = src.read_bytes()
        except OSError as e:
            raise RepositoryError(
                f"CAV 읽기 실패: {e}", repository_name="CavStore", operation_type="load", resource=str(src)
            ) from e
        return self.decode(data, resource=str(src))

    def load_all(self, concepts: Optional[List[str]] = None) -> Dict[str, Dict[str, ConceptLayerArtifact]]:
        """
        root 아래 모든 CAV 파일 로드

        Returns:
            concept -> layer -> artifact
        """
        if not self.root.is_dir():
            raise RepositoryError(
                f"CAV 디렉토리가 없습니다: {self.root}",
                repository_name="CavStore",
                operation_type="load",
                resource=str(self.root),
            )
        result: Dict[str, Dict[str, ConceptLayerArtifact]] = {}
        for path in sorted(self.root.glob(f"*{CAV_SUFFIX}")):
            artifact = self.load(path)
            if concepts is not None and artifact.concept not in concepts:
                continue
            result.setdefault(artifact.concept, {})[artifact.layer] = artifact
        logger.info("CAV 로드 완료: 개념 %d개 (%s)", len(result), self.root)
        return result
