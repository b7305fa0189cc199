"""
Checkpoint Repository

체크포인트를 버전 관리 바이너리 파일로 저장/로드합니다.
헤더에는 구조 명세(ArchitectureSpec JSON)와 학습 메타데이터가,
본문에는 파라미터 텐서가 float64 little-endian 으로 기록됩니다.
"""

from __future__ import annotations

import logging
from abc import ABC, abstractmethod
from pathlib import Path
from typing import Union

from pydantic import ValidationError as PydanticValidationError

from ..exceptions import CheckpointFormatError, RepositoryError
from ..models import ArchitectureSpec, Checkpoint, TrainingMetadata
from .container import pack_container, unpack_container

# 로깅 설정
logger = logging.getLogger(__name__)

CHECKPOINT_MAGIC = b"CXAICK"
CHECKPOINT_VERSION = 1


class CheckpointRepository(ABC):
    """체크포인트 저장소 추상 클래스"""

    @abstractmethod
    def save(self, checkpoint: Checkpoint, path: Union[str, Path]) -> Path:
        """체크포인트 저장"""

    @abstractmethod
    def load(self, path: Union[str, Path]) -> Checkpoint:
        """체크포인트 로드"""


class BinaryCheckpointStore(CheckpointRepository):
    """
    바이너리 체크포인트 저장소

    save → load → save 는 바이트 단위로 동일한 파일을 만듭니다.
    """

    def encode(self, checkpoint: Checkpoint) -> bytes:
        header = {
            "format": "concept-xai-checkpoint",
            "architecture": checkpoint.architecture.model_dump(mode="json"),
            "metadata": checkpoint.metadata.to_dict(),
        }
        order = list(checkpoint.architecture.param_shapes())
        return pack_container(
            CHECKPOINT_MAGIC, CHECKPOINT_VERSION, header, ((name, checkpoint.params[name]) for name in order)
        )

    def decode(self, data: bytes, resource: str = "<memory>") -> Checkpoint:
        version, header, tensors = unpack_container(data, CHECKPOINT_MAGIC, [CHECKPOINT_VERSION], resource)
        try:
            architecture = ArchitectureSpec.model_validate(header["architecture"])
            metadata = TrainingMetadata.from_dict(header["metadata"])
            checkpoint = Checkpoint(architecture=architecture, params=tensors, metadata=metadata)
        except (KeyError, TypeError, ValueError, PydanticValidationError) as e:
            raise CheckpointFormatError(
                f"체크포인트 헤더/파라미터가 유효하지 않습니다: {e}", resource=resource, format_version=version
            ) from e

        expected = architecture.param_shapes()
        for name, shape in expected.items():
            if tuple(tensors[name].shape) != tuple(shape):
                raise CheckpointFormatError(
                    f"파라미터 '{name}' shape 불일치: {tensors[name].shape} != {shape}",
                    resource=resource,
                    format_version=version,
                )
        return checkpoint.freeze()

    def save(self, checkpoint: Checkpoint, path: Union[str, Path]) -> Path:
        out = Path(path)
        try:
            out.parent.mkdir(parents=True, exist_ok=True)
            out.write_bytes(self.encode(checkpoint))
        except OSError as e:
            raise RepositoryError(
                f"체크포인트 저장 실패: {e}",
                repository_name="BinaryCheckpointStore",
                operation_type="save",
                resource=str(out),
            ) from e
        logger.info("체크포인트 저장 완료: %s (파라미터 %d개)", out, checkpoint.parameter_count())
        return out

    def load(self, path: Union[str, Path]) -> Checkpoint:
        src = Path(path)
        try:
            data = src.read_bytes()
        except OSError as e:
            raise RepositoryError(
                f"체크포인트 읽기 실패: {e}",
                repository_name="BinaryCheckpointStore",
                operation_type="load",
                resource=str(src),
            ) from e
        checkpoint = self.decode(data, resource=str(src))
        logger.info("체크포인트 로드 완료: %s (model_id=%s)", src, checkpoint.model_id)
        return checkpoint
