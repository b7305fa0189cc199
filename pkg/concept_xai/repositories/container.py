"""
버전 관리 바이너리 컨테이너

체크포인트와 CAV 파일이 공유하는 레이아웃 (모두 little-endian):

    magic (6 bytes)
    version            uint32
    header_length      uint64
    header             UTF-8 JSON (키 정렬, 공백 없음)
    tensor_count       uint32
    tensor * tensor_count:
        name_length    uint16
        name           UTF-8
        ndim           uint8
        shape          uint32 * ndim
        data           float64 * prod(shape)

같은 입력이면 항상 같은 바이트를 생성합니다.
"""

from __future__ import annotations

import json
import struct
from typing import Any, Dict, Iterable, List, Tuple

import numpy as np

from ..exceptions import CheckpointFormatError

MAGIC_LENGTH = 6


def pack_container(magic: bytes, version: int, header: Dict[str, Any], tensors: Iterable[Tuple[str, np.ndarray]]) -> bytes:
    """헤더와 텐서 목록을 바이트로 직렬화"""
    if len(magic) != MAGIC_LENGTH:
        raise ValueError(f"magic 은 {MAGIC_LENGTH} 바이트여야 합니다")
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode("utf-8")
    items = list(tensors)

    chunks: List[bytes] = [magic, struct.pack("<I", version), struct.pack("<Q", len(header_bytes)), header_bytes]
    chunks.append(struct.pack("<I", len(items)))
    for name, value in items:
        array = np.asarray(value, dtype="<f8")
        name_bytes = name.encode("utf-8")
        chunks.append(struct.pack("<H", len(name_bytes)))
        chunks.append(name_bytes)
        chunks.append(struct.pack("<B", array.ndim))
        chunks.append(struct.pack(f"<{array.ndim}I", *array.shape))
        chunks.append(np.ascontiguousarray(array).tobytes())
    return b"".join(chunks)


class _Reader:
    """경계 검사를 하는 바이트 커서"""

    def __init__(self, data: bytes, resource: str):
        self.data = data
        self.offset = 0
        self.resource = resource

    def take(self, size: int, what: str) -> bytes:
        end = self.offset + size
        if size < 0 or end > len(self.data):
            raise CheckpointFormatError(
                f"파일이 잘렸습니다: {what} 읽기 중 {end - len(self.data)} 바이트 부족",
                resource=self.resource,
                details={"offset": self.offset, "needed": size, "file_size": len(self.data)},
            )
        chunk = self.data[self.offset : end]
        self.offset = end
        return chunk

    def unpack(self, fmt: str, what: str) -> Tuple[Any, ...]:
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))


def unpack_container(
    data: bytes, magic: bytes, supported_versions: Iterable[int], resource: str = "<memory>"
) -> Tuple[int, Dict[str, Any], Dict[str, np.ndarray]]:
    """
    바이트 -> (version, header, tensors)

    Raises:
        CheckpointFormatError: magic 불일치, 미지원 버전, 잘린 파일, 손상된 헤더
    """
    reader = _Reader(data, resource)
    found_magic = reader.take(MAGIC_LENGTH, "magic")
    if found_magic != magic:
        raise CheckpointFormatError(
            f"알 수 없는 파일 형식입니다 (magic={found_magic!r}, 기대값={magic!r})", resource=resource
        )
    (version,) = reader.unpack("<I", "version")
    supported = sorted(supported_versions)
    if version not in supported:
        raise CheckpointFormatError(
            f"지원하지 않는 포맷 버전: {version} (지원: {supported})", resource=resource, format_version=version
        )

    (header_length,) = reader.unpack("<Q", "header length")
    try:
        header = json.loads(reader.take(header_length, "header").decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointFormatError(f"헤더 파싱 실패: {e}", resource=resource, format_version=version) from e

    (count,) = reader.unpack("<I", "tensor count")
    tensors: Dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_length,) = reader.unpack("<H", "tensor name length")
        try:
            name = reader.take(name_length, "tensor name").decode("utf-8")
        except UnicodeDecodeError as e:
            raise CheckpointFormatError(f"텐서 이름 디코딩 실패: {e}", resource=resource) from e
        (ndim,) = reader.unpack("<B", "tensor rank")
        shape = reader.unpack(f"<{ndim}I", f"shape of {name}") if ndim else ()
        size = int(np.prod(shape, dtype=np.int64)) if shape else 1
        raw = reader.take(8 * size, f"data of {name}")
        tensors[name] = np.frombuffer(raw, dtype="<f8").astype(np.float64).reshape(shape)

    if reader.offset != len(data):
        raise CheckpointFormatError(
            f"파일 끝에 {len(data) - reader.offset} 바이트가 남았습니다", resource=resource, format_version=version
        )
    return version, header, tensors
