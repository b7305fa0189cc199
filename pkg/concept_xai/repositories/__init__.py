"""
Repositories package for data access layer

체크포인트, CAV, 데이터셋, 리포트 파일의 저장/로드를 담당합니다.
"""

from .cav_store import CavStore, cav_filename
from .checkpoint_store import BinaryCheckpointStore, CheckpointRepository
from .container import pack_container, unpack_container
from .dataset_store import DatasetStore, file_sha256, pixel_digest
from .report_store import ReportStore

__all__ = [
    "BinaryCheckpointStore",
    "CheckpointRepository",
    "CavStore",
    "cav_filename",
    "DatasetStore",
    "file_sha256",
    "pixel_digest",
    "ReportStore",
    "pack_container",
    "unpack_container",
]
