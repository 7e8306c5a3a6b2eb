"""
On-disk artifacts shared by the pipeline stages.

Tensor files hold named arrays in a little-endian binary layout:

    magic  b"CTRT"  | uint32 version | uint32 entry count
    per entry: uint16 name length, name (utf-8), uint8 dtype code (0=float64, 1=int64),
               uint8 ndim, ndim x uint64 dims, raw values (row-major, little-endian)

Manifests are plain text `key=value` lines.
"""

import logging
import struct
from collections import OrderedDict
from pathlib import Path
from typing import Any, Dict, Mapping, Optional

import numpy as np
import yaml

from main.utils.exceptions import InternalConsistencyError, MissingArtifactError

logger = logging.getLogger(__name__)

TENSOR_MAGIC = b"CTRT"
TENSOR_VERSION = 1
DTYPE_CODES = {0: np.dtype("<f8"), 1: np.dtype("<i8")}
MANIFEST_NAME = "manifest.txt"
RESOLVED_CONFIG_NAME = "resolved_config.yaml"


def _dtype_code(array: np.ndarray) -> int:
    if np.issubdtype(array.dtype, np.integer):
        return 1
    return 0


def write_tensor_file(path: Path, arrays: Mapping[str, np.ndarray]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    chunks = [TENSOR_MAGIC, struct.pack("<II", TENSOR_VERSION, len(arrays))]
    for name, value in arrays.items():
        array = np.asarray(value)
        code = _dtype_code(array)
        array = np.ascontiguousarray(array, dtype=DTYPE_CODES[code])
        encoded = name.encode("utf-8")
        chunks.append(struct.pack("<H", len(encoded)))
        chunks.append(encoded)
        chunks.append(struct.pack("<BB", code, array.ndim))
        chunks.append(struct.pack(f"<{array.ndim}Q", *array.shape))
        chunks.append(array.tobytes(order="C"))
    path.write_bytes(b"".join(chunks))
    return path


def read_tensor_file(path: Path) -> "OrderedDict[str, np.ndarray]":
    path = Path(path)
    if not path.exists():
        raise MissingArtifactError(f"tensor file {path} does not exist")
    payload = path.read_bytes()
    if payload[:4] != TENSOR_MAGIC:
        raise InternalConsistencyError(f"{path} is not a tensor file")
    version, count = struct.unpack_from("<II", payload, 4)
    if version != TENSOR_VERSION:
        raise InternalConsistencyError(f"{path}: unsupported tensor file version {version}")
    offset = 12
    arrays: "OrderedDict[str, np.ndarray]" = OrderedDict()
    for _ in range(count):
        (name_length,) = struct.unpack_from("<H", payload, offset)
        offset += 2
        name = payload[offset : offset + name_length].decode("utf-8")
        offset += name_length
        code, ndim = struct.unpack_from("<BB", payload, offset)
        offset += 2
        shape = struct.unpack_from(f"<{ndim}Q", payload, offset)
        offset += 8 * ndim
        dtype = DTYPE_CODES[code]
        nbytes = int(np.prod(shape, dtype=np.int64)) * dtype.itemsize
        arrays[name] = (
            np.frombuffer(payload, dtype=dtype, count=nbytes // dtype.itemsize, offset=offset)
            .reshape(shape)
            .copy()
        )
        offset += nbytes
    return arrays


def write_manifest(directory: Path, entries: Mapping[str, Any]) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    lines = [f"{key}={value}" for key, value in entries.items()]
    path = directory / MANIFEST_NAME
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def read_manifest(directory: Path) -> Dict[str, str]:
    path = Path(directory) / MANIFEST_NAME
    if not path.exists():
        raise MissingArtifactError(f"no manifest in {directory}")
    entries = {}
    for line in path.read_text(encoding="utf-8").splitlines():
        if "=" in line:
            key, value = line.split("=", 1)
            entries[key.strip()] = value.strip()
    return entries


def require_stage(directory: Path, stage: str, command: Optional[str] = None) -> Dict[str, str]:
    """Manifest of an upstream stage, or an error naming the command that produces it."""
    command = command or stage
    try:
        manifest = read_manifest(directory)
    except MissingArtifactError:
        raise MissingArtifactError(
            f"missing output of stage '{stage}' in {directory}; run `manage.py {command}` first",
            command=command,
        ) from None
    if manifest.get("stage") != stage:
        raise MissingArtifactError(
            f"{directory} holds stage '{manifest.get('stage')}', expected '{stage}'; "
            f"run `manage.py {command}` first",
            command=command,
        )
    return manifest


def write_resolved_config(directory: Path, config: Mapping[str, Any]) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / RESOLVED_CONFIG_NAME
    path.write_text(yaml.safe_dump(dict(config), sort_keys=True), encoding="utf-8")
    return path


def read_resolved_config(directory: Path) -> Dict[str, Any]:
    path = Path(directory) / RESOLVED_CONFIG_NAME
    if not path.exists():
        raise MissingArtifactError(f"no {RESOLVED_CONFIG_NAME} in {directory}")
    loaded = yaml.safe_load(path.read_text(encoding="utf-8"))
    return loaded or {}
