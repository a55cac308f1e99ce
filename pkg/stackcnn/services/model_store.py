"""Trained-model container.

Layout (little-endian)::

    b"SCNN" | u32 version | u32 json length | JSON | float64 tensors

The JSON block holds the architecture, training metadata and the ordered list
of tensor names and shapes; tensors follow in that order, C-contiguous.
"""

from __future__ import annotations

import json
import logging
from pathlib import Path

import numpy as np
from pydantic import ValidationError

from stackcnn.models.cnn import CnnModel
from stackcnn.schemas.classifier import Architecture, TrainingMetadata
from stackcnn.utils.errors import ConfigError, DataFormatError

logger = logging.getLogger(__name__)

MAGIC = b"SCNN"
VERSION = 1
PREAMBLE_DTYPE = np.dtype([("magic", "S4"), ("version", "<u4"), ("json_len", "<u4")])
TENSOR_DTYPE = np.dtype("<f8")


def dump_model(model: CnnModel) -> bytes:
    header = {
        "architecture": model.architecture.model_dump(mode="json"),
        "metadata": model.metadata.model_dump(mode="json"),
        "tensors": [{"name": name, "shape": list(value.shape)} for name, value in model.params.items()],
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    preamble = np.array([(MAGIC, VERSION, len(blob))], dtype=PREAMBLE_DTYPE).tobytes()
    tensors = b"".join(np.ascontiguousarray(v, dtype=TENSOR_DTYPE).tobytes() for v in model.params.values())
    return preamble + blob + tensors


def parse_model(data: bytes) -> CnnModel:
    if len(data) < PREAMBLE_DTYPE.itemsize:
        raise DataFormatError("model file is truncated")
    preamble = np.frombuffer(data, dtype=PREAMBLE_DTYPE, count=1)[0]
    if bytes(preamble["magic"]) != MAGIC:
        raise DataFormatError("not a model file: bad magic")
    if int(preamble["version"]) != VERSION:
        raise DataFormatError(f"unsupported model version {int(preamble['version'])}")
    start = PREAMBLE_DTYPE.itemsize
    end = start + int(preamble["json_len"])
    if len(data) < end:
        raise DataFormatError("model file is truncated in its header")
    try:
        header = json.loads(data[start:end])
        architecture = Architecture.model_validate(header["architecture"])
        metadata = TrainingMetadata.model_validate(header["metadata"])
        layout = [(t["name"], tuple(t["shape"])) for t in header["tensors"]]
    except (ValueError, KeyError, TypeError, ValidationError) as exc:
        raise DataFormatError(f"malformed model header: {exc}") from exc

    params: dict[str, np.ndarray] = {}
    offset = end
    for name, shape in layout:
        count = int(np.prod(shape)) if shape else 1
        size = count * TENSOR_DTYPE.itemsize
        if len(data) < offset + size:
            raise DataFormatError(f"model file is truncated in tensor {name}")
        params[name] = np.frombuffer(data, dtype=TENSOR_DTYPE, count=count, offset=offset).reshape(shape).copy()
        offset += size
    if offset != len(data):
        raise DataFormatError(f"{len(data) - offset} trailing bytes after the last tensor")
    try:
        return CnnModel(architecture, params, metadata)
    except ConfigError as exc:
        raise DataFormatError(f"model tensors do not fit the architecture: {exc.detail}") from exc


def save_model(model: CnnModel, path: str | Path) -> Path:
    path = Path(path)
    path.write_bytes(dump_model(model))
    logger.info("wrote model %s (%d tensors)", path, len(model.params))
    return path


def load_model(path: str | Path) -> CnnModel:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read model {path}: {exc.strerror}") from exc
    return parse_model(data)


__all__ = ["dump_model", "parse_model", "save_model", "load_model"]
