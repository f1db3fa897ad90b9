"""Checkpoint directories: ``checkpoint.json`` name table plus ``params.bin``.

``params.bin`` is the magic ``SSVEPW1\\0`` followed by little-endian float32
tensors concatenated in name-table order; each entry records its shape and
byte offset from the start of the file.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..autodiff import Tensor
from ..errors import ArchiveFormatError
from .config import ModelConfig
from .network import ModelParams

MAGIC = b"SSVEPW1\x00"
FORMAT_VERSION = 1
INDEX = "checkpoint.json"
PAYLOAD = "params.bin"


def save_checkpoint(model: ModelParams, path, metadata: dict | None = None) -> Path:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    table = []
    chunks = [MAGIC]
    offset = len(MAGIC)
    entries = [("param", k, v.data) for k, v in model.params.items()]
    entries += [("buffer", k, v) for k, v in model.buffers.items()]
    for kind, name, arr in entries:
        blob = np.ascontiguousarray(arr, dtype="<f4").tobytes()
        table.append({"name": name, "kind": kind, "shape": list(arr.shape), "offset": offset})
        chunks.append(blob)
        offset += len(blob)
    (path / PAYLOAD).write_bytes(b"".join(chunks))
    index = {
        "format_version": FORMAT_VERSION,
        "dtype": "float32-le",
        "config": model.config.to_dict(),
        "tensors": table,
        "training": metadata or {},
    }
    (path / INDEX).write_text(json.dumps(index, indent=2, sort_keys=True), encoding="utf-8")
    return path


def load_checkpoint(path) -> tuple[ModelParams, dict]:
    """Return the model and its training metadata."""
    path = Path(path)
    try:
        index = json.loads((path / INDEX).read_text(encoding="utf-8"))
        raw = (path / PAYLOAD).read_bytes()
    except FileNotFoundError as exc:
        raise ArchiveFormatError(f"incomplete checkpoint at {path}: {exc.filename} missing") from exc
    except json.JSONDecodeError as exc:
        raise ArchiveFormatError(f"malformed {INDEX}: {exc}") from exc
    if index.get("format_version") != FORMAT_VERSION:
        raise ArchiveFormatError(f"unsupported checkpoint version {index.get('format_version')}")
    if raw[: len(MAGIC)] != MAGIC:
        raise ArchiveFormatError("bad magic bytes in checkpoint payload")
    config = ModelConfig.from_dict(index["config"])
    model = ModelParams(config)
    expected = dict(model.expected_shapes())
    for entry in index["tensors"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape))
        start = entry["offset"]
        if start + 4 * count > len(raw):
            raise ArchiveFormatError(f"tensor {entry['name']} runs past the end of {PAYLOAD}")
        arr = np.frombuffer(raw, dtype="<f4", count=count, offset=start).reshape(shape).astype(np.float64)
        if entry["kind"] == "param":
            if expected.get(entry["name"]) != shape:
                raise ArchiveFormatError(f"tensor {entry['name']} has shape {shape}, config expects "
                                         f"{expected.get(entry['name'])}")
            model.params[entry["name"]] = Tensor(arr, requires_grad=True, name=entry["name"])
        else:
            model.buffers[entry["name"]] = arr
    missing = set(expected) - set(model.params)
    if missing:
        raise ArchiveFormatError(f"checkpoint lacks tensors {sorted(missing)}")
    return model, index.get("training", {})
