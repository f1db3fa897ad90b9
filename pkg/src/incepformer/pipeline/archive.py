"""Epoch-archive directories: ``manifest.json`` plus a raw float32 ``data.bin``.

``data.bin`` starts with the 8-byte magic ``SSVEPA1\\0`` followed by
little-endian IEEE-754 float32 values in row-major order, dimensions as
listed in the manifest's ``dims``/``shape``.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..errors import ArchiveFormatError
from .types import FilterSpec, RawRecording, Stimulus, SubBandEpochs, Trial

MAGIC = b"SSVEPA1\x00"
SCHEMA_VERSION = 1
DTYPE_TAG = "float32-le"
MANIFEST = "manifest.json"
PAYLOAD = "data.bin"

_DIMS = {
    "raw": ["channel", "sample"],
    "epochs": ["trial", "band", "channel", "sample"],
}


def _stimuli_json(stimuli):
    return [{"index": s.index, "frequency_hz": s.frequency, "phase_rad": s.phase} for s in stimuli]


def _bands_json(bands):
    return [{"low_hz": b.low_hz, "high_hz": b.high_hz, "order": b.order, "kind": b.kind} for b in bands]


def save_epoch_archive(obj: RawRecording | SubBandEpochs, path) -> Path:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "fs": obj.fs,
        "channel_names": list(obj.channel_names),
        "stimuli": _stimuli_json(obj.stimuli),
        "dtype": DTYPE_TAG,
    }
    if isinstance(obj, RawRecording):
        manifest.update(
            kind="raw",
            bands=[],
            trials=[{"block": t.block, "trial": t.trial, "stimulus": t.stimulus, "onset_sample": t.onset}
                    for t in obj.trials],
            meta=obj.meta,
        )
    elif isinstance(obj, SubBandEpochs):
        manifest.update(
            kind="epochs",
            bands=_bands_json(obj.bands),
            trials=[{"block": int(b), "stimulus": int(s)} for b, s in zip(obj.blocks, obj.labels)],
            window={"td": obj.td, "tw": obj.tw},
            declared_blocks=[int(b) for b in obj.declared_blocks],
        )
    else:
        raise TypeError(f"cannot archive {type(obj).__name__}")
    manifest["dims"] = _DIMS[manifest["kind"]]
    manifest["shape"] = list(obj.data.shape)
    payload = np.ascontiguousarray(obj.data, dtype="<f4")
    with open(path / PAYLOAD, "wb") as fh:
        fh.write(MAGIC)
        fh.write(payload.tobytes(order="C"))
    (path / MANIFEST).write_text(json.dumps(manifest, indent=2, sort_keys=True), encoding="utf-8")
    return path


def _require(manifest: dict, key: str):
    if key not in manifest:
        raise ArchiveFormatError(f"manifest is missing {key!r}")
    return manifest[key]


def load_epoch_archive(path) -> RawRecording | SubBandEpochs:
    path = Path(path)
    try:
        manifest = json.loads((path / MANIFEST).read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise ArchiveFormatError(f"no {MANIFEST} in {path}") from exc
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ArchiveFormatError(f"malformed manifest in {path}: {exc}") from exc
    if not isinstance(manifest, dict):
        raise ArchiveFormatError("manifest must be a JSON object")
    if _require(manifest, "schema_version") != SCHEMA_VERSION:
        raise ArchiveFormatError(f"unsupported schema version {manifest['schema_version']}")
    if _require(manifest, "dtype") != DTYPE_TAG:
        raise ArchiveFormatError(f"unsupported dtype tag {manifest['dtype']!r}")
    kind = _require(manifest, "kind")
    if kind not in _DIMS:
        raise ArchiveFormatError(f"unknown archive kind {kind!r}")
    dims, shape = _require(manifest, "dims"), _require(manifest, "shape")
    if dims != _DIMS[kind] or len(shape) != len(dims) or not all(isinstance(s, int) and s >= 0 for s in shape):
        raise ArchiveFormatError(f"dims {dims} / shape {shape} invalid for a {kind} archive")
    channels = _require(manifest, "channel_names")
    if shape[dims.index("channel")] != len(channels):
        raise ArchiveFormatError(
            f"manifest lists {len(channels)} channels but payload has {shape[dims.index('channel')]}"
        )
    trials = _require(manifest, "trials")
    if kind == "epochs":
        if shape[0] != len(trials):
            raise ArchiveFormatError(f"manifest lists {len(trials)} trials but payload has {shape[0]}")
        if shape[1] != len(_require(manifest, "bands")):
            raise ArchiveFormatError("band count in manifest does not match payload")

    try:
        raw = (path / PAYLOAD).read_bytes()
    except FileNotFoundError as exc:
        raise ArchiveFormatError(f"no {PAYLOAD} in {path}") from exc
    if raw[: len(MAGIC)] != MAGIC:
        raise ArchiveFormatError("bad magic bytes in payload")
    expected = len(MAGIC) + 4 * int(np.prod(shape))
    if len(raw) != expected:
        raise ArchiveFormatError(f"payload is {len(raw)} bytes, expected {expected} (truncated or padded)")
    data = np.frombuffer(raw, dtype="<f4", offset=len(MAGIC)).reshape(shape).astype(np.float64)

    try:
        stimuli = [Stimulus(int(s["index"]), float(s["frequency_hz"]), float(s["phase_rad"]))
                   for s in _require(manifest, "stimuli")]
        fs = float(_require(manifest, "fs"))
        if kind == "raw":
            return RawRecording(
                data, fs, list(channels),
                [Trial(int(t["block"]), int(t["trial"]), int(t["stimulus"]), int(t["onset_sample"])) for t in trials],
                stimuli, dict(manifest.get("meta", {})),
            )
        window = _require(manifest, "window")
        return SubBandEpochs(
            data=data,
            labels=np.array([t["stimulus"] for t in trials], dtype=np.int64),
            blocks=np.array([t["block"] for t in trials], dtype=np.int64),
            fs=fs,
            td=float(window["td"]),
            tw=float(window["tw"]),
            channel_names=list(channels),
            bands=[FilterSpec(float(b["low_hz"]), float(b["high_hz"]), int(b["order"]), b["kind"])
                   for b in manifest["bands"]],
            stimuli=stimuli,
            declared_blocks=[int(b) for b in manifest.get("declared_blocks", [])] or None,
        )
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ArchiveFormatError):
            raise
        raise ArchiveFormatError(f"inconsistent archive {path}: {exc}") from exc
