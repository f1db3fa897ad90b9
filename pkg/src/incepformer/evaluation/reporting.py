"""Report serialization, block-count ablation and feature export."""

from __future__ import annotations

import csv
import json
from dataclasses import replace
from pathlib import Path
from typing import Sequence

import numpy as np

from ..model import ModelConfig, ModelParams, extract_features
from ..pipeline import SubBandEpochs
from .protocol import EvalReport, run_subject
from .training import TrainSchedule

REPORT_JSON = "report.json"
REPORT_CSV = "report.csv"
FOLD_COLUMNS = ["test_block", "n_train", "n_val", "n_test", "accuracy", "steps_run", "best_step", "stopped_early"]


def report_json(report: EvalReport, include_meta: bool = True) -> str:
    payload = report.to_dict()
    if not include_meta:
        payload.pop("meta")
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def write_report(report: EvalReport, outdir) -> tuple[Path, Path]:
    """Write ``report.json`` and the per-fold ``report.csv`` into ``outdir``."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    json_path = outdir / REPORT_JSON
    json_path.write_text(report_json(report), encoding="utf-8")
    csv_path = outdir / REPORT_CSV
    with csv_path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(FOLD_COLUMNS)
        for fold in report.folds:
            writer.writerow([getattr(fold, c) for c in FOLD_COLUMNS])
    return json_path, csv_path


def read_report(path) -> EvalReport:
    path = Path(path)
    if path.is_dir():
        path = path / REPORT_JSON
    return EvalReport.from_dict(json.loads(path.read_text(encoding="utf-8")))


def ablation_sweep(
    epochs: SubBandEpochs,
    config: ModelConfig,
    schedule: TrainSchedule,
    n_blocks_list: Sequence[int] = (1, 2, 3, 4, 5, 6),
    workers: int = 1,
) -> list[dict]:
    """One leave-one-block-out evaluation per scale-block count."""
    rows = []
    for k in n_blocks_list:
        report = run_subject(epochs, replace(config, n_scale_blocks=int(k)), schedule, workers=workers)
        rows.append({
            "n_blocks": int(k),
            "mean_acc": report.mean_accuracy,
            "std_acc": report.std_accuracy,
            "itr": report.itr_bits_per_min,
        })
    return rows


def write_ablation_csv(rows: Sequence[dict], path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=["n_blocks", "mean_acc", "std_acc", "itr"], lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
    return path


def export_features(model: ModelParams, epochs: SubBandEpochs) -> tuple[np.ndarray, np.ndarray]:
    """Pre-classifier features [trials, feature_dim] and the matching labels."""
    return extract_features(model, epochs.data), np.asarray(epochs.labels, dtype=np.int64)


def write_features_csv(features: np.ndarray, labels: np.ndarray, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = ["trial", "label"] + [f"f{i}" for i in range(features.shape[1])]
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for i, (row, label) in enumerate(zip(features, labels)):
            writer.writerow([i, int(label)] + [repr(float(v)) for v in row])
    return path
