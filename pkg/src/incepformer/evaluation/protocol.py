"""Leave-one-block-out cross-validation over a subject's sub-band epochs."""

from __future__ import annotations

import hashlib
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from datetime import datetime, timezone
from typing import Sequence

import numpy as np

from ..errors import DataError
from ..model import ModelConfig, ModelParams, predict_logits, save_checkpoint
from ..pipeline import SubBandEpochs
from ..rng import derive_rng
from .metrics import AccuracyResult, accuracy_from_predictions, itr
from .training import TrainSchedule, train_run

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Fold:
    test_block: int
    train_blocks: tuple[int, ...]
    val_fraction: float


@dataclass(frozen=True)
class FoldPlan:
    folds: tuple[Fold, ...]

    def __len__(self) -> int:
        return len(self.folds)

    def __iter__(self):
        return iter(self.folds)


def lobo_split(blocks: Sequence[int], val_fraction: float = 0.1) -> FoldPlan:
    """One fold per distinct block, in ascending order of the held-out block."""
    unique = sorted({int(b) for b in blocks})
    if len(unique) < 2:
        raise DataError(f"leave-one-block-out needs at least two blocks, got {unique}")
    return FoldPlan(tuple(Fold(b, tuple(o for o in unique if o != b), val_fraction) for b in unique))


def evaluate_accuracy(model: ModelParams, test: SubBandEpochs) -> AccuracyResult:
    predictions = predict_logits(model, test.data).argmax(axis=1)
    return accuracy_from_predictions(test.labels, predictions, model.config.n_classes)


def fit_model_config(config: ModelConfig, epochs: SubBandEpochs) -> ModelConfig:
    """Copy of ``config`` with the data-dependent sizes taken from ``epochs``."""
    _, bands, channels, samples = epochs.data.shape
    return replace(config, n_bands=bands, n_channels=channels, n_samples=samples, n_classes=epochs.n_classes)


def fingerprint(payload: dict) -> str:
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"), allow_nan=False)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


@dataclass
class FoldResult:
    test_block: int
    train_blocks: list[int]
    n_train: int
    n_val: int
    n_test: int
    accuracy: float
    steps_run: int
    best_step: int
    stopped_early: bool
    confusion: list[list[int]]


@dataclass
class EvalReport:
    folds: list[FoldResult]
    mean_accuracy: float
    std_accuracy: float
    itr_bits_per_min: float
    n_classes: int
    window_s: float
    confusion: list[list[int]]
    per_class_accuracy: list[float | None]
    config: dict
    fingerprint: str
    meta: dict = field(default_factory=dict)

    @property
    def fold_accuracies(self) -> list[float]:
        return [f.accuracy for f in self.folds]

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "EvalReport":
        data = dict(data)
        data["folds"] = [FoldResult(**f) for f in data["folds"]]
        return cls(**data)


def _check_blocks(epochs: SubBandEpochs) -> list[int]:
    present = sorted({int(b) for b in epochs.blocks})
    declared = epochs.declared_blocks
    if declared is None:
        return present
    missing = sorted(set(int(b) for b in declared) - set(present))
    if missing:
        raise DataError(f"declared block(s) {missing} have no trials; refusing to skip their folds")
    extra = sorted(set(present) - set(int(b) for b in declared))
    if extra:
        raise DataError(f"trials reference undeclared block(s) {extra}")
    return sorted(int(b) for b in declared)


def _read_only(epochs: SubBandEpochs) -> SubBandEpochs:
    data = epochs.data.copy()
    data.flags.writeable = False
    return replace(epochs, data=data)


def run_fold(
    epochs: SubBandEpochs,
    fold: Fold,
    config: ModelConfig,
    schedule: TrainSchedule,
    checkpoint_dir=None,
) -> FoldResult:
    """Train on the fold's training blocks and score its held-out block.

    The held-out trials are only ever passed to :func:`evaluate_accuracy`.
    """
    train_mask = np.isin(epochs.blocks, fold.train_blocks)
    test_mask = epochs.blocks == fold.test_block
    if not test_mask.any():
        raise DataError(f"fold for block {fold.test_block} has no test trials")
    train = epochs.subset(train_mask)
    test = _read_only(epochs.subset(test_mask))
    sched = replace(schedule, val_fraction=fold.val_fraction)
    result = train_run(train, sched, config, rng=derive_rng(schedule.seed, "fold", fold.test_block))
    scored = evaluate_accuracy(result.model, test)
    if checkpoint_dir is not None:
        save_checkpoint(
            result.model,
            f"{checkpoint_dir}/fold-{fold.test_block}",
            {"test_block": fold.test_block, "steps_run": result.steps_run, "best_step": result.best_step,
             "curve": result.curve},
        )
    return FoldResult(
        test_block=fold.test_block,
        train_blocks=list(fold.train_blocks),
        n_train=result.n_train,
        n_val=result.n_val,
        n_test=int(test_mask.sum()),
        accuracy=scored.accuracy,
        steps_run=result.steps_run,
        best_step=result.best_step,
        stopped_early=result.stopped_early,
        confusion=scored.confusion.tolist(),
    )


def _fold_task(args):
    return run_fold(*args)


def run_subject(
    epochs: SubBandEpochs,
    config: ModelConfig,
    schedule: TrainSchedule,
    only_blocks: Sequence[int] | None = None,
    workers: int = 1,
    checkpoint_dir=None,
    run_config: dict | None = None,
) -> EvalReport:
    """Leave-one-block-out evaluation; ``only_blocks`` restricts which folds run.

    ``run_config`` is the resolved configuration recorded in the report and
    hashed into its fingerprint; it defaults to the model config and schedule.
    """
    started = time.perf_counter()
    blocks = _check_blocks(epochs)
    config = fit_model_config(config, epochs)
    plan = lobo_split(blocks, schedule.val_fraction)
    folds = [f for f in plan if only_blocks is None or f.test_block in set(only_blocks)]
    if not folds:
        raise DataError(f"no fold matches the requested block(s) {list(only_blocks or [])}")
    tasks = [(epochs, f, config, schedule, checkpoint_dir) for f in folds]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_fold_task, tasks))
    else:
        results = [_fold_task(t) for t in tasks]
    for r in results:
        log.info("block %d accuracy %.4f after %d mini-batches", r.test_block, r.accuracy, r.steps_run)

    accs = np.array([r.accuracy for r in results])
    confusion = np.sum([np.array(r.confusion) for r in results], axis=0)
    totals = confusion.sum(axis=1)
    per_class = [float(confusion[i, i] / totals[i]) if totals[i] else None for i in range(len(totals))]
    mean_acc = float(accs.mean())
    resolved = run_config if run_config is not None else {"model": config.to_dict(), "schedule": schedule.to_dict()}
    return EvalReport(
        folds=results,
        mean_accuracy=mean_acc,
        std_accuracy=float(accs.std()),
        itr_bits_per_min=itr(mean_acc, config.n_classes, epochs.tw),
        n_classes=config.n_classes,
        window_s=float(epochs.tw),
        confusion=confusion.tolist(),
        per_class_accuracy=per_class,
        config=resolved,
        fingerprint=fingerprint(resolved),
        meta={
            "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
            "wall_clock_s": round(time.perf_counter() - started, 3),
        },
    )


def _per_block_report(
    epochs: SubBandEpochs,
    predictions: np.ndarray,
    n_classes: int,
    run_config: dict,
    started: float,
) -> EvalReport:
    """Report for a classifier that needs no training: one row per block, every trial scored."""
    blocks = _check_blocks(epochs)
    folds = []
    for b in blocks:
        mask = epochs.blocks == b
        scored = accuracy_from_predictions(epochs.labels[mask], predictions[mask], n_classes)
        folds.append(FoldResult(b, [], 0, 0, int(mask.sum()), scored.accuracy, 0, 0, False, scored.confusion.tolist()))
    overall = accuracy_from_predictions(epochs.labels, predictions, n_classes)
    accs = np.array([f.accuracy for f in folds])
    per_class = [None if np.isnan(v) else float(v) for v in overall.per_class]
    mean_acc = float(accs.mean())
    return EvalReport(
        folds=folds,
        mean_accuracy=mean_acc,
        std_accuracy=float(accs.std()),
        itr_bits_per_min=itr(mean_acc, n_classes, epochs.tw),
        n_classes=n_classes,
        window_s=float(epochs.tw),
        confusion=overall.confusion.tolist(),
        per_class_accuracy=per_class,
        config=run_config,
        fingerprint=fingerprint(run_config),
        meta={
            "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
            "wall_clock_s": round(time.perf_counter() - started, 3),
        },
    )


def run_baseline(
    epochs: SubBandEpochs,
    method: str = "fbcca",
    n_harmonics: int = 5,
    a: float = 1.25,
    b: float = 0.25,
    run_config: dict | None = None,
) -> EvalReport:
    """Score CCA (first band) or FBCCA (all bands) on every trial, reported per block."""
    from ..baselines import classify_epochs, make_references

    started = time.perf_counter()
    refs = make_references(epochs.frequencies, epochs.fs, epochs.n_samples, n_harmonics)
    kwargs = {"a": a, "b": b} if method == "fbcca" else {}
    predictions = classify_epochs(epochs.data, refs, method, **kwargs)
    resolved = run_config if run_config is not None else {"method": method, "n_harmonics": n_harmonics, "a": a, "b": b}
    return _per_block_report(epochs, predictions, epochs.n_classes, resolved, started)


def evaluate_model_report(model: ModelParams, epochs: SubBandEpochs, run_config: dict) -> EvalReport:
    """Score a trained model on every trial of ``epochs``, reported per block."""
    started = time.perf_counter()
    if model.config.n_samples != epochs.n_samples or model.config.n_classes < epochs.n_classes:
        raise DataError(
            f"checkpoint expects {model.config.n_samples} samples and at most {model.config.n_classes} classes; "
            f"archive has {epochs.n_samples} samples and {epochs.n_classes} classes"
        )
    predictions = predict_logits(model, epochs.data).argmax(axis=1)
    return _per_block_report(epochs, predictions, model.config.n_classes, run_config, started)
