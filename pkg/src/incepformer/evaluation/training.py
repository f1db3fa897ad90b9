"""Mini-batch training with augmentation, a step LR schedule and early stopping."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from ..autodiff import AdamState, Tape, adam_step, backward, cross_entropy_loss, log_softmax
from ..errors import ConfigError, DataError, NumericalError
from ..model import ModelConfig, ModelParams, init_params, model_forward, predict_logits
from ..pipeline import SubBandEpochs, zero_mask_batch
from ..rng import derive_rng

log = logging.getLogger(__name__)


@dataclass
class TrainSchedule:
    """Optimization budget and early-stopping rule.

    ``patience`` counts validation checks (one every ``eval_interval``
    mini-batches) without an improvement larger than ``min_delta``.
    """

    total_batches: int = 5000
    batch_size: int = 64
    base_lr: float = 1e-3
    decay_factor: float = 0.5
    decay_interval: int = 1000
    lr_floor: float = 1e-5
    patience: int = 5
    eval_interval: int = 50
    min_delta: float = 1e-4
    val_fraction: float = 0.1
    mask_len: int = 50
    augment: bool = True
    seed: int = 0

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.total_batches <= 0:
            raise ConfigError("total_batches must be positive")
        if not 0.0 < self.decay_factor <= 1.0:
            raise ConfigError(f"decay_factor must lie in (0, 1], got {self.decay_factor}")
        if self.batch_size < 1 or self.decay_interval < 1 or self.eval_interval < 1:
            raise ConfigError("batch_size, decay_interval and eval_interval must be positive")
        if self.patience < 1:
            raise ConfigError("patience must be at least one check")
        if not 0.0 <= self.val_fraction < 1.0:
            raise ConfigError("val_fraction must lie in [0, 1)")
        if self.base_lr <= 0 or self.lr_floor < 0:
            raise ConfigError("learning rates must be positive")

    def lr_at(self, step: int) -> float:
        """Learning rate for 0-based mini-batch ``step``."""
        return max(self.base_lr * self.decay_factor ** (step // self.decay_interval), self.lr_floor)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "TrainSchedule":
        unknown = set(data) - {f.name for f in fields(cls)}
        if unknown:
            raise ConfigError(f"unknown schedule keys: {sorted(unknown)}")
        return cls(**data)


@dataclass
class TrainResult:
    model: ModelParams
    curve: list[dict] = field(default_factory=list)
    steps_run: int = 0
    best_step: int = 0
    best_val_loss: float = float("nan")
    stopped_early: bool = False
    n_train: int = 0
    n_val: int = 0


def stratified_split(labels: np.ndarray, fraction: float, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Indices (train, val) with about ``fraction`` of the trials held out, spread across classes.

    Trials are shuffled within each class and dealt round-robin over the
    classes (in random order), so every class contributes before any class
    contributes twice.
    """
    labels = np.asarray(labels)
    n_val = int(np.ceil(fraction * len(labels))) if fraction > 0 else 0
    if n_val == 0:
        return np.arange(len(labels)), np.array([], dtype=np.int64)
    classes = rng.permutation(np.unique(labels))
    pools = [list(rng.permutation(np.flatnonzero(labels == c))) for c in classes]
    order = []
    depth = 0
    while len(order) < len(labels):
        for pool in pools:
            if depth < len(pool):
                order.append(pool[depth])
        depth += 1
    val = np.sort(np.array(order[:n_val], dtype=np.int64))
    train = np.setdiff1d(np.arange(len(labels)), val)
    return train, val


def batch_loss(model: ModelParams, x: np.ndarray, y: np.ndarray) -> float:
    """Mean cross-entropy in eval mode, without the weight penalty."""
    logp = log_softmax(predict_logits(model, x))
    return float(-logp[np.arange(len(y)), y].mean())


def train_run(
    train: SubBandEpochs,
    schedule: TrainSchedule,
    config: ModelConfig,
    rng: np.random.Generator | None = None,
    init: ModelParams | None = None,
) -> TrainResult:
    """Train a fresh model on ``train`` and return the best-validation parameters.

    ``rng`` drives initialization, the validation split, batch order, masks
    and dropout; it defaults to a stream derived from ``schedule.seed``.
    """
    labels = np.asarray(train.labels, dtype=np.int64)
    if len(np.unique(labels)) < 2:
        raise DataError("training data must contain at least two classes")
    if labels.max() >= config.n_classes:
        raise DataError(f"label {labels.max()} outside the model's {config.n_classes} classes")
    rng = rng if rng is not None else derive_rng(schedule.seed, "train")
    model = init if init is not None else init_params(config, rng)
    tr_idx, val_idx = stratified_split(labels, schedule.val_fraction, rng)
    x_tr, y_tr = train.data[tr_idx], labels[tr_idx]
    x_val, y_val = train.data[val_idx], labels[val_idx]
    batch = min(schedule.batch_size, len(tr_idx))
    if batch < 2:
        raise DataError("fewer than two training trials remain after the validation split")

    names = list(model.params)
    tensors = [model.params[k] for k in names]
    opt = AdamState(lr=schedule.base_lr, l2_coeff=config.l2_coeff)
    result = TrainResult(model=model, n_train=len(tr_idx), n_val=len(val_idx))
    best: ModelParams | None = None
    bad_checks = 0
    order = rng.permutation(len(tr_idx))
    cursor = 0
    recent: list[float] = []

    for step in range(schedule.total_batches):
        if cursor + batch > len(order):
            order = rng.permutation(len(tr_idx))
            cursor = 0
        idx = order[cursor:cursor + batch]
        cursor += batch
        xb = x_tr[idx]
        if schedule.augment and schedule.mask_len > 0:
            xb = zero_mask_batch(xb, schedule.mask_len, rng)
        for p in tensors:
            p.grad = None
        with Tape() as tape:
            logits = model_forward(xb, model, train=True, rng=rng)
            loss = cross_entropy_loss(logits, y_tr[idx], model.l2_weights(), config.l2_coeff)
        value = loss.item()
        if not np.isfinite(value):
            raise NumericalError(f"training loss became {value} at iteration {step}")
        grads = backward(tape, loss, tensors)
        opt.lr = schedule.lr_at(step)
        adam_step(model.params, dict(zip(names, grads)), opt)
        result.steps_run = step + 1
        recent.append(value)

        last = step + 1 == schedule.total_batches
        if (step + 1) % schedule.eval_interval == 0 or last:
            point = {"step": step + 1, "train_loss": float(np.mean(recent)), "lr": opt.lr}
            recent = []
            if len(val_idx):
                val_loss = batch_loss(model, x_val, y_val)
                if not np.isfinite(val_loss):
                    raise NumericalError(f"validation loss became {val_loss} at iteration {step}")
                point["val_loss"] = val_loss
                if best is None or val_loss < result.best_val_loss - schedule.min_delta:
                    best = model.copy()
                    result.best_val_loss = val_loss
                    result.best_step = step + 1
                    bad_checks = 0
                else:
                    bad_checks += 1
            result.curve.append(point)
            log.debug("step %d %s", step + 1, point)
            if bad_checks >= schedule.patience:
                result.stopped_early = not last
                break

    if best is not None:
        result.model = best
    else:
        result.best_step = result.steps_run
    return result
