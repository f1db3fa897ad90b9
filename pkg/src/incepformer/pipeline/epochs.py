"""Epoch slicing and zero-mask augmentation."""

from __future__ import annotations

import logging
import math

import numpy as np

from ..errors import EpochError
from .types import FilterBankRecording, SubBandEpochs

logger = logging.getLogger(__name__)


def seconds_to_samples(seconds: float, fs: float) -> int:
    """Round half up; the small slack absorbs binary error in products like 0.14 * 250."""
    return int(math.floor(seconds * fs + 0.5 + 1e-9))


def extract_epochs(fb: FilterBankRecording, td: float, tw: float, declared_blocks=None) -> SubBandEpochs:
    """Slice ``[onset + Td, onset + Td + Tw)`` from every band for every trial."""
    start_off = seconds_to_samples(td, fb.fs)
    length = seconds_to_samples(tw, fb.fs)
    if start_off < 0 or length < 1:
        raise EpochError(f"invalid window Td={td}, Tw={tw}")
    n_total = fb.data.shape[-1]
    out = np.empty((len(fb.trials), fb.data.shape[0], fb.data.shape[1], length))
    for i, tr in enumerate(fb.trials):
        lo = tr.onset + start_off
        hi = lo + length
        if hi > n_total:
            raise EpochError(
                f"trial {tr.trial} (block {tr.block}) window [{lo}, {hi}) exceeds {n_total} samples", trial=tr.trial
            )
        out[i] = fb.data[:, :, lo:hi]
    if declared_blocks is None:
        declared_blocks = sorted({t.block for t in fb.trials})
    return SubBandEpochs(
        data=out,
        labels=np.array([t.stimulus for t in fb.trials], dtype=np.int64),
        blocks=np.array([t.block for t in fb.trials], dtype=np.int64),
        fs=fb.fs,
        td=td,
        tw=tw,
        channel_names=list(fb.channel_names),
        bands=list(fb.bands),
        stimuli=list(fb.stimuli),
        declared_blocks=list(declared_blocks),
    )


def zero_mask_augment(epoch: np.ndarray, mask_len: int = 50, rng: np.random.Generator | None = None) -> np.ndarray:
    """Copy of ``epoch`` [..., samples] with one run of ``mask_len`` time points zeroed.

    The run start is uniform over every valid position and the same time
    indices are cleared in all bands and channels.
    """
    out = np.array(epoch, dtype=np.float64, copy=True)
    n = out.shape[-1]
    if mask_len <= 0:
        return out
    if n < mask_len:
        logger.warning("epoch has %d samples, fewer than mask length %d; augmentation skipped", n, mask_len)
        return out
    rng = rng if rng is not None else np.random.default_rng()
    start = int(rng.integers(0, n - mask_len + 1))
    out[..., start:start + mask_len] = 0.0
    return out


def zero_mask_batch(batch: np.ndarray, mask_len: int, rng: np.random.Generator) -> np.ndarray:
    """Independent zero-mask per trial of a [trials, ...] batch."""
    out = np.array(batch, dtype=np.float64, copy=True)
    n = out.shape[-1]
    if mask_len <= 0:
        return out
    if n < mask_len:
        logger.warning("epoch has %d samples, fewer than mask length %d; augmentation skipped", n, mask_len)
        return out
    starts = rng.integers(0, n - mask_len + 1, size=out.shape[0])
    for i, s in enumerate(starts):
        out[i, ..., s:s + mask_len] = 0.0
    return out
