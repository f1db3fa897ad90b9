"""Band-pass filter design and zero-phase application."""

from __future__ import annotations

from typing import Sequence

import numpy as np
from scipy import signal as sps

from ..errors import ChannelLookupError
from .types import DEFAULT_BANDS, OCCIPITAL_CHANNELS, FilterBankRecording, FilterSpec, RawRecording


def design_bandpass(spec: FilterSpec, fs: float, output: str = "ba"):
    """Butterworth band-pass coefficients.

    ``output="ba"`` gives (numerator, denominator); ``output="sos"`` gives
    second-order sections, which stay accurate at high orders.
    """
    spec.validate(fs)
    if output not in ("ba", "sos"):
        raise ValueError(f"output must be 'ba' or 'sos', got {output!r}")
    return sps.butter(spec.order, [spec.low_hz, spec.high_hz], btype="bandpass", fs=fs, output=output)


def filtfilt(coeffs, x: np.ndarray, axis: int = -1) -> np.ndarray:
    """Zero-phase forward-backward filtering.

    ``coeffs`` is either a (b, a) pair or an [n, 6] SOS array. Edges are
    extended by odd reflection over 3 * (transfer-function length) samples.
    """
    x = np.asarray(x, dtype=np.float64)
    if isinstance(coeffs, np.ndarray) and coeffs.ndim == 2 and coeffs.shape[1] == 6:
        padlen = min(3 * (2 * coeffs.shape[0] + 1), x.shape[axis] - 1)
        return sps.sosfiltfilt(coeffs, x, axis=axis, padtype="odd", padlen=padlen)
    b, a = coeffs
    padlen = min(3 * max(len(b), len(a)), x.shape[axis] - 1)
    return sps.filtfilt(b, a, x, axis=axis, padtype="odd", padlen=padlen)


def pick_channels(rec: RawRecording, channels: Sequence[str]) -> np.ndarray:
    lookup = {name: i for i, name in enumerate(rec.channel_names)}
    rows = []
    for ch in channels:
        if ch not in lookup:
            raise ChannelLookupError(ch)
        rows.append(lookup[ch])
    return rec.data[rows]


def apply_filter_bank(
    rec: RawRecording,
    specs: Sequence[FilterSpec] = DEFAULT_BANDS,
    channels: Sequence[str] = OCCIPITAL_CHANNELS,
) -> FilterBankRecording:
    """Restrict to ``channels`` (in the given order) and filter one copy per band."""
    picked = pick_channels(rec, channels)
    data = np.stack([filtfilt(design_bandpass(spec, rec.fs, "sos"), picked, axis=-1) for spec in specs])
    return FilterBankRecording(data, rec.fs, list(channels), list(specs), list(rec.trials), list(rec.stimuli))
