"""Training-free SSVEP classifiers: standard CCA and filter-bank CCA."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DimensionError, NumericalError

RIDGE = 1e-9
# Whitening a covariance whose condition number exceeds this loses every
# significant digit of the correlations, so it is reported instead.
MAX_CONDITION = 1e12
BAND_EDGE_HZ = 50.0


@dataclass(frozen=True)
class CcaResult:
    correlations: np.ndarray  # descending
    x_weights: np.ndarray  # [ch_x, r]
    y_weights: np.ndarray  # [ch_y, r]


@dataclass
class ReferenceSet:
    """Sine/cosine templates per stimulus frequency, rows ordered sin h=1, cos h=1, sin h=2, ..."""

    frequencies: list[float]
    fs: float
    n_samples: int
    n_harmonics: list[int]
    matrices: list[np.ndarray]

    def __len__(self) -> int:
        return len(self.matrices)

    def __getitem__(self, i: int) -> np.ndarray:
        return self.matrices[i]


def harmonic_cap(freq: float, fs: float, n_harmonics: int, band_edge: float = BAND_EDGE_HZ) -> int:
    """Largest h <= n_harmonics with h * freq strictly below both the band edge and Nyquist."""
    limit = min(band_edge, fs / 2.0)
    h = n_harmonics
    while h > 1 and h * freq >= limit:
        h -= 1
    return h


def make_references(
    freqs: Sequence[float],
    fs: float,
    samples: int,
    n_harmonics: int = 5,
    cap: bool = True,
) -> ReferenceSet:
    """Build [2 * N_h, samples] sin/cos templates at t = k / fs.

    With ``cap`` the harmonic count of each frequency is reduced so every
    harmonic stays under 50 Hz and Nyquist.
    """
    if n_harmonics < 1 or samples < 1:
        raise ValueError("n_harmonics and samples must be positive")
    t = np.arange(samples) / fs
    counts, mats = [], []
    for f in freqs:
        nh = harmonic_cap(f, fs, n_harmonics) if cap else n_harmonics
        rows = []
        for h in range(1, nh + 1):
            rows.append(np.sin(2 * np.pi * h * f * t))
            rows.append(np.cos(2 * np.pi * h * f * t))
        counts.append(nh)
        mats.append(np.array(rows))
    return ReferenceSet([float(f) for f in freqs], float(fs), int(samples), counts, mats)


def _inv_sqrt(cov: np.ndarray, view: str) -> np.ndarray:
    vals, vecs = np.linalg.eigh(cov)
    cond = vals[-1] / vals[0] if vals[0] > 0 else np.inf
    if not np.isfinite(cond) or cond > MAX_CONDITION:
        raise NumericalError(f"view {view} is rank deficient after ridge (condition estimate {cond:.3e})")
    return (vecs / np.sqrt(vals)) @ vecs.T


def cca_corr(x: np.ndarray, y: np.ndarray, ridge: float = RIDGE) -> CcaResult:
    """Canonical correlations of views ``x`` [ch_x, samples] and ``y`` [ch_y, samples].

    Both views are centered, their covariances get ``ridge`` added to the
    diagonal, and the correlations are the singular values of the whitened
    cross-covariance.
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    y = np.atleast_2d(np.asarray(y, dtype=np.float64))
    if x.shape[1] != y.shape[1]:
        raise DimensionError(f"views have different lengths: {x.shape[1]} and {y.shape[1]}")
    n = x.shape[1]
    if n <= x.shape[0] + y.shape[0]:
        raise DimensionError(f"need more samples ({n}) than combined channels ({x.shape[0] + y.shape[0]})")
    xc = x - x.mean(axis=1, keepdims=True)
    yc = y - y.mean(axis=1, keepdims=True)
    cxx = xc @ xc.T / n + ridge * np.eye(x.shape[0])
    cyy = yc @ yc.T / n + ridge * np.eye(y.shape[0])
    cxy = xc @ yc.T / n
    wx, wy = _inv_sqrt(cxx, "X"), _inv_sqrt(cyy, "Y")
    u, s, vt = np.linalg.svd(wx @ cxy @ wy, full_matrices=False)
    return CcaResult(s, wx @ u, wy @ vt.T)


def cca_scores(epoch: np.ndarray, refs: ReferenceSet) -> np.ndarray:
    """First canonical correlation of ``epoch`` with every reference."""
    if epoch.shape[-1] != refs.n_samples:
        raise DimensionError(f"epoch has {epoch.shape[-1]} samples, references have {refs.n_samples}")
    return np.array([cca_corr(epoch, ref).correlations[0] for ref in refs.matrices])


def cca_classify(epoch: np.ndarray, refs: ReferenceSet) -> int:
    """Index of the reference with the largest first canonical correlation; ties go to the lowest index."""
    return int(np.argmax(cca_scores(epoch, refs)))


def fbcca_weights(n_bands: int, a: float = 1.25, b: float = 0.25) -> np.ndarray:
    n = np.arange(1, n_bands + 1, dtype=np.float64)
    return n ** (-a) + b


def fbcca_scores(sub_band_epoch: np.ndarray, refs: ReferenceSet, a: float = 1.25, b: float = 0.25) -> np.ndarray:
    """Weighted sum over bands of squared first canonical correlations, one score per reference."""
    sub_band_epoch = np.asarray(sub_band_epoch, dtype=np.float64)
    if sub_band_epoch.ndim != 3:
        raise DimensionError(f"expected [bands, channels, samples], got shape {sub_band_epoch.shape}")
    w = fbcca_weights(sub_band_epoch.shape[0], a, b)
    rho = np.stack([cca_scores(band, refs) for band in sub_band_epoch])
    return w @ rho**2


def fbcca_classify(sub_band_epoch: np.ndarray, refs: ReferenceSet, a: float = 1.25, b: float = 0.25) -> int:
    return int(np.argmax(fbcca_scores(sub_band_epoch, refs, a, b)))


def classify_epochs(data: np.ndarray, refs: ReferenceSet, method: str = "fbcca", **kwargs) -> np.ndarray:
    """Predictions for a [trials, bands, channels, samples] array.

    ``cca`` uses the first band only.
    """
    if method == "cca":
        return np.array([cca_classify(trial[0], refs) for trial in data], dtype=np.int64)
    if method == "fbcca":
        return np.array([fbcca_classify(trial, refs, **kwargs) for trial in data], dtype=np.int64)
    raise ValueError(f"unknown baseline method {method!r}; expected 'cca' or 'fbcca'")
