"""Synthetic SSVEP recordings for desk-scale runs and tests."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .epochs import seconds_to_samples
from .types import OCCIPITAL_CHANNELS, RawRecording, Stimulus, Trial, jfpm_stimuli


def _harmonic_signal(freq: float, phase: float, t: np.ndarray, n_harmonics: int) -> np.ndarray:
    h = np.arange(1, n_harmonics + 1)[:, None]
    return (np.sin(2 * np.pi * h * freq * t[None, :] + h * phase) / h).sum(axis=0)


def _noise(power: np.ndarray, snr_db: float, shape, rng: np.random.Generator) -> np.ndarray:
    """White noise with per-channel power ``power / 10^(snr/10)``; ``power`` is [channels, 1]."""
    if np.isinf(snr_db) and snr_db > 0:
        return np.zeros(shape)
    return rng.standard_normal(shape) * np.sqrt(power / 10 ** (snr_db / 10))


def synth_ssvep_trial(
    freq: float,
    phase: float,
    fs: float,
    duration: float,
    n_harmonics: int = 3,
    snr_db: float = np.inf,
    rng: np.random.Generator | None = None,
    n_channels: int = len(OCCIPITAL_CHANNELS),
) -> np.ndarray:
    """[channels, samples] of gained harmonic sinusoids plus white noise at ``snr_db``.

    Harmonic h has amplitude 1/h and phase h * phase; each channel gets a
    gain drawn from U(0.5, 1.5).
    """
    rng = rng if rng is not None else np.random.default_rng()
    t = np.arange(seconds_to_samples(duration, fs)) / fs
    clean = _harmonic_signal(freq, phase, t, n_harmonics)
    gains = rng.uniform(0.5, 1.5, size=(n_channels, 1))
    sig = gains * clean[None, :]
    return sig + _noise(np.mean(sig**2, axis=-1, keepdims=True), snr_db, sig.shape, rng)


def synth_recording(
    stimuli: Sequence[Stimulus] | None = None,
    n_blocks: int = 6,
    fs: float = 250.0,
    cue: float = 0.5,
    stim_duration: float = 2.0,
    blank: float = 0.5,
    latency: float = 0.14,
    n_harmonics: int = 3,
    snr_db: float = 0.0,
    rng: np.random.Generator | None = None,
    channel_names: Sequence[str] = OCCIPITAL_CHANNELS,
) -> RawRecording:
    """Continuous recording of ``n_blocks`` blocks, one trial per stimulus per block.

    Each trial is cue + stimulus + blank seconds long. The response starts
    ``latency`` seconds after onset with zero phase reference there, so a
    window starting at Td = latency sees the stimulus phase exactly.
    """
    rng = rng if rng is not None else np.random.default_rng()
    stimuli = list(stimuli) if stimuli is not None else jfpm_stimuli()
    n_ch = len(channel_names)
    n_cue = seconds_to_samples(cue, fs)
    n_lat = seconds_to_samples(latency, fs)
    n_stim = seconds_to_samples(stim_duration, fs)
    seg = n_cue + n_stim + seconds_to_samples(blank, fs)
    data = np.zeros((n_ch, seg * n_blocks * len(stimuli)))
    trials = []
    pos = 0
    for block in range(n_blocks):
        for k, stim in enumerate(stimuli):
            response = synth_ssvep_trial(
                stim.frequency, stim.phase, fs, (n_stim - n_lat) / fs, n_harmonics, np.inf, rng, n_ch
            )
            clean = np.zeros((n_ch, seg))
            clean[:, n_cue + n_lat:n_cue + n_stim] = response
            # noise level follows the response power so the SNR holds inside the window
            power = np.mean(response**2, axis=-1, keepdims=True)
            data[:, pos:pos + seg] = clean + _noise(power, snr_db, clean.shape, rng)
            trials.append(Trial(block=block, trial=k, stimulus=stim.index, onset=pos + n_cue))
            pos += seg
    meta = {
        "generator": "synthetic",
        "snr_db": snr_db,
        "n_harmonics": n_harmonics,
        "latency": latency,
        "stim_duration": stim_duration,
    }
    return RawRecording(data, fs, list(channel_names), trials, stimuli, meta)


def raw_from_trial_array(
    data: np.ndarray,
    fs: float,
    channel_names: Sequence[str],
    blocks: Sequence[int],
    stimulus_ids: Sequence[int],
    stimuli: Sequence[Stimulus],
    onset: int,
) -> RawRecording:
    """Build a recording from a [trial, channel, sample] array (the import layout).

    Trials are laid end to end; ``onset`` is the stimulus-onset sample within
    each trial (125 for a 0.5 s cue at 250 Hz).
    """
    data = np.asarray(data, dtype=np.float64)
    n_trials, n_ch, n_samp = data.shape
    flat = data.transpose(1, 0, 2).reshape(n_ch, n_trials * n_samp)
    counters: dict[int, int] = {}
    trials = []
    for i, (b, s) in enumerate(zip(blocks, stimulus_ids)):
        k = counters.get(int(b), 0)
        counters[int(b)] = k + 1
        trials.append(Trial(block=int(b), trial=k, stimulus=int(s), onset=i * n_samp + onset))
    return RawRecording(flat, fs, list(channel_names), trials, list(stimuli), {"generator": "import"})
