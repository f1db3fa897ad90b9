"""Recording and epoch containers passed between pipeline stages."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError, DataError

OCCIPITAL_CHANNELS = ("Pz", "PO5", "PO3", "POz", "PO4", "PO6", "O1", "Oz", "O2")


@dataclass(frozen=True)
class Stimulus:
    index: int
    frequency: float
    phase: float


@dataclass(frozen=True)
class Trial:
    block: int
    trial: int
    stimulus: int
    onset: int


@dataclass(frozen=True)
class FilterSpec:
    low_hz: float
    high_hz: float
    order: int = 8
    kind: str = "bandpass"

    def validate(self, fs: float) -> None:
        if self.kind != "bandpass":
            raise ConfigError(f"only band-pass filters are supported, got {self.kind!r}")
        if not 0 < self.low_hz < self.high_hz < fs / 2:
            raise ConfigError(
                f"band {self.low_hz}-{self.high_hz} Hz must satisfy 0 < low < high < Nyquist ({fs / 2} Hz)"
            )
        if self.order < 1:
            raise ConfigError("filter order must be positive")


DEFAULT_BANDS = (FilterSpec(6.0, 50.0), FilterSpec(14.0, 50.0), FilterSpec(22.0, 50.0))


def jfpm_stimuli(n: int = 40, start_hz: float = 8.0, step_hz: float = 0.2, phase_step: float = 0.5 * np.pi):
    """Joint frequency-phase grid: ascending frequencies, phase advancing by ``phase_step``."""
    return [
        Stimulus(i, round(start_hz + step_hz * i, 10), float((phase_step * i) % (2 * np.pi)))
        for i in range(n)
    ]


@dataclass
class RawRecording:
    data: np.ndarray  # [channels, samples], microvolts
    fs: float
    channel_names: list[str]
    trials: list[Trial]
    stimuli: list[Stimulus]
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 2 or self.data.shape[0] != len(self.channel_names):
            raise DataError(f"data shape {self.data.shape} does not match {len(self.channel_names)} channel names")
        known = {s.index for s in self.stimuli}
        for tr in self.trials:
            if tr.stimulus not in known:
                raise DataError(f"trial {tr.trial} of block {tr.block} refers to unknown stimulus {tr.stimulus}")
            if not 0 <= tr.onset < self.data.shape[1]:
                raise DataError(f"trial {tr.trial} of block {tr.block} onset {tr.onset} outside recording")

    @property
    def n_samples(self) -> int:
        return self.data.shape[1]

    @property
    def blocks(self) -> list[int]:
        return sorted({t.block for t in self.trials})


@dataclass
class FilterBankRecording:
    data: np.ndarray  # [bands, channels, samples]
    fs: float
    channel_names: list[str]
    bands: list[FilterSpec]
    trials: list[Trial]
    stimuli: list[Stimulus]


@dataclass
class SubBandEpochs:
    data: np.ndarray  # [trials, bands, channels, samples]
    labels: np.ndarray  # stimulus index per trial
    blocks: np.ndarray  # block id per trial
    fs: float
    td: float
    tw: float
    channel_names: list[str]
    bands: list[FilterSpec]
    stimuli: list[Stimulus]
    declared_blocks: list[int] | None = None

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        self.blocks = np.asarray(self.blocks, dtype=np.int64)
        if self.data.ndim != 4:
            raise DataError(f"epochs must be [trials, bands, channels, samples], got {self.data.shape}")
        n = self.data.shape[0]
        if self.labels.shape != (n,) or self.blocks.shape != (n,):
            raise DataError("labels and blocks must have one entry per trial")
        if self.data.shape[1] != len(self.bands):
            raise DataError(f"band axis {self.data.shape[1]} does not match {len(self.bands)} band specs")
        if self.data.shape[2] != len(self.channel_names):
            raise DataError(f"channel axis {self.data.shape[2]} does not match {len(self.channel_names)} names")
        if n and (self.labels.min() < 0 or self.labels.max() >= len(self.stimuli)):
            raise DataError(f"labels must lie in [0, {len(self.stimuli) - 1}]")
        if self.declared_blocks is None:
            self.declared_blocks = sorted(int(b) for b in np.unique(self.blocks))

    @property
    def n_trials(self) -> int:
        return self.data.shape[0]

    @property
    def n_samples(self) -> int:
        return self.data.shape[3]

    @property
    def n_classes(self) -> int:
        return len(self.stimuli)

    @property
    def frequencies(self) -> list[float]:
        return [s.frequency for s in self.stimuli]

    def subset(self, mask_or_index) -> "SubBandEpochs":
        """Trials selected by a boolean mask or index array, sharing metadata."""
        idx = np.asarray(mask_or_index)
        return SubBandEpochs(
            self.data[idx], self.labels[idx], self.blocks[idx], self.fs, self.td, self.tw,
            list(self.channel_names), list(self.bands), list(self.stimuli), list(self.declared_blocks),
        )

    def select_bands(self, indices) -> "SubBandEpochs":
        indices = list(indices)
        return SubBandEpochs(
            self.data[:, indices], self.labels, self.blocks, self.fs, self.td, self.tw,
            list(self.channel_names), [self.bands[i] for i in indices], list(self.stimuli),
            list(self.declared_blocks),
        )
