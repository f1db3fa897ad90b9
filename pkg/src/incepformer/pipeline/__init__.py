"""Raw EEG to filter-bank epochs: filtering, epoching, augmentation, synthesis, archives."""

from .archive import load_epoch_archive, save_epoch_archive
from .epochs import extract_epochs, seconds_to_samples, zero_mask_augment, zero_mask_batch
from .filters import apply_filter_bank, design_bandpass, filtfilt
from .synth import raw_from_trial_array, synth_recording, synth_ssvep_trial
from .types import (
    DEFAULT_BANDS,
    OCCIPITAL_CHANNELS,
    FilterBankRecording,
    FilterSpec,
    RawRecording,
    Stimulus,
    SubBandEpochs,
    Trial,
    jfpm_stimuli,
)

__all__ = [
    "DEFAULT_BANDS",
    "OCCIPITAL_CHANNELS",
    "FilterBankRecording",
    "FilterSpec",
    "RawRecording",
    "Stimulus",
    "SubBandEpochs",
    "Trial",
    "apply_filter_bank",
    "design_bandpass",
    "extract_epochs",
    "filtfilt",
    "jfpm_stimuli",
    "load_epoch_archive",
    "raw_from_trial_array",
    "save_epoch_archive",
    "seconds_to_samples",
    "synth_recording",
    "synth_ssvep_trial",
    "zero_mask_augment",
    "zero_mask_batch",
]
