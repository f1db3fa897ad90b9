import json
import logging

import numpy as np
import pytest
from scipy import stats

from incepformer.errors import ArchiveFormatError, ChannelLookupError, ConfigError, EpochError
from incepformer.pipeline import (
    DEFAULT_BANDS,
    OCCIPITAL_CHANNELS,
    FilterBankRecording,
    FilterSpec,
    RawRecording,
    Stimulus,
    Trial,
    apply_filter_bank,
    design_bandpass,
    extract_epochs,
    filtfilt,
    jfpm_stimuli,
    load_epoch_archive,
    raw_from_trial_array,
    save_epoch_archive,
    synth_recording,
    synth_ssvep_trial,
    zero_mask_augment,
    zero_mask_batch,
)

FS = 250.0


def response_db(b, a, freq, fs=FS):
    """|H(e^{jw})| in dB from the coefficient polynomials directly."""
    z = np.exp(-1j * 2 * np.pi * freq / fs * np.arange(max(len(b), len(a))))
    h = np.dot(b, z[: len(b)]) / np.dot(a, z[: len(a)])
    return 20 * np.log10(abs(h))


def tone(freq, seconds=8.0, fs=FS):
    return np.sin(2 * np.pi * freq * np.arange(int(seconds * fs)) / fs)


def amplitude_and_lag(x, y, freq, fs=FS, max_lag=12):
    """Least-squares sinusoid amplitude of ``y`` and the lag maximizing xcorr(x, y), on the central half."""
    n = len(y)
    sl = slice(n // 4, 3 * n // 4)
    t = np.arange(n)[sl] / fs
    basis = np.stack([np.sin(2 * np.pi * freq * t), np.cos(2 * np.pi * freq * t)], axis=1)
    coef, *_ = np.linalg.lstsq(basis, y[sl], rcond=None)
    lags = range(-max_lag, max_lag + 1)
    xc = [np.dot(x[n // 4 + k:3 * n // 4 + k], y[sl]) for k in lags]
    return float(np.hypot(*coef)), list(lags)[int(np.argmax(xc))]


class TestDesign:
    def test_order4_passband_and_stopband(self):
        b, a = design_bandpass(FilterSpec(6, 50, order=4), FS)
        assert response_db(b, a, 20) >= -1.0
        assert response_db(b, a, 2) <= -20.0
        assert np.all(np.abs(np.roots(a)) < 1)

    @pytest.mark.parametrize("spec", DEFAULT_BANDS)
    def test_default_bank_stable(self, spec):
        _, a = design_bandpass(spec, FS)
        assert np.all(np.abs(np.roots(a)) < 1)

    @pytest.mark.parametrize("low,high", [(6, 125), (6, 130), (0, 50), (50, 40)])
    def test_bad_edges(self, low, high):
        with pytest.raises(ConfigError):
            design_bandpass(FilterSpec(low, high), FS)


@pytest.fixture(params=["ba", "sos"])
def band1(request):
    return design_bandpass(FilterSpec(6, 50), FS, request.param)


class TestFiltfilt:
    sos = design_bandpass(FilterSpec(6, 50), FS, "sos")

    def test_zero_signal(self, band1):
        np.testing.assert_array_equal(filtfilt(band1, np.zeros(500)), 0.0)

    def test_in_band_tone(self, band1):
        x = tone(10)
        amp, lag = amplitude_and_lag(x, filtfilt(band1, x), 10)
        assert 0.9 <= amp <= 1.0 + 1e-6
        assert lag == 0

    def test_low_tone_rejected(self, band1):
        x = tone(2)
        amp, _ = amplitude_and_lag(x, filtfilt(band1, x), 2)
        assert amp <= 0.1

    def test_sos_matches_transfer_function(self, rng):
        x = rng.normal(size=2000)
        ba = design_bandpass(FilterSpec(6, 50), FS)
        np.testing.assert_allclose(filtfilt(ba, x), filtfilt(self.sos, x), atol=1e-5)

    def test_linearity(self, rng):
        x, y = rng.normal(size=1000), rng.normal(size=1000)
        lhs = filtfilt(self.sos, 2.5 * x - 0.7 * y)
        rhs = 2.5 * filtfilt(self.sos, x) - 0.7 * filtfilt(self.sos, y)
        np.testing.assert_allclose(lhs, rhs, atol=1e-9)

    def test_bank_linearity(self, rng):
        x, y = rng.normal(size=(9, 800)), rng.normal(size=(9, 800))
        fx = apply_filter_bank(_recording(x)).data
        fy = apply_filter_bank(_recording(y)).data
        fxy = apply_filter_bank(_recording(1.5 * x + 3.0 * y)).data
        np.testing.assert_allclose(fxy, 1.5 * fx + 3.0 * fy, atol=1e-9)


def _recording(data, names=OCCIPITAL_CHANNELS, onset=125):
    stim = [Stimulus(0, 10.0, 0.0)]
    return RawRecording(data, FS, list(names), [Trial(0, 0, 0, onset)], stim)


class TestFilterBank:
    def test_shape(self, rng):
        fb = apply_filter_bank(_recording(rng.normal(size=(9, 1000))))
        assert fb.data.shape == (3, 9, 1000)

    def test_bands_differ(self, rng):
        d = apply_filter_bank(_recording(rng.normal(size=(9, 1000)))).data
        for i in range(3):
            for j in range(i + 1, 3):
                assert np.sqrt(np.mean((d[i] - d[j]) ** 2)) > 0

    def test_30hz_survives_all_bands(self):
        x = np.tile(tone(30), (9, 1))
        fb = apply_filter_bank(_recording(x))
        for band in range(3):
            amp, _ = amplitude_and_lag(x[0], fb.data[band, 4], 30)
            assert amp >= 0.9

    def test_channel_subset_and_order(self, rng):
        names = ["Fz", "Cz"] + list(OCCIPITAL_CHANNELS)[::-1]
        data = rng.normal(size=(11, 600))
        fb = apply_filter_bank(_recording(data, names))
        assert fb.channel_names == list(OCCIPITAL_CHANNELS)
        direct = filtfilt(design_bandpass(DEFAULT_BANDS[0], FS, "sos"), data[names.index("Oz")])
        np.testing.assert_allclose(fb.data[0, 7], direct, atol=1e-12)

    def test_missing_channel(self, rng):
        names = list(OCCIPITAL_CHANNELS[:-1]) + ["Cz"]
        with pytest.raises(ChannelLookupError, match="O2"):
            apply_filter_bank(_recording(rng.normal(size=(9, 600)), names))


def _fb(n_samples=1500, onsets=(125,), n_bands=3):
    data = np.broadcast_to(np.arange(n_samples, dtype=float), (n_bands, 9, n_samples)).copy()
    trials = [Trial(0, i, 0, o) for i, o in enumerate(onsets)]
    return FilterBankRecording(data, FS, list(OCCIPITAL_CHANNELS), list(DEFAULT_BANDS[:n_bands]), trials,
                               [Stimulus(0, 8.0, 0.0)])


class TestEpochs:
    def test_benchmark_geometry(self):
        ep = extract_epochs(_fb(), td=0.14, tw=1.0)
        assert ep.data.shape == (1, 3, 9, 250)
        assert ep.data[0, 0, 0, 0] == 160 and ep.data[0, 0, 0, -1] == 409

    def test_full_remaining_window(self):
        ep = extract_epochs(_fb(n_samples=1000, onsets=(100,)), td=0.0, tw=900 / FS)
        np.testing.assert_array_equal(ep.data[0, 1, 3], np.arange(100, 1000))

    @pytest.mark.parametrize("td", [0.13, 0.14, 0.0, 0.5])
    def test_length(self, td):
        ep = extract_epochs(_fb(onsets=(125, 400)), td=td, tw=1.0)
        assert ep.n_samples == 250

    def test_out_of_range(self):
        with pytest.raises(EpochError) as info:
            extract_epochs(_fb(n_samples=400, onsets=(125,)), td=0.14, tw=1.0)
        assert info.value.trial == 0

    def test_pure(self):
        fb = _fb(onsets=(125, 300))
        a = extract_epochs(fb, 0.14, 0.8).data
        b = extract_epochs(fb, 0.14, 0.8).data
        assert a.tobytes() == b.tobytes()


class TestZeroMask:
    def test_counts_and_contiguity(self, rng):
        epoch = rng.uniform(1, 2, size=(3, 9, 250))
        out = zero_mask_augment(epoch, 50, rng)
        zeros = out == 0
        assert zeros.sum() == 50 * 3 * 9
        cols = np.flatnonzero(zeros.all(axis=(0, 1)))
        assert len(cols) == 50 and np.all(np.diff(cols) == 1)
        assert not zeros.any(axis=(0, 1))[~zeros.all(axis=(0, 1))].any()

    def test_input_untouched(self, rng):
        epoch = rng.uniform(1, 2, size=(3, 9, 250))
        before = epoch.copy()
        zero_mask_augment(epoch, 50, rng)
        np.testing.assert_array_equal(epoch, before)

    def test_start_uniform(self):
        rng = np.random.default_rng(99)
        epoch = np.ones((1, 1, 250))
        starts = [int(np.argmax(zero_mask_augment(epoch, 50, rng)[0, 0] == 0)) for _ in range(10_000)]
        counts = np.bincount(starts, minlength=201)
        assert len(counts) == 201
        assert stats.chisquare(counts).pvalue > 0.01

    def test_short_epoch_skipped(self, caplog):
        epoch = np.ones((1, 1, 30))
        with caplog.at_level(logging.WARNING):
            out = zero_mask_augment(epoch, 50, np.random.default_rng(0))
        np.testing.assert_array_equal(out, epoch)
        assert "skipped" in caplog.text

    def test_batch_independent_runs(self, rng):
        batch = rng.uniform(1, 2, size=(20, 3, 9, 250))
        out = zero_mask_batch(batch, 50, rng)
        assert np.all((out == 0).sum(axis=(1, 2, 3)) == 50 * 27)
        starts = {int(np.argmax(out[i, 0, 0] == 0)) for i in range(20)}
        assert len(starts) > 1


class TestSynth:
    def test_zero_at_origin(self):
        x = synth_ssvep_trial(10.0, 0.0, FS, 1.0, 3, np.inf, np.random.default_rng(0))
        assert x.shape == (9, 250)
        np.testing.assert_allclose(x[:, 0], 0.0, atol=1e-15)

    def test_fft_peak(self):
        x = synth_ssvep_trial(10.0, 0.7, FS, 1.0, 1, np.inf, np.random.default_rng(0))
        spectrum = np.abs(np.fft.rfft(x, axis=1))
        freqs = np.fft.rfftfreq(250, 1 / FS)
        assert np.all(freqs[spectrum.argmax(axis=1)] == 10.0)

    def test_snr_zero_db(self):
        noisy = synth_ssvep_trial(9.4, 1.0, FS, 10.0, 3, 0.0, np.random.default_rng(5))
        clean = synth_ssvep_trial(9.4, 1.0, FS, 10.0, 3, np.inf, np.random.default_rng(5))
        ratio = np.mean((noisy - clean) ** 2, axis=1) / np.mean(clean**2, axis=1)
        assert np.all(np.abs(ratio - 1.0) < 0.1)

    def test_gains_in_range(self):
        x = synth_ssvep_trial(8.0, 0.0, FS, 1.0, 1, np.inf, np.random.default_rng(1))
        peak = np.abs(x).max(axis=1)
        assert np.all((peak > 0.5 * 0.99) & (peak < 1.5))

    def test_jfpm_grid(self):
        stim = jfpm_stimuli()
        assert len(stim) == 40
        assert stim[0].frequency == 8.0 and stim[-1].frequency == 15.8
        np.testing.assert_allclose(np.diff([s.frequency for s in stim]), 0.2, atol=1e-9)
        assert {round(s.phase / np.pi, 6) for s in stim} == {0.0, 0.5, 1.0, 1.5}

    def test_recording_phase_locked(self):
        rec = synth_recording(jfpm_stimuli(2), n_blocks=1, snr_db=np.inf, latency=0.14,
                              rng=np.random.default_rng(0))
        tr = rec.trials[1]
        start = tr.onset + 35
        # response begins at the latency with its stimulus phase
        assert np.all(rec.data[:, start - 1] == 0)
        expected = sum(np.sin(h * rec.stimuli[1].phase) / h for h in (1, 2, 3))
        ratio = rec.data[:, start] / expected
        assert np.all((ratio >= 0.5) & (ratio <= 1.5))

    def test_import_layout(self, rng):
        arr = rng.normal(size=(4, 9, 300))
        rec = raw_from_trial_array(arr, FS, OCCIPITAL_CHANNELS, [0, 0, 1, 1], [0, 1, 0, 1], jfpm_stimuli(2), 125)
        assert rec.data.shape == (9, 1200)
        assert [t.onset for t in rec.trials] == [125, 425, 725, 1025]
        np.testing.assert_array_equal(rec.data[:, 300:600], arr[1])


class TestArchive:
    def _epochs(self, rng):
        rec = synth_recording(jfpm_stimuli(4), n_blocks=2, rng=rng)
        return extract_epochs(apply_filter_bank(rec), 0.14, 0.5)

    def test_roundtrip_epochs(self, tmp_path, rng):
        ep = self._epochs(rng)
        save_epoch_archive(ep, tmp_path / "a")
        back = load_epoch_archive(tmp_path / "a")
        np.testing.assert_array_equal(back.data, ep.data.astype(np.float32))
        np.testing.assert_array_equal(back.labels, ep.labels)
        np.testing.assert_array_equal(back.blocks, ep.blocks)
        assert back.channel_names == ep.channel_names and back.bands == ep.bands
        assert back.stimuli == ep.stimuli and (back.td, back.tw) == (ep.td, ep.tw)
        save_epoch_archive(back, tmp_path / "b")
        assert (tmp_path / "a" / "data.bin").read_bytes() == (tmp_path / "b" / "data.bin").read_bytes()

    def test_roundtrip_raw(self, tmp_path, rng):
        rec = synth_recording(jfpm_stimuli(3), n_blocks=1, rng=rng)
        save_epoch_archive(rec, tmp_path)
        back = load_epoch_archive(tmp_path)
        assert isinstance(back, RawRecording)
        assert back.trials == rec.trials and back.stimuli == rec.stimuli
        np.testing.assert_array_equal(back.data, rec.data.astype(np.float32))

    def test_payload_layout(self, tmp_path, rng):
        ep = self._epochs(rng)
        save_epoch_archive(ep, tmp_path)
        raw = (tmp_path / "data.bin").read_bytes()
        assert raw[:8] == b"SSVEPA1\x00"
        first = np.frombuffer(raw[8:12], dtype="<f4")[0]
        assert first == np.float32(ep.data[0, 0, 0, 0])

    def test_channel_count_mismatch(self, tmp_path, rng):
        save_epoch_archive(self._epochs(rng), tmp_path)
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        manifest["channel_names"] = manifest["channel_names"][:-1]
        (tmp_path / "manifest.json").write_text(json.dumps(manifest))
        with pytest.raises(ArchiveFormatError, match="channels"):
            load_epoch_archive(tmp_path)

    def test_bad_magic(self, tmp_path, rng):
        save_epoch_archive(self._epochs(rng), tmp_path)
        raw = bytearray((tmp_path / "data.bin").read_bytes())
        raw[:8] = b"SSVEPW1\x00"
        (tmp_path / "data.bin").write_bytes(bytes(raw))
        with pytest.raises(ArchiveFormatError, match="magic"):
            load_epoch_archive(tmp_path)

    def test_truncated(self, tmp_path, rng):
        save_epoch_archive(self._epochs(rng), tmp_path)
        raw = (tmp_path / "data.bin").read_bytes()
        (tmp_path / "data.bin").write_bytes(raw[:-4])
        with pytest.raises(ArchiveFormatError, match="truncated"):
            load_epoch_archive(tmp_path)

    def test_malformed_manifest(self, tmp_path, rng):
        save_epoch_archive(self._epochs(rng), tmp_path)
        (tmp_path / "manifest.json").write_text("{not json")
        with pytest.raises(ArchiveFormatError):
            load_epoch_archive(tmp_path)

    def test_missing_directory(self, tmp_path):
        with pytest.raises(ArchiveFormatError):
            load_epoch_archive(tmp_path / "nope")
