import numpy as np
import pytest

from sleepsynth.features import (STAGE_LOG, STAGE_RAW, STFTConfig, Spectrogram,
                                 epoch_spectrogram, fit_norm_stats, hann_window,
                                 log_scale, standardize, stft_freqs, stft_power)
from sleepsynth.signals import Signal


def frame_dft_power_oracle(frame):
    """Brute-force DFT squared magnitudes of one windowed frame."""
    n = len(frame)
    bins = n // 2 + 1
    out = np.zeros(bins)
    for k in range(bins):
        re = sum(frame[t] * np.cos(2 * np.pi * k * t / n) for t in range(n))
        im = sum(-frame[t] * np.sin(2 * np.pi * k * t / n) for t in range(n))
        out[k] = re * re + im * im
    return out


class TestHannWindow:
    def test_zero_endpoints(self):
        for n in (2, 7, 128):
            w = hann_window(n)
            assert w[0] == 0.0
            assert w[-1] == pytest.approx(0.0, abs=1e-15)

    def test_odd_center_is_one(self):
        w = hann_window(129)
        assert w[64] == pytest.approx(1.0)

    def test_matches_formula(self):
        n = 128
        w = hann_window(n)
        for k in range(n):
            want = 0.5 * (1 - np.cos(2 * np.pi * k / (n - 1)))
            assert abs(w[k] - want) <= 1e-15

    def test_too_short_rejected(self):
        with pytest.raises(ValueError):
            hann_window(1)


class TestStftPower:
    config = STFTConfig()

    def test_epoch_shape(self):
        sig = Signal(np.random.default_rng(0).normal(size=500), 100)
        spec = stft_power(sig, self.config)
        assert spec.shape == (65, 6)
        assert spec.stage == STAGE_RAW

    def test_zero_signal(self):
        spec = stft_power(Signal(np.zeros(500), 100), self.config)
        np.testing.assert_array_equal(spec.values, 0.0)

    def test_frame_count_closed_form(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            n = int(rng.integers(128, 4000))
            sig = Signal(rng.normal(size=n), 100)
            spec = stft_power(sig, self.config)
            assert spec.shape == (65, (n - 128) // 64 + 1)

    def test_short_signal_rejected(self):
        with pytest.raises(ValueError):
            stft_power(Signal(np.ones(100), 100), self.config)

    def test_frames_cover_expected_samples(self):
        # frame j windows samples [j*hop, j*hop + window)
        x = np.zeros(500)
        x[64:192] = 1.0  # exactly frame 1's support
        spec = stft_power(Signal(x, 100), self.config)
        power_per_frame = spec.values.sum(axis=0)
        assert power_per_frame[1] > 0
        assert power_per_frame[4] == 0.0
        assert power_per_frame[5] == 0.0

    def test_bin_aligned_tone_concentrates(self):
        # 100 Hz * k/128 bins; k=16 -> 12.5 Hz is exactly bin-aligned
        rate, k = 100, 16
        freq = rate * k / 128
        t = np.arange(640) / rate
        spec = stft_power(Signal(np.sin(2 * np.pi * freq * t), rate), self.config)
        for j in range(spec.shape[1]):
            frame = spec.values[:, j]
            near = frame[k - 1 : k + 2].sum()
            assert near >= 0.95 * frame.sum()

    def test_matches_per_frame_dft_oracle(self):
        rng = np.random.default_rng(3)
        x = rng.normal(size=256)
        spec = stft_power(Signal(x, 100), self.config)
        window = hann_window(128)
        for j in range(spec.shape[1]):
            frame = x[j * 64 : j * 64 + 128] * window
            oracle = frame_dft_power_oracle(frame)
            np.testing.assert_allclose(spec.values[:, j], oracle,
                                       rtol=1e-8, atol=1e-8)

    def test_windowed_frame_parseval(self):
        rng = np.random.default_rng(4)
        x = rng.normal(size=500)
        spec = stft_power(Signal(x, 100), self.config)
        window = hann_window(128)
        weights = np.full(65, 2.0)
        weights[0] = 1.0
        weights[-1] = 1.0
        for j in range(spec.shape[1]):
            frame = x[j * 64 : j * 64 + 128] * window
            energy = float(np.sum(frame * frame))
            bin_sum = float((spec.values[:, j] * weights).sum()) / 128
            assert bin_sum == pytest.approx(energy, rel=1e-9)

    def test_freq_axis(self):
        freqs = stft_freqs(self.config, 100)
        assert freqs[0] == 0.0
        assert freqs[-1] == 50.0
        assert len(freqs) == 65

    def test_config_invariants(self):
        with pytest.raises(ValueError):
            STFTConfig(window_len=128, hop=32)
        with pytest.raises(ValueError):
            STFTConfig(window_len=1, hop=0)


class TestLogScale:
    def test_zero_maps_to_zero(self):
        spec = Spectrogram(values=np.zeros((5, 4)), stage=STAGE_RAW)
        np.testing.assert_array_equal(log_scale(spec).values, 0.0)

    def test_closed_form_value(self):
        spec = Spectrogram(values=np.full((2, 2), np.e - 1.0), stage=STAGE_RAW)
        np.testing.assert_allclose(log_scale(spec).values, 1.0, rtol=1e-15)

    def test_matches_scalar_loop_oracle(self):
        rng = np.random.default_rng(5)
        vals = rng.uniform(0, 50, size=(7, 9))
        got = log_scale(Spectrogram(values=vals, stage=STAGE_RAW)).values
        for i in range(7):
            for j in range(9):
                assert abs(got[i, j] - np.log(1.0 + vals[i, j])) < 1e-12

    def test_negative_rejected(self):
        spec = Spectrogram(values=np.array([[-0.1, 1.0]]), stage=STAGE_RAW)
        with pytest.raises(ValueError, match="negative"):
            log_scale(spec)

    def test_wrong_stage_rejected(self):
        spec = Spectrogram(values=np.ones((2, 2)), stage=STAGE_LOG)
        with pytest.raises(ValueError, match="stage"):
            log_scale(spec)


class TestStandardization:
    def make_specs(self, rng, n=20, shift=0.0):
        return [Spectrogram(values=rng.uniform(0, 5, size=(6, 4)) + shift,
                            stage=STAGE_LOG) for _ in range(n)]

    def test_self_standardization_is_zero_mean_unit_std(self):
        rng = np.random.default_rng(6)
        specs = self.make_specs(rng)
        stats = fit_norm_stats(specs)
        standardized = [standardize(s, stats) for s in specs]
        stacked = np.concatenate([s.values.ravel() for s in standardized])
        assert abs(stacked.mean()) < 1e-9
        assert abs(stacked.std() - 1.0) < 1e-9

    def test_constant_shift_invariance(self):
        rng = np.random.default_rng(7)
        base = self.make_specs(rng, n=5)
        shifted = [Spectrogram(values=s.values + 3.7, stage=STAGE_LOG) for s in base]
        out_base = [standardize(s, fit_norm_stats(base)) for s in base]
        out_shift = [standardize(s, fit_norm_stats(shifted)) for s in shifted]
        for a, b in zip(out_base, out_shift):
            np.testing.assert_allclose(a.values, b.values, atol=1e-12)

    def test_matches_two_pass_oracle(self):
        rng = np.random.default_rng(8)
        specs = self.make_specs(rng, n=100)
        stats = fit_norm_stats(specs)
        flat = np.concatenate([s.values.ravel() for s in specs])
        mean = sum(flat) / flat.size
        var = sum((v - mean) ** 2 for v in flat) / flat.size
        assert stats.mean == pytest.approx(mean, abs=1e-10)
        assert stats.std == pytest.approx(np.sqrt(var), abs=1e-10)

    def test_degenerate_constant_rejected(self):
        specs = [Spectrogram(values=np.ones((3, 3)), stage=STAGE_LOG)]
        with pytest.raises(ValueError, match="std is zero"):
            fit_norm_stats(specs)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            fit_norm_stats([])

    def test_stats_applied_to_new_data(self):
        rng = np.random.default_rng(9)
        train = self.make_specs(rng, n=10)
        stats = fit_norm_stats(train)
        other = Spectrogram(values=rng.uniform(0, 5, size=(6, 4)), stage=STAGE_LOG)
        out = standardize(other, stats)
        np.testing.assert_allclose(out.values,
                                   (other.values - stats.mean) / stats.std)

    def test_stage_guards(self):
        raw = Spectrogram(values=np.ones((2, 2)), stage=STAGE_RAW)
        with pytest.raises(ValueError):
            fit_norm_stats([raw])
        with pytest.raises(ValueError):
            standardize(raw, fit_norm_stats([Spectrogram(
                values=np.random.default_rng(0).uniform(size=(2, 2)),
                stage=STAGE_LOG)]))


class TestPipelineComposition:
    def test_epoch_spectrogram_deterministic(self):
        sig = Signal(np.random.default_rng(10).normal(size=500), 100)
        a = epoch_spectrogram(sig, STFTConfig())
        b = epoch_spectrogram(sig, STFTConfig())
        np.testing.assert_array_equal(a.values, b.values)
        assert a.stage == STAGE_LOG
