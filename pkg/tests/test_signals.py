import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sleepsynth.signals import (Dataset, LabeledEpoch, Signal, resample, rms,
                                segment_epochs)
from tests.conftest import make_epoch


class TestSignal:
    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            Signal(np.array([]), 100)

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            Signal(np.array([1.0, np.nan]), 100)
        with pytest.raises(ValueError):
            Signal(np.array([1.0, np.inf]), 100)

    def test_rejects_bad_rate(self):
        with pytest.raises(ValueError):
            Signal(np.ones(10), 0)
        with pytest.raises(ValueError):
            Signal(np.ones(10), -5)

    def test_samples_are_read_only(self):
        sig = Signal(np.ones(10), 100)
        with pytest.raises(ValueError):
            sig.samples[0] = 3.0

    def test_duration(self):
        assert Signal(np.ones(500), 100).duration == 5.0


class TestResample:
    def test_length_arithmetic(self):
        out = resample(Signal(np.random.default_rng(0).normal(size=5000), 1000), 100)
        assert len(out) == 500
        assert out.sample_rate == 100

    def test_dc_invariance(self):
        for c in (0.0, 1.0, -3.7):
            sig = Signal(np.full(2000, c), 1000)
            out = resample(sig, 100)
            np.testing.assert_allclose(out.samples, c, atol=1e-12)

    def test_sinusoid_amplitude_preserved(self):
        # 2 Hz tone decimated 1 kHz -> 100 Hz vs the same tone sampled at
        # 100 Hz directly: amplitude must agree within 1%.
        t_hi = np.arange(5000) / 1000.0
        out = resample(Signal(np.sin(2 * np.pi * 2.0 * t_hi), 1000), 100)
        direct = np.sin(2 * np.pi * 2.0 * (np.arange(500) / 100.0))
        amp_out = np.sqrt(2.0) * rms(out.samples)
        amp_direct = np.sqrt(2.0) * rms(direct)
        assert abs(amp_out - amp_direct) / amp_direct < 0.01
        # waveform itself matches closely away from the filter edges
        np.testing.assert_allclose(out.samples[10:-10], direct[10:-10], atol=0.02)

    def test_non_integer_ratio_rejected(self):
        with pytest.raises(ValueError, match="non-integer"):
            resample(Signal(np.ones(100), 1000), 300)

    def test_identity_when_rates_equal(self):
        sig = Signal(np.arange(10, dtype=float), 100)
        out = resample(sig, 100)
        np.testing.assert_array_equal(out.samples, sig.samples)

    def test_chained_decimation_length_consistent(self):
        sig = Signal(np.random.default_rng(1).normal(size=4321), 1000)
        via_200 = resample(resample(sig, 200), 100)
        direct = resample(sig, 100)
        assert len(via_200) == len(direct)

    def test_deterministic(self):
        sig = Signal(np.random.default_rng(2).normal(size=3000), 1000)
        a = resample(sig, 100).samples
        b = resample(sig, 100).samples
        np.testing.assert_array_equal(a, b)


class TestSegmentEpochs:
    def test_single_epoch(self):
        sig = Signal(np.arange(5000, dtype=float), 1000)
        assert len(segment_epochs(sig, 5.0)) == 1

    def test_three_epochs(self):
        sig = Signal(np.arange(15000, dtype=float), 1000)
        assert len(segment_epochs(sig, 5.0)) == 3

    def test_floor_semantics(self):
        sig = Signal(np.arange(5200, dtype=float), 1000)
        eps = segment_epochs(sig, 5.0)
        assert len(eps) == 1
        assert len(eps[0]) == 5000

    def test_epoch_longer_than_signal(self):
        assert segment_epochs(Signal(np.ones(100), 100), 5.0) == []

    def test_non_integer_epoch_rejected(self):
        with pytest.raises(ValueError):
            segment_epochs(Signal(np.ones(100), 3), 0.1)

    @settings(deadline=None, max_examples=50)
    @given(n=st.integers(min_value=1, max_value=3000),
           n_per=st.integers(min_value=1, max_value=400))
    def test_concatenation_reproduces_prefix(self, n, n_per):
        rng = np.random.default_rng(n * 1000 + n_per)
        sig = Signal(rng.normal(size=n), 100)
        eps = segment_epochs(sig, n_per / 100.0)
        assert len(eps) == n // n_per
        if eps:
            recon = np.concatenate([e.samples for e in eps])
            np.testing.assert_array_equal(recon, sig.samples[: len(recon)])


class TestDataset:
    def test_mixed_rates_rejected(self):
        with pytest.raises(ValueError, match="rates"):
            Dataset([make_epoch(np.ones(100), rate=100),
                     make_epoch(np.ones(100), index=1, rate=200)])

    def test_mixed_lengths_rejected(self):
        with pytest.raises(ValueError, match="lengths"):
            Dataset([make_epoch(np.ones(100)), make_epoch(np.ones(200), index=1)])

    def test_duplicate_indices_rejected(self):
        with pytest.raises(ValueError, match="duplicate"):
            Dataset([make_epoch(np.ones(100)), make_epoch(np.ones(100))])

    def test_class_counts_match_histogram(self, toy_small_dataset):
        counts = toy_small_dataset.class_counts()
        by_hand = {}
        for e in toy_small_dataset:
            by_hand[e.label] = by_hand.get(e.label, 0) + 1
        for label, n in by_hand.items():
            assert counts[label] == n
        assert sum(counts.values()) == len(toy_small_dataset)

    def test_negative_epoch_index_rejected(self):
        with pytest.raises(ValueError):
            make_epoch(np.ones(100), index=-1)
