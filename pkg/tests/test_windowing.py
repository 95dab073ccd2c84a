import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sleepsynth.signals import ClassLabel, Dataset
from sleepsynth.windowing import (ClassStream, WindowConfig, build_class_streams,
                                  build_pairs, pair_count)
from tests.conftest import make_epoch, synthetic_dataset_of_labels

W, N, R = ClassLabel.WAKE, ClassLabel.NREM, ClassLabel.REM


def rle_oracle(labels):
    """Brute-force run-length encoding of a label sequence."""
    runs = []
    for label in labels:
        if runs and runs[-1][0] == label:
            runs[-1][1] += 1
        else:
            runs.append([label, 1])
    return [(label, n) for label, n in runs]


class TestBuildClassStreams:
    def test_adjacency_rule(self):
        ds = synthetic_dataset_of_labels([N, N, R, N])
        streams = build_class_streams(ds)
        assert sorted(len(r) for r in streams[N].runs) == [500, 1000]
        assert [len(r) for r in streams[R].runs] == [500]
        assert streams[W].runs == ()

    def test_single_epoch(self):
        ds = synthetic_dataset_of_labels([R])
        streams = build_class_streams(ds)
        assert len(streams[R].runs) == 1
        assert len(streams[R].runs[0]) == 500

    def test_runs_hold_epoch_samples_in_order(self):
        ds = synthetic_dataset_of_labels([N, N])
        run = build_class_streams(ds)[N].runs[0]
        expected = np.concatenate([ds[0].signal.samples, ds[1].signal.samples])
        np.testing.assert_array_equal(run, expected)

    def test_index_gap_breaks_run(self):
        eps = [make_epoch(np.ones(500) * i, label=N, index=i) for i in (0, 1, 5)]
        streams = build_class_streams(Dataset(eps))
        assert sorted(len(r) for r in streams[N].runs) == [500, 1000]

    def test_subject_change_breaks_run(self):
        eps = [make_epoch(np.ones(500), label=N, subject="a", index=0),
               make_epoch(np.ones(500), label=N, subject="b", index=1)]
        streams = build_class_streams(Dataset(eps))
        assert [len(r) for r in streams[N].runs] == [500, 500]

    @settings(deadline=None, max_examples=30)
    @given(labels=st.lists(st.sampled_from([W, N, R]), min_size=1, max_size=40))
    def test_matches_rle_oracle(self, labels):
        ds = synthetic_dataset_of_labels(labels, epoch_len=50)
        streams = build_class_streams(ds)
        oracle = rle_oracle(labels)
        for label in (W, N, R):
            got = sorted(len(r) for r in streams[label].runs)
            want = sorted(n * 50 for run_label, n in oracle if run_label == label)
            assert got == want
            # union of run lengths equals the class's total sample count
            assert sum(got) == 50 * sum(1 for x in labels if x == label)

    def test_order_independent_of_input_shuffle(self):
        labels = [N, R, N, N, W, R]
        ds = synthetic_dataset_of_labels(labels)
        shuffled = Dataset(np.random.default_rng(0).permutation(
            np.array(ds.epochs, dtype=object)).tolist())
        a = build_class_streams(ds)
        b = build_class_streams(shuffled)
        for label in (W, N, R):
            assert len(a[label].runs) == len(b[label].runs)
            for ra, rb in zip(a[label].runs, b[label].runs):
                np.testing.assert_array_equal(ra, rb)


class TestBuildPairs:
    def test_count_700_100_500(self):
        stream = ClassStream(label=N, runs=(np.arange(700, dtype=float),))
        pairs = build_pairs(stream, WindowConfig(100, 500))
        assert len(pairs) == 101

    def test_count_window_does_not_fit(self):
        stream = ClassStream(label=N, runs=(np.arange(500, dtype=float),))
        assert build_pairs(stream, WindowConfig(100, 500)) == []

    def test_slice_identity(self):
        rng = np.random.default_rng(23)
        run = rng.normal(size=300)
        stream = ClassStream(label=N, runs=(run,))
        config = WindowConfig(20, 50)
        pairs = build_pairs(stream, config)
        for t in rng.integers(0, len(pairs), size=10):
            np.testing.assert_array_equal(pairs[t].context, run[t : t + 20])
            np.testing.assert_array_equal(pairs[t].target, run[t + 20 : t + 70])

    def test_no_pair_crosses_run_boundary(self):
        # constant-valued runs: any pair mixing runs would mix values
        stream = ClassStream(label=N, runs=(np.full(80, 1.0), np.full(90, 2.0)))
        pairs = build_pairs(stream, WindowConfig(10, 30))
        assert len(pairs) == (80 - 40 + 1) + (90 - 40 + 1)
        for p in pairs:
            merged = np.concatenate([p.context, p.target])
            assert len(set(merged.tolist())) == 1

    @settings(deadline=None, max_examples=60)
    @given(T=st.integers(min_value=1, max_value=400),
           L=st.integers(min_value=1, max_value=80),
           H=st.integers(min_value=1, max_value=80))
    def test_count_formula_matches_enumeration(self, T, L, H):
        run = np.arange(T, dtype=float)
        config = WindowConfig(L, H)
        pairs = build_pairs(ClassStream(label=N, runs=(run,)), config)
        brute = [(run[t : t + L], run[t + L : t + L + H])
                 for t in range(T)
                 if t + L + H <= T]
        assert len(pairs) == max(0, T - L - H + 1) == pair_count(T, config)
        assert len(pairs) == len(brute)

    def test_pairs_are_read_only_views(self):
        stream = ClassStream(label=N, runs=(np.arange(100, dtype=float),))
        pairs = build_pairs(stream, WindowConfig(10, 20))
        with pytest.raises(ValueError):
            pairs[0].context[0] = 99.0

    def test_config_validation(self):
        with pytest.raises(ValueError):
            WindowConfig(0, 10)
        with pytest.raises(ValueError):
            WindowConfig(10, 0)
