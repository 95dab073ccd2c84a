import numpy as np
import pytest

from sleepsynth.labeling import LabelingConfig, label_dataset
from sleepsynth.signals import ClassLabel, Dataset, LabeledEpoch, Signal
from sleepsynth.toy import make_toy_dataset


@pytest.fixture(scope="session")
def toy_small():
    """30 epochs/class toy recording with light noise, plus ground truth."""
    eeg, emg, truth = make_toy_dataset(epochs_per_class=30, noise_sigma=0.1, seed=42)
    return eeg, emg, truth


@pytest.fixture(scope="session")
def toy_small_dataset(toy_small) -> Dataset:
    eeg, emg, _ = toy_small
    return label_dataset(eeg, emg, 5.0, LabelingConfig(), subject_id="toy")


def make_epoch(samples, label=ClassLabel.NREM, subject="s1", index=0, rate=100):
    return LabeledEpoch(signal=Signal(np.asarray(samples, dtype=np.float64), rate),
                        label=label, subject_id=subject, epoch_index=index)


def synthetic_dataset_of_labels(labels, epoch_len=500, rate=100, subject="s1"):
    """Dataset with the given label sequence at consecutive indices."""
    rng = np.random.default_rng(0)
    return Dataset(
        make_epoch(rng.normal(size=epoch_len), label=label, subject=subject, index=i,
                   rate=rate)
        for i, label in enumerate(labels))
