"""Forecast-driven synthesis of labeled sleep-EEG signals.

Per-class time-series forecasters, trained on sliding-window pairs from
contiguous same-class runs, generate label-paired synthetic epochs by
recursive prediction; a spectrogram CNN measures synthetic-data utility
under original-only, synthetic-only, and combined training conditions.
"""

from .signals import (ClassLabel, Dataset, LabeledEpoch, Provenance, Signal,
                      resample, segment_epochs)
from .labeling import LabelingConfig, band_power, label_dataset
from .windowing import WindowConfig, WindowPair, build_class_streams, build_pairs
from .forecasters import (ForecasterModel, ForecasterSpec, TrainConfig,
                          huber_loss, init_model, predict, train_class_forecaster)
from .generator import SyntheticDataset, generate_recursive, synthesize_dataset
from .features import (NormStats, Spectrogram, STFTConfig, fit_norm_stats,
                       hann_window, log_scale, standardize, stft_power)
from .classifier import (ClassifierSpec, ClassifierTrainConfig, TrainedClassifier,
                         cross_entropy, predict_proba, train_classifier)
from .evaluation import (Condition, RunReport, SplitSpec, assemble_training_set,
                         compute_metrics, make_split, run_experiment_grid)
from .config import PipelineConfig, load_config
from .toy import make_toy_dataset

__version__ = "0.1.0"
