"""Dynamic-mode frequency features for multichannel recordings."""
__version__ = "0.1.0"

from .classifier import ConfusionMatrix, LinearModel, balanced_accuracy, predict, train
from .crossval import CvPlan, HyperGrid, LeakageError, make_plan, make_plans, nested_cv
from .dmd import ModeSet, SignalWindow, WindowDecomposition, exact_dmd, reconstruct, stack
from .features import (FeatureCache, SubjectRecord, sdm_features, subject_features,
                       tfdm_band_features, tfdm_histogram)
from .ingest import DataError, Recording, read_recording, window, write_recording
from .linalg import ConvergenceError, eig_dense, pinv_from_svd, thin_svd
from .spectrum import CANONICAL_BANDS, BandDef, amplitude_spectrum, band_average, fft_512
from .stats import bonferroni, f_cdf, f_sf, one_way_anova
from .synth import TrialSpec, generate_dataset, generate_trial

__all__ = [
    "BandDef", "CANONICAL_BANDS", "ConfusionMatrix", "ConvergenceError", "CvPlan", "DataError",
    "FeatureCache", "HyperGrid", "LeakageError", "LinearModel", "ModeSet", "Recording",
    "SignalWindow", "SubjectRecord", "TrialSpec", "WindowDecomposition", "amplitude_spectrum",
    "balanced_accuracy", "band_average", "bonferroni", "eig_dense", "exact_dmd", "f_cdf", "f_sf",
    "fft_512", "generate_dataset", "generate_trial", "make_plan", "make_plans", "nested_cv",
    "one_way_anova", "pinv_from_svd", "predict", "read_recording", "reconstruct", "sdm_features",
    "stack", "subject_features", "tfdm_band_features", "tfdm_histogram", "thin_svd", "train",
    "window", "write_recording",
]
