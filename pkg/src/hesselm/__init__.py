"""Regularized extreme learning machines with Hessenberg-accelerated PRESS selection.

The package turns ECG-like waveforms into second-order difference plot (SODP)
region features and classifies them with single-hidden-layer ELMs whose ridge
parameter is chosen by the PRESS statistic.
"""

from .elm import ElmModel, load_model, predict, press_mse, ridge_weights, save_model, train
from .errors import (
    ConvergenceError,
    DegenerateLeverageError,
    DimensionError,
    FormatVersionError,
    HessElmError,
    ModelFormatError,
    SingularMatrixError,
    TrainingError,
    ValidationError,
)
from .features import FeatureExtractor, PartitionSpec, extract, sodp
from .linalg import gram_eigendecompose, hessenberg_decompose
from .signals import SignalRecord, load_signal, notch_filter, remove_baseline, segment

__version__ = "0.1.0"

__all__ = [
    "ElmModel",
    "FeatureExtractor",
    "PartitionSpec",
    "SignalRecord",
    "extract",
    "gram_eigendecompose",
    "hessenberg_decompose",
    "load_model",
    "load_signal",
    "notch_filter",
    "predict",
    "press_mse",
    "remove_baseline",
    "ridge_weights",
    "save_model",
    "segment",
    "sodp",
    "train",
    "ConvergenceError",
    "DegenerateLeverageError",
    "DimensionError",
    "FormatVersionError",
    "HessElmError",
    "ModelFormatError",
    "SingularMatrixError",
    "TrainingError",
    "ValidationError",
]
