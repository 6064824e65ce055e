"""Post-hoc confidence calibration for multiclass classifiers.

Works from exported logits and labels. Scaling methods (temperature, vector,
Dirichlet) and binary methods (histogram binning, isotonic regression, beta
calibration, BBQ) can be applied in the standard, one-versus-all or
top-versus-all formulation.
"""
from .adapters import (
    Calibrator,
    OvaEnsemble,
    apply_calibrator,
    fit,
    fit_ova,
    fit_standard,
    fit_tva,
    identity_calibrator,
)
from .dataset import (
    LogitsDataset,
    PredictionSummary,
    TvaBinarySet,
    build_tva_set,
    load_dataset,
    predict,
    save_dataset,
    softmax,
    split,
)
from .errors import (
    CalibrationError,
    DegenerateFitError,
    FormatError,
    InvalidInputError,
    InvalidParameterError,
    OptimizationError,
    UndefinedMetricError,
)
from .metrics import MetricsReport, auroc, brier, ece, evaluate, reliability_diagram
from .scaling import FitOptions
from .synthetic import SynthSpec, generate

__version__ = "0.1.0"

__all__ = [
    "Calibrator",
    "OvaEnsemble",
    "apply_calibrator",
    "fit",
    "fit_ova",
    "fit_standard",
    "fit_tva",
    "identity_calibrator",
    "LogitsDataset",
    "PredictionSummary",
    "TvaBinarySet",
    "build_tva_set",
    "load_dataset",
    "predict",
    "save_dataset",
    "softmax",
    "split",
    "CalibrationError",
    "DegenerateFitError",
    "FormatError",
    "InvalidInputError",
    "InvalidParameterError",
    "OptimizationError",
    "UndefinedMetricError",
    "MetricsReport",
    "auroc",
    "brier",
    "ece",
    "evaluate",
    "reliability_diagram",
    "FitOptions",
    "SynthSpec",
    "generate",
]
