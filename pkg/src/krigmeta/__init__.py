"""Kriging metamodels for interpreting black-box model predictions."""
from .errors import KrigmetaError
from .kernel import KernelParams
from .kriging import FitConfig, KrigingModel, Optimizer, fit, predict_mean, predict_variance
from .surrogate import Surrogate, fit_surrogate

__all__ = [
    "FitConfig",
    "KernelParams",
    "KrigingModel",
    "KrigmetaError",
    "Optimizer",
    "Surrogate",
    "fit",
    "fit_surrogate",
    "predict_mean",
    "predict_variance",
]
