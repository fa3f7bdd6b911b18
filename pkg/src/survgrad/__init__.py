"""Survival neural networks with time-dependent gradient-based explanations."""

from .data import SurvivalDataset, TimeGrid, evaluation_grid, load_csv, save_csv, train_test_split
from .models import (
    CoxTimeModel,
    CoxWeibullOracle,
    DeepHitModel,
    DeepSurvModel,
    TrainConfig,
    fit_coxtime,
    fit_deephit,
    fit_deepsurv,
    load_model,
    predict_gradient,
    predict_survival,
    save_model,
)
from .simulation import SimDesign, design_preset, simulate

__version__ = "0.1.0"

__all__ = [
    "CoxTimeModel",
    "CoxWeibullOracle",
    "DeepHitModel",
    "DeepSurvModel",
    "SimDesign",
    "SurvivalDataset",
    "TimeGrid",
    "TrainConfig",
    "design_preset",
    "evaluation_grid",
    "fit_coxtime",
    "fit_deephit",
    "fit_deepsurv",
    "load_csv",
    "load_model",
    "predict_gradient",
    "predict_survival",
    "save_csv",
    "save_model",
    "simulate",
    "train_test_split",
]
