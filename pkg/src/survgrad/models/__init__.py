"""Survival model heads sharing survival-curve and input-gradient prediction."""

from __future__ import annotations

import json

from .base import (
    FeatureStats,
    FittedModel,
    SurvivalCurveMatrix,
    predict_gradient,
    predict_survival,
)
from .breslow import breslow_baseline, step_cumulative
from .coxtime import CoxTimeModel, fit_coxtime
from .deephit import DeepHitModel, fit_deephit
from .deepsurv import DeepSurvModel, fit_deepsurv
from .oracle import CoxWeibullOracle
from .training import TrainConfig

MODEL_FORMAT = "survgrad-model"
MODEL_FORMAT_VERSION = 1

_VARIANTS = {
    "deepsurv": DeepSurvModel,
    "coxtime": CoxTimeModel,
    "deephit": DeepHitModel,
    "oracle": CoxWeibullOracle,
}

FIT_FUNCTIONS = {
    "deepsurv": fit_deepsurv,
    "coxtime": fit_coxtime,
    "deephit": fit_deephit,
}


def save_model(model: FittedModel, path) -> None:
    doc = {"format": MODEL_FORMAT, "version": MODEL_FORMAT_VERSION}
    doc.update(model.to_json_dict())
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True)
        fh.write("\n")


def load_model(path) -> FittedModel:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format") != MODEL_FORMAT:
        raise ValueError(f"{path}: not a {MODEL_FORMAT} document")
    variant = doc.get("variant")
    if variant not in _VARIANTS:
        raise ValueError(f"{path}: unknown model variant {variant!r}")
    return _VARIANTS[variant].from_json_dict(doc)


__all__ = [
    "CoxTimeModel",
    "CoxWeibullOracle",
    "DeepHitModel",
    "DeepSurvModel",
    "FeatureStats",
    "FIT_FUNCTIONS",
    "FittedModel",
    "SurvivalCurveMatrix",
    "TrainConfig",
    "breslow_baseline",
    "fit_coxtime",
    "fit_deephit",
    "fit_deepsurv",
    "load_model",
    "predict_gradient",
    "predict_survival",
    "save_model",
    "step_cumulative",
]
