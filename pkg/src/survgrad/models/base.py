"""Shared model-side types: fitted-model interface, curves, feature stats."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..data import SurvivalDataset, TimeGrid
from ..errors import ShapeError


@dataclass
class FeatureStats:
    """Per-feature summary of the fitting data (used by perturbation methods)."""

    minimum: np.ndarray
    maximum: np.ndarray
    mean: np.ndarray
    sd: np.ndarray

    @classmethod
    def from_data(cls, data: SurvivalDataset) -> "FeatureStats":
        X = data.features
        return cls(X.min(axis=0), X.max(axis=0), X.mean(axis=0), X.std(axis=0))

    def to_json_dict(self) -> dict:
        return {
            "minimum": self.minimum.tolist(),
            "maximum": self.maximum.tolist(),
            "mean": self.mean.tolist(),
            "sd": self.sd.tolist(),
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "FeatureStats":
        return cls(
            np.asarray(doc["minimum"], dtype=np.float64),
            np.asarray(doc["maximum"], dtype=np.float64),
            np.asarray(doc["mean"], dtype=np.float64),
            np.asarray(doc["sd"], dtype=np.float64),
        )


@dataclass
class SurvivalCurveMatrix:
    """Survival probabilities on a shared grid, one row per instance.

    Values are clamped into [0, 1] and monotonized by running minimum; keep raw
    model outputs for gradient work, this type is for metrics and plotting.
    """

    grid: TimeGrid
    values: np.ndarray  # (n, T)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2 or v.shape[1] != len(self.grid):
            raise ShapeError(f"curve matrix {v.shape} does not match grid length {len(self.grid)}")
        v = np.clip(v, 0.0, 1.0)
        self.values = np.minimum.accumulate(v, axis=1)


class FittedModel:
    """Common surface of all survival model variants.

    Subclasses provide raw ``survival_curves`` / ``gradient_curves`` plus a
    scalar ``risk_score`` for ranking metrics. Fitted models are immutable;
    prediction and gradient calls are safe to issue concurrently.
    """

    variant: str = "?"

    @property
    def p(self) -> int:
        raise NotImplementedError

    def survival_curves(self, X: np.ndarray, grid: TimeGrid) -> np.ndarray:
        """Raw S(t | x) values, shape (n, T). Not clamped."""
        raise NotImplementedError

    def gradient_curves(self, X: np.ndarray, grid: TimeGrid) -> np.ndarray:
        """dS(t | x)/dx, shape (n, p, T)."""
        raise NotImplementedError

    def risk_score(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def to_json_dict(self) -> dict:
        raise NotImplementedError

    def _check_features(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.p:
            raise ShapeError(f"X has {X.shape[1]} features, model expects {self.p}")
        if not np.all(np.isfinite(X)):
            raise ShapeError("feature values must be finite")
        return X


def predict_survival(model: FittedModel, X: np.ndarray, grid: TimeGrid) -> SurvivalCurveMatrix:
    """Survival curves as a clamped, monotone SurvivalCurveMatrix."""
    return SurvivalCurveMatrix(grid, model.survival_curves(X, grid))


def predict_gradient(model: FittedModel, x: np.ndarray, grid: TimeGrid) -> np.ndarray:
    """Gradient of S(t | x) w.r.t. the features of a single instance, shape (p, T)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ShapeError(f"x must be a single feature vector, got shape {x.shape}")
    return model.gradient_curves(x[None, :], grid)[0]
