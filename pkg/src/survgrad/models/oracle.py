"""Closed-form Weibull-baseline Cox model used as a ground-truth predictor."""

from __future__ import annotations

import numpy as np

from ..data import SurvivalDataset, TimeGrid
from ..simulation import SimDesign
from .base import FeatureStats, FittedModel


class CoxWeibullOracle(FittedModel):
    """S(t|x) = exp(-lam * gamma / g(x1) * exp(x beta) * t^g(x1)).

    ``g(x1) = gamma + tve_coeff * x1`` is the effective Weibull exponent; with
    ``tve_coeff = 0`` this reduces to S = exp(-lam * t^gamma * exp(x beta)).
    When g(x1) <= 0 the cumulative hazard diverges and S is 0 for any t > 0.
    """

    variant = "oracle"

    def __init__(
        self,
        lam: float,
        gamma: float,
        beta: np.ndarray,
        tve_coeff: float = 0.0,
        feature_stats: FeatureStats | None = None,
    ):
        self.lam = float(lam)
        self.gamma = float(gamma)
        self.beta = np.asarray(beta, dtype=np.float64)
        self.tve_coeff = float(tve_coeff)
        self.feature_stats = feature_stats
        if not (np.isfinite(self.lam) and np.isfinite(self.gamma) and np.isfinite(self.tve_coeff)):
            raise ValueError("oracle parameters must be finite")
        if not np.all(np.isfinite(self.beta)):
            raise ValueError("oracle coefficients must be finite")

    @classmethod
    def from_design(cls, design: SimDesign, data: SurvivalDataset | None = None):
        stats = FeatureStats.from_data(data) if data is not None else None
        return cls(design.lam, design.gamma, design.beta, design.tve_coeff, stats)

    @property
    def p(self) -> int:
        return self.beta.size

    def cumulative_hazard(self, X: np.ndarray, grid: TimeGrid) -> np.ndarray:
        X = self._check_features(X)
        eta = X @ self.beta
        expo = self.gamma + self.tve_coeff * X[:, 0]  # (n,)
        t = grid.points
        out = np.empty((X.shape[0], t.size))
        ok = expo > 0
        with np.errstate(over="ignore", invalid="ignore"):
            scale = self.lam * self.gamma / expo[ok] * np.exp(eta[ok])
            out[ok] = scale[:, None] * np.power(t[None, :], expo[ok, None])
        if (~ok).any():
            out[~ok] = np.where(t[None, :] > 0.0, np.inf, 0.0)
        return out

    def survival_curves(self, X: np.ndarray, grid: TimeGrid) -> np.ndarray:
        with np.errstate(over="ignore"):
            return np.exp(-self.cumulative_hazard(X, grid))

    def gradient_curves(self, X: np.ndarray, grid: TimeGrid) -> np.ndarray:
        X = self._check_features(X)
        n, T = X.shape[0], len(grid)
        H = self.cumulative_hazard(X, grid)
        S = np.exp(-np.minimum(H, 700.0))
        # dH/dx_j = H * beta_j for j > 1; the x1 derivative picks up the
        # log-time term and the 1/g factor of the effective exponent
        dH_dx = np.empty((n, self.p, T))
        dH_dx[:] = H[:, None, :] * self.beta[None, :, None]
        if self.tve_coeff != 0.0:
            expo = self.gamma + self.tve_coeff * X[:, 0]
            with np.errstate(divide="ignore", invalid="ignore"):
                extra = self.tve_coeff * (
                    np.log(grid.points)[None, :] - (1.0 / expo)[:, None]
                )
            dH_dx[:, 0, :] = H * (self.beta[0] + extra)
        grad = -S[:, None, :] * dH_dx
        # t -> 0 or diverged hazard: survival is flat in x there
        grad = np.where(np.isfinite(grad), grad, 0.0)
        grad[(H == 0.0)[:, None, :].repeat(self.p, axis=1)] = 0.0
        grad[(~np.isfinite(H))[:, None, :].repeat(self.p, axis=1)] = 0.0
        return grad

    def risk_score(self, X: np.ndarray) -> np.ndarray:
        X = self._check_features(X)
        return X @ self.beta

    def to_json_dict(self) -> dict:
        doc = {
            "variant": self.variant,
            "lam": self.lam,
            "gamma": self.gamma,
            "beta": self.beta.tolist(),
            "tve_coeff": self.tve_coeff,
        }
        if self.feature_stats is not None:
            doc["feature_stats"] = self.feature_stats.to_json_dict()
        return doc

    @classmethod
    def from_json_dict(cls, doc: dict) -> "CoxWeibullOracle":
        stats = doc.get("feature_stats")
        return cls(
            doc["lam"],
            doc["gamma"],
            np.asarray(doc["beta"]),
            doc.get("tve_coeff", 0.0),
            FeatureStats.from_json_dict(stats) if stats else None,
        )
