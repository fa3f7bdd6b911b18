"""Proportional-hazards net: Cox partial likelihood + Breslow baseline."""

from __future__ import annotations

import numpy as np

from ..autodiff import DenseNet, backward_inputs, backward_params, forward, init_dense_net
from ..data import SurvivalDataset, TimeGrid
from ..errors import TrainingError
from .base import FeatureStats, FittedModel
from .breslow import breslow_baseline, step_cumulative
from .training import TrainConfig, TrainHistory, run_epochs, split_train_val


def cox_loss_and_upstream(
    g: np.ndarray, time: np.ndarray, event: np.ndarray
) -> tuple[float, np.ndarray]:
    """Negative log partial likelihood (Breslow ties) and its gradient in g.

    ``g`` is the (n,) vector of log risks; returns (loss, dloss/dg) with the
    loss averaged over events.
    """
    n = g.size
    d_total = int(event.sum())
    if d_total == 0:
        raise TrainingError("batch contains no events")
    order = np.argsort(time, kind="stable")
    ts, es, gs = time[order], event[order], g[order]
    gmax = gs.max()
    rx = np.exp(gs - gmax)
    suffix = np.cumsum(rx[::-1])[::-1]
    # tied event times share the risk set anchored at the first tied position
    first = np.searchsorted(ts, ts, side="left")
    ev = np.nonzero(es == 1)[0]
    denom = suffix[first[ev]]
    loss = -np.sum((gs[ev] - gmax) - np.log(denom)) / d_total

    # dL/dg_k = -(1/D) * (delta_k - exp(g_k) * sum_{events with t_i <= t_k} 1/denom_i)
    inv = np.zeros(n)
    np.add.at(inv, first[ev], 1.0 / denom)
    cum_inv = np.cumsum(inv)
    up_sorted = -(es - rx * cum_inv) / d_total
    upstream = np.empty(n)
    upstream[order] = up_sorted
    return float(loss), upstream


class DeepSurvModel(FittedModel):
    """Time-constant log-risk net g(x); S(t|x) = exp(-H0(t) * exp(g(x)))."""

    variant = "deepsurv"

    def __init__(
        self,
        net: DenseNet,
        baseline_times: np.ndarray,
        baseline_increments: np.ndarray,
        feature_stats: FeatureStats,
        config: TrainConfig,
        seed: int,
    ):
        self.net = net
        self.baseline_times = np.asarray(baseline_times, dtype=np.float64)
        self.baseline_increments = np.asarray(baseline_increments, dtype=np.float64)
        self.feature_stats = feature_stats
        self.config = config
        self.seed = seed
        self.history: TrainHistory | None = None

    @property
    def p(self) -> int:
        return self.net.input_width

    def log_risk(self, X: np.ndarray) -> np.ndarray:
        X = self._check_features(X)
        out, _ = forward(self.net, X, mode="eval")
        return out[:, 0]

    def risk_score(self, X: np.ndarray) -> np.ndarray:
        return self.log_risk(X)

    def _baseline_at(self, grid: TimeGrid) -> np.ndarray:
        return step_cumulative(self.baseline_times, self.baseline_increments, grid.points)

    def survival_curves(self, X: np.ndarray, grid: TimeGrid) -> np.ndarray:
        g = self.log_risk(X)
        h0 = self._baseline_at(grid)
        return np.exp(-np.outer(np.exp(g), h0))

    def gradient_curves(self, X: np.ndarray, grid: TimeGrid) -> np.ndarray:
        # dS/dx_j = -H0(t) exp(g) S(t|x) * dg/dx_j: one backward pass per batch
        X = self._check_features(X)
        out, tape = forward(self.net, X, mode="eval")
        dg = backward_inputs(tape, np.ones_like(out))  # (n, p)
        h0 = self._baseline_at(grid)
        risk = np.exp(out[:, 0])
        surv = np.exp(-np.outer(risk, h0))
        scale = -(h0[None, :] * risk[:, None]) * surv  # (n, T)
        return dg[:, :, None] * scale[:, None, :]

    def to_json_dict(self) -> dict:
        return {
            "variant": self.variant,
            "net": self.net.to_json_dict(),
            "baseline_times": self.baseline_times.tolist(),
            "baseline_increments": self.baseline_increments.tolist(),
            "feature_stats": self.feature_stats.to_json_dict(),
            "config": self.config.to_json_dict(),
            "seed": self.seed,
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "DeepSurvModel":
        return cls(
            DenseNet.from_json_dict(doc["net"]),
            np.asarray(doc["baseline_times"]),
            np.asarray(doc["baseline_increments"]),
            FeatureStats.from_json_dict(doc["feature_stats"]),
            TrainConfig.from_json_dict(doc["config"]),
            doc["seed"],
        )


def fit_deepsurv(data: SurvivalDataset, cfg: TrainConfig) -> DeepSurvModel:
    """Train the log-risk net by minimizing the Cox partial likelihood."""
    if data.n_events < 2:
        raise TrainingError(f"need at least 2 events to fit, got {data.n_events}")
    seq = np.random.SeedSequence(cfg.seed)
    rng_split, rng_init, rng_shuffle, rng_drop = (
        np.random.default_rng(s) for s in seq.spawn(4)
    )
    train, val = split_train_val(data, cfg.validation_fraction, rng_split)
    if train.n_events == 0 or val.n_events == 0:
        raise TrainingError("train/validation split left a part without events")

    net = init_dense_net(
        [data.p, *cfg.hidden, 1], cfg.activation, cfg.dropout, rng_init
    )

    def batch_step(net, idx):
        if not train.event[idx].any():
            return None
        out, tape = forward(net, train.features[idx], mode="train", rng=rng_drop)
        loss, up = cox_loss_and_upstream(out[:, 0], train.time[idx], train.event[idx])
        return loss, backward_params(tape, up[:, None])

    def val_loss(net):
        out, _ = forward(net, val.features, mode="eval")
        loss, _ = cox_loss_and_upstream(out[:, 0], val.time, val.event)
        return loss

    history = run_epochs(net, train.n, cfg, batch_step, val_loss, rng_shuffle)

    out, _ = forward(net, data.features, mode="eval")
    times, increments = breslow_baseline(data.time, data.event, out[:, 0])
    model = DeepSurvModel(
        net, times, increments, FeatureStats.from_data(data), cfg, cfg.seed
    )
    model.history = history
    return model
