"""Discrete-time PMF net trained with likelihood + pairwise rank loss."""

from __future__ import annotations

import numpy as np

from ..autodiff import DenseNet, backward_inputs, backward_params, forward, init_dense_net
from ..data import SurvivalDataset, TimeGrid
from ..errors import TrainingError
from .base import FeatureStats, FittedModel
from .training import TrainConfig, TrainHistory, run_epochs, split_train_val

_LOG_FLOOR = 1e-12


def softmax_rows(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def bin_index(times: np.ndarray, edges: np.ndarray) -> np.ndarray:
    """1-based bin of each time: bin k covers (edges[k-1], edges[k]]."""
    idx = np.searchsorted(edges, times, side="left")
    return np.clip(idx, 1, edges.size - 1)


class DeepHitModel(FittedModel):
    """K-bin softmax PMF; survival is a right-continuous step function."""

    variant = "deephit"

    def __init__(
        self,
        net: DenseNet,
        bin_edges: np.ndarray,
        feature_stats: FeatureStats,
        config: TrainConfig,
        seed: int,
    ):
        self.net = net
        self.bin_edges = np.asarray(bin_edges, dtype=np.float64)  # (K+1,), edges[0] = 0
        self.feature_stats = feature_stats
        self.config = config
        self.seed = seed
        self.history: TrainHistory | None = None

    @property
    def p(self) -> int:
        return self.net.input_width

    @property
    def n_bins(self) -> int:
        return self.bin_edges.size - 1

    def pmf(self, X: np.ndarray) -> np.ndarray:
        X = self._check_features(X)
        out, _ = forward(self.net, X, mode="eval")
        return softmax_rows(out)

    def _grid_index(self, grid: TimeGrid) -> np.ndarray:
        # number of right bin edges at or below each grid point
        return np.searchsorted(self.bin_edges[1:], grid.points, side="right")

    def survival_curves(self, X: np.ndarray, grid: TimeGrid) -> np.ndarray:
        cdf = np.cumsum(self.pmf(X), axis=1)
        padded = np.concatenate([np.zeros((cdf.shape[0], 1)), cdf], axis=1)
        return 1.0 - padded[:, self._grid_index(grid)]

    def gradient_curves(self, X: np.ndarray, grid: TimeGrid) -> np.ndarray:
        X = self._check_features(X)
        n, K = X.shape[0], self.n_bins
        idx = self._grid_index(grid)
        need = np.unique(idx[idx > 0])  # cumulative indices the grid actually uses
        out = np.zeros((n, self.p, len(grid)))
        if need.size == 0:
            return out
        # one batched backward: each instance row replicated once per needed index
        rep = np.repeat(X, need.size, axis=0)
        logits, tape = forward(self.net, rep, mode="eval")
        pmf = softmax_rows(logits)
        cdf = np.cumsum(pmf, axis=1)
        k_per_row = np.tile(need, n)
        # d(cdf_k)/dz_m = p_m (1[m <= k] - cdf_k)
        mask = (np.arange(1, K + 1)[None, :] <= k_per_row[:, None]).astype(np.float64)
        cdf_at_k = cdf[np.arange(rep.shape[0]), k_per_row - 1]
        upstream = pmf * (mask - cdf_at_k[:, None])
        din = backward_inputs(tape, upstream).reshape(n, need.size, self.p)
        pos = np.searchsorted(need, idx)
        for t_slot, k in enumerate(idx):
            if k > 0:
                out[:, :, t_slot] = -din[:, pos[t_slot], :]
        return out

    def risk_score(self, X: np.ndarray) -> np.ndarray:
        # negated restricted mean survival time over the bin edges
        cdf = np.cumsum(self.pmf(X), axis=1)
        surv = 1.0 - cdf
        widths = np.diff(self.bin_edges)
        return -(surv * widths[None, :]).sum(axis=1)

    def to_json_dict(self) -> dict:
        return {
            "variant": self.variant,
            "net": self.net.to_json_dict(),
            "bin_edges": self.bin_edges.tolist(),
            "feature_stats": self.feature_stats.to_json_dict(),
            "config": self.config.to_json_dict(),
            "seed": self.seed,
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "DeepHitModel":
        return cls(
            DenseNet.from_json_dict(doc["net"]),
            np.asarray(doc["bin_edges"]),
            FeatureStats.from_json_dict(doc["feature_stats"]),
            TrainConfig.from_json_dict(doc["config"]),
            doc["seed"],
        )


def deephit_loss_and_upstream(
    logits: np.ndarray,
    bins: np.ndarray,
    event: np.ndarray,
    alpha: float,
    sigma: float,
    times: np.ndarray,
) -> tuple[float, np.ndarray]:
    """alpha * rank loss + (1 - alpha) * NLL, plus the gradient in the logits.

    Events in bin k contribute -log p_k; censored rows contribute
    -log sum_{j >= k} p_j (their event lies in bin k or later, so the last bin
    absorbs administrative censoring at the horizon). The rank loss averages
    exp((F_j(k_i) - F_i(k_i)) / sigma) over pairs with delta_i = 1, t_i < t_j,
    where F is the CDF evaluated at i's event bin.
    """
    B, K = logits.shape
    pmf = softmax_rows(logits)
    cdf = np.cumsum(pmf, axis=1)
    rows = np.arange(B)
    kidx = np.asarray(bins) - 1  # 0-based
    ev = np.asarray(event) == 1

    # --- likelihood and its pmf-gradient ---
    p_event = np.maximum(pmf[rows, kidx], _LOG_FLOOR)
    prev_cdf = np.where(kidx > 0, cdf[rows, np.maximum(kidx - 1, 0)], 0.0)
    tail = np.maximum(1.0 - prev_cdf, _LOG_FLOOR)
    nll = float(np.where(ev, -np.log(p_event), -np.log(tail)).mean())

    d_pmf_nll = np.zeros_like(pmf)
    d_pmf_nll[rows[ev], kidx[ev]] = -1.0 / (p_event[ev] * B)
    if (~ev).any():
        # d(-log tail)/dp_j = -1/tail for every j >= k: seed column k, forward-cumsum
        seed_cols = np.zeros_like(pmf)
        seed_cols[rows[~ev], kidx[~ev]] = -1.0 / (tail[~ev] * B)
        d_pmf_nll += np.cumsum(seed_cols, axis=1)

    # --- rank loss and its cdf-gradient ---
    rank = 0.0
    d_cdf = np.zeros_like(cdf)
    if alpha > 0.0:
        comparable = ev[:, None] & (times[:, None] < times[None, :])
        n_pairs = int(comparable.sum())
        if n_pairs > 0:
            f_i = cdf[rows, kidx]
            f_j_at_ki = cdf[:, kidx].T  # [i, j] = F_j(k_i); bounded exponent, sigma > 0
            eta = np.where(comparable, np.exp((f_j_at_ki - f_i[:, None]) / sigma), 0.0)
            rank = float(eta.sum() / n_pairs)
            scale = 1.0 / (sigma * n_pairs)
            d_cdf[rows, kidx] -= eta.sum(axis=1) * scale
            for k in np.unique(kidx):
                d_cdf[:, k] += eta[kidx == k].sum(axis=0) * scale

    # dF_k/dp_m = 1[m <= k] -> reverse cumsum folds cdf grads into pmf grads
    d_pmf = (1.0 - alpha) * d_pmf_nll + alpha * np.cumsum(d_cdf[:, ::-1], axis=1)[:, ::-1]
    upstream = pmf * (d_pmf - (d_pmf * pmf).sum(axis=1, keepdims=True))
    return alpha * rank + (1.0 - alpha) * nll, upstream


def fit_deephit(data: SurvivalDataset, cfg: TrainConfig) -> DeepHitModel:
    """Train the PMF net; bins are equidistant on [0, max observed time]."""
    if data.n_events < 2:
        raise TrainingError(f"need at least 2 events to fit, got {data.n_events}")
    if cfg.deephit_bins < 2:
        raise TrainingError("DeepHit needs at least 2 bins")
    seq = np.random.SeedSequence(cfg.seed)
    rng_split, rng_init, rng_shuffle, rng_drop = (
        np.random.default_rng(s) for s in seq.spawn(4)
    )
    train, val = split_train_val(data, cfg.validation_fraction, rng_split)
    if train.n_events == 0 or val.n_events == 0:
        raise TrainingError("train/validation split left a part without events")

    K = cfg.deephit_bins
    edges = np.linspace(0.0, float(data.time.max()), K + 1)
    train_bins = bin_index(train.time, edges)
    val_bins = bin_index(val.time, edges)
    net = init_dense_net(
        [data.p, *cfg.hidden, K], cfg.activation, cfg.dropout, rng_init
    )

    def batch_step(net, idx):
        out, tape = forward(net, train.features[idx], mode="train", rng=rng_drop)
        loss, up = deephit_loss_and_upstream(
            out, train_bins[idx], train.event[idx], cfg.deephit_alpha, cfg.deephit_sigma,
            train.time[idx],
        )
        return loss, backward_params(tape, up)

    val_blocks = [
        np.arange(lo, min(lo + cfg.batch_size, val.n))
        for lo in range(0, val.n, cfg.batch_size)
    ]

    def val_loss(net):
        total = 0.0
        for idx in val_blocks:
            out, _ = forward(net, val.features[idx], mode="eval")
            loss, _ = deephit_loss_and_upstream(
                out, val_bins[idx], val.event[idx], cfg.deephit_alpha, cfg.deephit_sigma,
                val.time[idx],
            )
            total += loss * idx.size
        return total / val.n

    history = run_epochs(net, train.n, cfg, batch_step, val_loss, rng_shuffle)
    model = DeepHitModel(net, edges, FeatureStats.from_data(data), cfg, cfg.seed)
    model.history = history
    return model
