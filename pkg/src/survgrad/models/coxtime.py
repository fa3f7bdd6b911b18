"""Relative-risk net with time as an extra input (non-proportional hazards)."""

from __future__ import annotations

import numpy as np

from ..autodiff import DenseNet, backward_inputs, backward_params, forward, init_dense_net
from ..data import SurvivalDataset, TimeGrid, evaluation_grid
from ..errors import TrainingError
from .base import FeatureStats, FittedModel
from .breslow import breslow_baseline
from .training import TrainConfig, TrainHistory, run_epochs, split_train_val

# baseline knots are capped so prediction/gradient cost stays O(128) per row
MAX_KNOTS = 128
# pair-matrix rows per forward/backward pass; small enough to stay cache-friendly
_PAIR_CHUNK = 8192


class CoxTimeModel(FittedModel):
    """g(t, x) net; S(t|x) = exp(-sum_{knots <= t} dh0_k * exp(g(knot_k, x)))."""

    variant = "coxtime"

    def __init__(
        self,
        net: DenseNet,
        knot_times: np.ndarray,
        knot_increments: np.ndarray,
        time_mean: float,
        time_sd: float,
        time_median: float,
        feature_stats: FeatureStats,
        config: TrainConfig,
        seed: int,
    ):
        self.net = net
        self.knot_times = np.asarray(knot_times, dtype=np.float64)
        self.knot_increments = np.asarray(knot_increments, dtype=np.float64)
        self.time_mean = float(time_mean)
        self.time_sd = float(time_sd)
        self.time_median = float(time_median)
        self.feature_stats = feature_stats
        self.config = config
        self.seed = seed
        self.history: TrainHistory | None = None

    @property
    def p(self) -> int:
        return self.net.input_width - 1

    def _std_time(self, t):
        return (np.asarray(t, dtype=np.float64) - self.time_mean) / self.time_sd

    def _knot_inputs(self, X: np.ndarray) -> np.ndarray:
        # instance-major layout: row (i * K + k) is (x_i, std knot_k)
        n, K = X.shape[0], self.knot_times.size
        inp = np.empty((n * K, self.p + 1))
        inp[:, : self.p] = np.repeat(X, K, axis=0)
        inp[:, self.p] = np.tile(self._std_time(self.knot_times), n)
        return inp

    def _grid_index(self, grid: TimeGrid) -> np.ndarray:
        return np.searchsorted(self.knot_times, grid.points, side="right")

    def risk_score(self, X: np.ndarray) -> np.ndarray:
        X = self._check_features(X)
        inp = np.column_stack([X, np.full(X.shape[0], self._std_time(self.time_median))])
        out, _ = forward(self.net, inp, mode="eval")
        return out[:, 0]

    def survival_curves(self, X: np.ndarray, grid: TimeGrid) -> np.ndarray:
        X = self._check_features(X)
        n, K = X.shape[0], self.knot_times.size
        idx = self._grid_index(grid)
        out = np.empty((n, len(grid)))
        step = max(1, _PAIR_CHUNK // K)
        for lo in range(0, n, step):
            chunk = X[lo : lo + step]
            g, _ = forward(self.net, self._knot_inputs(chunk), mode="eval")
            hazard = self.knot_increments[None, :] * np.exp(g[:, 0].reshape(-1, K))
            cum = np.concatenate([np.zeros((chunk.shape[0], 1)), np.cumsum(hazard, axis=1)], axis=1)
            out[lo : lo + step] = np.exp(-cum[:, idx])
        return out

    def gradient_curves(self, X: np.ndarray, grid: TimeGrid) -> np.ndarray:
        X = self._check_features(X)
        n, K, p = X.shape[0], self.knot_times.size, self.p
        idx = self._grid_index(grid)
        out = np.empty((n, p, len(grid)))
        step = max(1, _PAIR_CHUNK // K)
        for lo in range(0, n, step):
            chunk = X[lo : lo + step]
            m = chunk.shape[0]
            g, tape = forward(self.net, self._knot_inputs(chunk), mode="eval")
            hazard = self.knot_increments[None, :] * np.exp(g[:, 0].reshape(m, K))
            # dH(t)/dx = sum_{knots <= t} dh0_k exp(g_k) dg_k/dx
            din = backward_inputs(tape, hazard.reshape(-1, 1))
            v = din[:, :p].reshape(m, K, p)
            vcum = np.concatenate([np.zeros((m, 1, p)), np.cumsum(v, axis=1)], axis=1)
            hcum = np.concatenate([np.zeros((m, 1)), np.cumsum(hazard, axis=1)], axis=1)
            surv = np.exp(-hcum[:, idx])  # (m, T)
            out[lo : lo + step] = -surv[:, None, :] * vcum[:, idx, :].transpose(0, 2, 1)
        return out

    def to_json_dict(self) -> dict:
        return {
            "variant": self.variant,
            "net": self.net.to_json_dict(),
            "knot_times": self.knot_times.tolist(),
            "knot_increments": self.knot_increments.tolist(),
            "time_mean": self.time_mean,
            "time_sd": self.time_sd,
            "time_median": self.time_median,
            "feature_stats": self.feature_stats.to_json_dict(),
            "config": self.config.to_json_dict(),
            "seed": self.seed,
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "CoxTimeModel":
        return cls(
            DenseNet.from_json_dict(doc["net"]),
            np.asarray(doc["knot_times"]),
            np.asarray(doc["knot_increments"]),
            doc["time_mean"],
            doc["time_sd"],
            doc["time_median"],
            FeatureStats.from_json_dict(doc["feature_stats"]),
            TrainConfig.from_json_dict(doc["config"]),
            doc["seed"],
        )


def _relative_risk_loss(
    net: DenseNet,
    X: np.ndarray,
    t_std: np.ndarray,
    event: np.ndarray,
    mode: str,
    rng: np.random.Generator | None,
    want_grads: bool,
):
    """Partial likelihood with g evaluated at each event time over its risk set.

    Rows must already be sorted by time ascending (``t_std`` monotone).
    Returns (sum of per-event losses, event count, accumulated param grads).
    """
    n, p = X.shape
    ev = np.nonzero(event == 1)[0]
    if ev.size == 0:
        return 0.0, 0, None
    first = np.searchsorted(t_std, t_std, side="left")
    d_total = ev.size

    loss_sum = 0.0
    grads_acc = None
    start = 0
    while start < d_total:
        # group events until the pair-row budget is reached
        stop, rows = start, 0
        while stop < d_total and (rows == 0 or rows + n - first[ev[stop]] <= _PAIR_CHUNK):
            rows += n - first[ev[stop]]
            stop += 1
        sizes = n - first[ev[start:stop]]
        starts = np.concatenate([[0], np.cumsum(sizes)[:-1]])
        inp = np.empty((rows, p + 1))
        self_rows = np.empty(stop - start, dtype=np.int64)
        for m, ei in enumerate(ev[start:stop]):
            sl = slice(starts[m], starts[m] + sizes[m])
            inp[sl, :p] = X[first[ei] :]
            inp[sl, p] = t_std[ei]
            self_rows[m] = starts[m] + (ei - first[ei])
        g, tape = forward(net, inp, mode=mode, rng=rng)
        g = g[:, 0]
        smax = np.maximum.reduceat(g, starts)
        exps = np.exp(g - np.repeat(smax, sizes))
        sums = np.add.reduceat(exps, starts)
        loss_sum += float(np.sum(-(g[self_rows] - smax - np.log(sums))))
        if want_grads:
            upstream = exps / np.repeat(sums, sizes)
            upstream[self_rows] -= 1.0
            chunk_grads = backward_params(tape, upstream[:, None])
            if grads_acc is None:
                grads_acc = chunk_grads
            else:
                for (aw, ab), (gw, gb) in zip(grads_acc, chunk_grads):
                    aw += gw
                    ab += gb
        start = stop
    return loss_sum, d_total, grads_acc


def fit_coxtime(data: SurvivalDataset, cfg: TrainConfig) -> CoxTimeModel:
    """Train g(t, x) on the relative-risk partial likelihood (full risk sets)."""
    if data.n_events < 2:
        raise TrainingError(f"need at least 2 events to fit, got {data.n_events}")
    seq = np.random.SeedSequence(cfg.seed)
    rng_split, rng_init, rng_shuffle, rng_drop = (
        np.random.default_rng(s) for s in seq.spawn(4)
    )
    train, val = split_train_val(data, cfg.validation_fraction, rng_split)
    if train.n_events == 0 or val.n_events == 0:
        raise TrainingError("train/validation split left a part without events")

    t_mean = float(data.time.mean())
    t_sd = float(data.time.std())
    if t_sd == 0:
        raise TrainingError("all observed times identical; cannot standardize")
    net = init_dense_net(
        [data.p + 1, *cfg.hidden, 1], cfg.activation, cfg.dropout, rng_init
    )

    def sorted_block(ds, idx):
        order = np.argsort(ds.time[idx], kind="stable")
        sel = idx[order]
        return ds.features[sel], (ds.time[sel] - t_mean) / t_sd, ds.event[sel]

    def batch_step(net, idx):
        X, t_std, e = sorted_block(train, idx)
        loss, d, grads = _relative_risk_loss(net, X, t_std, e, "train", rng_drop, True)
        if d == 0:
            return None
        for gw, gb in grads:
            gw /= d
            gb /= d
        return loss / d, grads

    val_blocks = [
        np.arange(lo, min(lo + cfg.batch_size, val.n))
        for lo in range(0, val.n, cfg.batch_size)
    ]

    def val_loss(net):
        total, events = 0.0, 0
        for idx in val_blocks:
            X, t_std, e = sorted_block(val, idx)
            loss, d, _ = _relative_risk_loss(net, X, t_std, e, "eval", None, False)
            total += loss
            events += d
        return total / max(events, 1)

    history = run_epochs(net, train.n, cfg, batch_step, val_loss, rng_shuffle)

    knots = evaluation_grid(data, MAX_KNOTS).points

    def log_risk_at(tau):
        inp = np.column_stack([data.features, np.full(data.n, (tau - t_mean) / t_sd)])
        out, _ = forward(net, inp, mode="eval")
        return out[:, 0]

    times, increments = breslow_baseline(data.time, data.event, log_risk_at, knots=knots)
    model = CoxTimeModel(
        net,
        times,
        increments,
        t_mean,
        t_sd,
        float(np.median(data.time)),
        FeatureStats.from_data(data),
        cfg,
        cfg.seed,
    )
    model.history = history
    return model
