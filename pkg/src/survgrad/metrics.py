"""Model performance metrics and explanation-quality metrics."""

from __future__ import annotations

import json
import time as time_mod
import warnings
from dataclasses import dataclass, field

import numpy as np

from .attribution import Attribution, time_averaged_importance
from .data import SurvivalDataset, TimeGrid
from .errors import MetricError
from .models.base import FittedModel, SurvivalCurveMatrix


def kaplan_meier(time: np.ndarray, event: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """KM estimate: distinct event times and the survival value at each."""
    time = np.asarray(time, dtype=np.float64)
    event = np.asarray(event)
    order = np.argsort(time, kind="stable")
    ts, es = time[order], event[order]
    ev_times, d = np.unique(ts[es == 1], return_counts=True)
    n_at_risk = ts.size - np.searchsorted(ts, ev_times, side="left")
    surv = np.cumprod(1.0 - d / n_at_risk)
    return ev_times, surv


def nelson_aalen(time: np.ndarray, event: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Nelson-Aalen hazard increments d_i / n_at_risk at distinct event times."""
    time = np.asarray(time, dtype=np.float64)
    event = np.asarray(event)
    order = np.argsort(time, kind="stable")
    ts, es = time[order], event[order]
    ev_times, d = np.unique(ts[es == 1], return_counts=True)
    n_at_risk = ts.size - np.searchsorted(ts, ev_times, side="left")
    return ev_times, d / n_at_risk


def step_eval(
    times: np.ndarray, values: np.ndarray, at: np.ndarray, fill: float = 1.0, strict: bool = False
) -> np.ndarray:
    """Evaluate a right-continuous step function; ``strict`` gives the left limit."""
    side = "left" if strict else "right"
    idx = np.searchsorted(times, np.asarray(at, dtype=np.float64), side=side)
    padded = np.concatenate([[fill], values])
    return padded[idx]


def concordance_index(times, events, risk_scores) -> float:
    """Harrell's C: pair (i, j) is admissible when t_i < t_j and i had the event;
    concordant when risk_i > risk_j, ties in risk count one half."""
    t = np.asarray(times, dtype=np.float64)
    e = np.asarray(events)
    r = np.asarray(risk_scores, dtype=np.float64)
    admissible = (t[:, None] < t[None, :]) & (e[:, None] == 1)
    n_pairs = int(admissible.sum())
    if n_pairs == 0:
        raise MetricError("no comparable pairs: C-index undefined")
    concordant = (r[:, None] > r[None, :]) & admissible
    tied = (r[:, None] == r[None, :]) & admissible
    return float((concordant.sum() + 0.5 * tied.sum()) / n_pairs)


def censoring_km(train_data: SurvivalDataset) -> tuple[np.ndarray, np.ndarray]:
    """KM of the censoring distribution (events and censorings swap roles)."""
    return kaplan_meier(train_data.time, 1 - train_data.event)


def brier_score(
    curves,
    data: SurvivalDataset,
    grid: TimeGrid,
    censor_km: tuple[np.ndarray, np.ndarray],
) -> tuple[TimeGrid, np.ndarray]:
    """IPCW Brier curve (Graf weights); censoring weights come from training data.

    Rows with an event by t are weighted by 1/G(y-), rows still at risk by
    1/G(t); other rows (censored by t) get weight zero. Grid points where the
    censoring survival G is zero are dropped with a warning.
    """
    values = curves.values if isinstance(curves, SurvivalCurveMatrix) else np.asarray(curves)
    if values.shape != (data.n, len(grid)):
        raise MetricError(f"curves {values.shape} do not match (n={data.n}, T={len(grid)})")
    g_times, g_values = censor_km
    g_at_grid = step_eval(g_times, g_values, grid.points)
    keep = g_at_grid > 0.0
    if not keep.all():
        warnings.warn("censoring survival hits 0: truncating the Brier grid")
    pts = grid.points[keep]
    g_at_grid = g_at_grid[keep]
    g_before_y = step_eval(g_times, g_values, data.time, strict=True)

    out = np.empty(pts.size)
    for k, t in enumerate(pts):
        event_by_t = (data.time <= t) & (data.event == 1)
        at_risk = data.time > t
        s = values[:, keep][:, k]
        terms = np.zeros(data.n)
        ok = event_by_t & (g_before_y > 0)
        terms[ok] = (0.0 - s[ok]) ** 2 / g_before_y[ok]
        terms[at_risk] = (1.0 - s[at_risk]) ** 2 / g_at_grid[k]
        out[k] = terms.mean()
    return TimeGrid(pts), out


def integrated_brier_score(grid: TimeGrid, values: np.ndarray) -> float:
    """Trapezoidal integral of the curve divided by the grid span."""
    if len(grid) < 2:
        raise MetricError("integrated score needs at least two grid points")
    span = grid.points[-1] - grid.points[0]
    return float(np.trapezoid(values, grid.points) / span)


def local_accuracy_t(
    attrs: Attribution | list[Attribution],
    model: FittedModel,
    background: np.ndarray,
) -> tuple[TimeGrid, np.ndarray]:
    """Normalized decomposition error across instances, per time point.

    sqrt( mean_x[(f - E_ref - sum_j R_j)^2] / mean_x[f] ) where E_ref is the
    mean predicted curve over the background rows. Grid points where the mean
    prediction is zero are dropped with a warning.
    """
    if isinstance(attrs, Attribution):
        attr_list = [attrs]
    else:
        attr_list = list(attrs)
    grid = attr_list[0].grid
    pred = np.concatenate([a.pred for a in attr_list], axis=0)
    totals = np.concatenate([a.values.sum(axis=1) for a in attr_list], axis=0)  # (n, T)
    e_ref = model.survival_curves(np.atleast_2d(background), grid).mean(axis=0)

    num = ((pred - e_ref[None, :] - totals) ** 2).mean(axis=0)
    den = pred.mean(axis=0)
    keep = den > 0.0
    if not keep.all():
        warnings.warn("mean prediction is 0 at some grid points: truncating")
    return TimeGrid(grid.points[keep]), np.sqrt(num[keep] / den[keep])


@dataclass
class RankingTable:
    """Per-instance feature ranks (1 = most important) and their aggregation."""

    ranks: np.ndarray  # (n, p), each row a permutation of 1..p
    counts: np.ndarray  # (p, p): counts[j, r-1] = #instances with feature j at rank r
    feature_names: list[str]

    def mean_rank(self) -> np.ndarray:
        return self.ranks.mean(axis=0)

    def modal_rank(self) -> np.ndarray:
        return self.counts.argmax(axis=1) + 1

    def to_json_dict(self) -> dict:
        return {
            "feature_names": list(self.feature_names),
            "counts": self.counts.tolist(),
            "mean_rank": self.mean_rank().tolist(),
            "modal_rank": self.modal_rank().tolist(),
        }


def global_ranking(attr: Attribution, importance_fn=time_averaged_importance) -> RankingTable:
    """Rank features per instance by descending importance (ties: lower index wins)."""
    imp = importance_fn(attr)
    n, p = imp.shape
    order = np.lexsort((np.tile(np.arange(p), (n, 1)), -imp), axis=1)
    ranks = np.empty((n, p), dtype=np.int64)
    rows = np.arange(n)[:, None]
    ranks[rows, order] = np.arange(1, p + 1)[None, :]
    counts = np.zeros((p, p), dtype=np.int64)
    for j in range(p):
        got, c = np.unique(ranks[:, j], return_counts=True)
        counts[j, got - 1] = c
    return RankingTable(ranks, counts, list(attr.feature_names))


def measure_runtime(task, repetitions: int = 20, threads: int | None = None) -> float:
    """Median wall-clock seconds of ``task()`` over ``repetitions`` runs.

    When ``threads`` is given the BLAS pools are pinned for the measurement
    (via threadpoolctl when available, otherwise a warning is emitted).
    """
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")

    def run() -> list[float]:
        out = []
        for _ in range(repetitions):
            t0 = time_mod.perf_counter()
            task()
            out.append(time_mod.perf_counter() - t0)
        return out

    if threads is not None:
        try:
            from threadpoolctl import threadpool_limits
        except ImportError:
            warnings.warn("threadpoolctl unavailable: thread pinning skipped")
            return float(np.median(run()))
        with threadpool_limits(limits=threads):
            return float(np.median(run()))
    return float(np.median(run()))


@dataclass
class MetricReport:
    c_index: float
    brier_grid: np.ndarray
    brier_values: np.ndarray
    ibs: float
    local_accuracy: tuple[np.ndarray, np.ndarray] | None = None
    metadata: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        doc = {
            "c_index": self.c_index,
            "brier": {"grid": self.brier_grid.tolist(), "values": self.brier_values.tolist()},
            "ibs": self.ibs,
            "metadata": self.metadata,
        }
        if self.local_accuracy is not None:
            grid, vals = self.local_accuracy
            doc["local_accuracy"] = {"grid": np.asarray(grid).tolist(), "values": np.asarray(vals).tolist()}
        return doc

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json_dict(), fh, sort_keys=True, indent=2)
            fh.write("\n")


def evaluate_model(
    model: FittedModel,
    train_data: SurvivalDataset,
    test_data: SurvivalDataset,
    grid: TimeGrid,
    metadata: dict | None = None,
) -> MetricReport:
    """C-index, Brier curve and IBS of a fitted model on held-out data."""
    curves = SurvivalCurveMatrix(grid, model.survival_curves(test_data.features, grid))
    risk = model.risk_score(test_data.features)
    c_idx = concordance_index(test_data.time, test_data.event, risk)
    bs_grid, bs_values = brier_score(curves, test_data, grid, censoring_km(train_data))
    ibs = integrated_brier_score(bs_grid, bs_values)
    return MetricReport(c_idx, bs_grid.points, bs_values, ibs, metadata=metadata or {})
