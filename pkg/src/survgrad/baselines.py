"""Model-agnostic comparison methods: sampled Shapley values per time point,
an exact enumeration oracle, and a local Cox surrogate.

These follow the published model-agnostic approaches at the level needed for
speed/accuracy comparisons against the gradient-based methods; they are not
line-for-line ports of the reference implementations.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from itertools import combinations, permutations as iter_permutations
from math import factorial

import numpy as np

from .attribution import Attribution
from .data import SurvivalDataset, TimeGrid, evaluation_grid
from .errors import ConfigError, ShapeError
from .metrics import nelson_aalen
from .models.base import FittedModel


@dataclass
class ShapleyConfig:
    permutations: int = 25
    background: np.ndarray = None
    seed: int = 0

    def __post_init__(self):
        if self.permutations < 1:
            raise ConfigError("need at least one permutation")
        if self.background is None or np.asarray(self.background).size == 0:
            raise ConfigError("background must be nonempty")
        self.background = np.atleast_2d(np.asarray(self.background, dtype=np.float64))


@dataclass
class SurvLimeConfig:
    neighborhood_size: int = 1000
    kernel_width: float = 1.0
    perturbation_scale: float = 0.5  # times the per-feature training sd
    seed: int = 0

    def __post_init__(self):
        if min(self.neighborhood_size, self.kernel_width, self.perturbation_scale) <= 0:
            raise ConfigError("all SurvLIME parameters must be positive")


def _coalition_curves(model, x, background, mask_cols, grid) -> np.ndarray:
    """Mean curve over background rows with columns ``mask_cols`` set to x."""
    Z = background.copy()
    if len(mask_cols):
        Z[:, mask_cols] = x[mask_cols]
    return model.survival_curves(Z, grid).mean(axis=0)


def survshap_t(
    model: FittedModel,
    X: np.ndarray,
    grid: TimeGrid,
    cfg: ShapleyConfig,
    feature_names: list[str] | None = None,
) -> Attribution:
    """Shapley values per time point by feature-permutation sampling.

    Coalition value = mean predicted curve over background rows with the
    coalition's columns replaced by the explained row (marginal convention).
    When ``cfg.permutations`` covers all p! orderings (and p <= 8) every
    permutation is used exactly once, which makes the estimate exact.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    n, p = X.shape
    bg = cfg.background
    if bg.shape[1] != p:
        raise ShapeError("background feature count does not match X")
    rng = np.random.default_rng(cfg.seed)

    exact = p <= 8 and cfg.permutations >= factorial(p)
    if exact:
        perms = [np.array(perm) for perm in iter_permutations(range(p))]
    n_bg = bg.shape[0]
    base_curve = model.survival_curves(bg, grid).mean(axis=0)

    values = np.empty((n, p, len(grid)))
    for i in range(n):
        x = X[i]
        if not exact:
            perms = [rng.permutation(p) for _ in range(cfg.permutations)]
        acc = np.zeros((p, len(grid)))
        for perm in perms:
            # all p cumulative hybrids of this ordering in one batched call
            stack = np.empty((p * n_bg, p))
            Z = bg.copy()
            for step, j in enumerate(perm):
                Z[:, j] = x[j]
                stack[step * n_bg : (step + 1) * n_bg] = Z
            curves = model.survival_curves(stack, grid).reshape(p, n_bg, len(grid)).mean(axis=1)
            prev = base_curve
            for step, j in enumerate(perm):
                acc[j] += curves[step] - prev
                prev = curves[step]
        values[i] = acc / len(perms)

    pred = model.survival_curves(X, grid)
    return Attribution(
        values,
        grid,
        "survshap",
        {"permutations": len(perms), "seed": cfg.seed, "exact": exact},
        pred=pred,
        pred_ref=np.repeat(base_curve[None, :], n, axis=0),
        reference_spec={"kind": "background", "rows": n_bg, "seed": cfg.seed},
        feature_names=feature_names or [],
    )


def brute_force_shapley(
    model: FittedModel,
    X: np.ndarray,
    grid: TimeGrid,
    background: np.ndarray,
    feature_names: list[str] | None = None,
) -> Attribution:
    """Exact Shapley values by enumerating all 2^p coalitions (p <= 12)."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    n, p = X.shape
    if p > 12:
        raise ConfigError(f"brute force enumerates 2^p coalitions; p={p} is too large")
    background = np.atleast_2d(np.asarray(background, dtype=np.float64))
    if background.shape[1] != p:
        raise ShapeError("background feature count does not match X")

    weights = [factorial(s) * factorial(p - s - 1) / factorial(p) for s in range(p)]
    values = np.empty((n, p, len(grid)))
    for i in range(n):
        x = X[i]
        v = {}
        for r in range(p + 1):
            for C in combinations(range(p), r):
                v[C] = _coalition_curves(model, x, background, list(C), grid)
        phi = np.zeros((p, len(grid)))
        for j in range(p):
            others = [k for k in range(p) if k != j]
            for r in range(p):
                for C in combinations(others, r):
                    with_j = tuple(sorted(C + (j,)))
                    phi[j] += weights[len(C)] * (v[with_j] - v[C])
        values[i] = phi

    base_curve = model.survival_curves(background, grid).mean(axis=0)
    return Attribution(
        values,
        grid,
        "shapley_exact",
        {"coalitions": 2**p},
        pred=model.survival_curves(X, grid),
        pred_ref=np.repeat(base_curve[None, :], n, axis=0),
        reference_spec={"kind": "background", "rows": background.shape[0]},
        feature_names=feature_names or [],
    )


def survlime(
    model: FittedModel,
    x: np.ndarray,
    cfg: SurvLimeConfig,
    train_data: SurvivalDataset,
    grid: TimeGrid | None = None,
    neighbors: np.ndarray | None = None,
) -> np.ndarray:
    """Local Cox-surrogate coefficients around ``x``.

    Draws a Gaussian neighborhood (per-feature sd = perturbation_scale times
    the training sd; pass ``neighbors`` to pin it), computes black-box log
    cumulative hazards on the grid, and fits kernel-weighted least squares of
    log H(t|z) on z against the training Nelson-Aalen baseline. A per-time
    intercept absorbs the offset between the black box's baseline and the
    Nelson-Aalen estimate (the original formulation pins the baseline instead,
    which biases the weights whenever the two baselines disagree).
    """
    x = np.asarray(x, dtype=np.float64)
    p = x.size
    if grid is None:
        grid = evaluation_grid(train_data, 32)
    sd = train_data.features.std(axis=0)
    sd = np.where(sd == 0, 1.0, sd)

    if neighbors is None:
        rng = np.random.default_rng(cfg.seed)
        Z = x[None, :] + rng.standard_normal((cfg.neighborhood_size, p)) * (
            cfg.perturbation_scale * sd
        )
        Z[0] = x  # keep the instance itself in the neighborhood
    else:
        Z = np.atleast_2d(np.asarray(neighbors, dtype=np.float64))
    dist = np.sqrt((((Z - x) / sd) ** 2).sum(axis=1))
    w = np.exp(-(dist**2) / (2.0 * cfg.kernel_width**2))

    surv = model.survival_curves(Z, grid)
    # S floored only to dodge log(0); H floored at 1e-12 against -inf early on
    log_h = np.log(np.maximum(-np.log(np.maximum(surv, 1e-300)), 1e-12))
    na_times, na_values = nelson_aalen(train_data.time, train_data.event)
    cum = np.concatenate([[0.0], np.cumsum(na_values)])
    h0 = cum[np.searchsorted(na_times, grid.points, side="right")]
    y = log_h - np.log(np.maximum(h0, 1e-12))[None, :]

    w_norm = w / w.sum()
    z_c = Z - (w_norm[:, None] * Z).sum(axis=0)
    y_c = y - (w_norm[:, None] * y).sum(axis=0)
    a_mat = z_c.T @ (w[:, None] * z_c)
    rhs = z_c.T @ (w * y_c.mean(axis=1))
    try:
        if np.linalg.cond(a_mat) > 1e10:
            raise np.linalg.LinAlgError("ill-conditioned")
        return np.linalg.solve(a_mat, rhs)
    except np.linalg.LinAlgError:
        warnings.warn("singular SurvLIME system: falling back to ridge (1e-6)")
        return np.linalg.solve(a_mat + 1e-6 * np.eye(p), rhs)
