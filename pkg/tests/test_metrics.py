"""Performance and explanation-quality metrics against hand-worked cases."""

import time

import numpy as np
import pytest

from survgrad.attribution import Attribution, intgrad_t
from survgrad.baselines import brute_force_shapley
from survgrad.data import SurvivalDataset, TimeGrid
from survgrad.errors import MetricError
from survgrad.metrics import (
    RankingTable,
    brier_score,
    censoring_km,
    concordance_index,
    global_ranking,
    integrated_brier_score,
    kaplan_meier,
    local_accuracy_t,
    measure_runtime,
    global_ranking as _global_ranking,
)


def test_cindex_perfect_ordering():
    t = np.array([1.0, 2.0, 3.0, 4.0])
    risk = np.array([4.0, 3.0, 2.0, 1.0])  # exactly opposite to survival time
    assert concordance_index(t, np.ones(4, dtype=int), risk) == 1.0


def test_cindex_all_ties_is_half():
    t = np.array([1.0, 2.0, 3.0])
    assert concordance_index(t, np.ones(3, dtype=int), np.zeros(3)) == 0.5


def test_cindex_hand_worked_with_censoring():
    # admissible pairs: i must be an event with t_i < t_j.
    # times (1, 2, 3, 4), events (1, 0, 1, 1):
    #   i=0 vs j in {1,2,3}; i=2 vs j=3. four pairs total.
    t = np.array([1.0, 2.0, 3.0, 4.0])
    e = np.array([1, 0, 1, 1])
    # risks (3, 1, 0, 2): (0,1) ok, (0,2) ok, (0,3) ok, (2,3) discordant -> 3/4
    assert concordance_index(t, e, np.array([3.0, 1.0, 0.0, 2.0])) == 0.75
    # risks (3, 1, 2, 2): last pair is a risk tie -> (3 + 0.5)/4
    assert concordance_index(t, e, np.array([3.0, 1.0, 2.0, 2.0])) == 0.875


def test_cindex_monotone_transform_invariant():
    rng = np.random.default_rng(0)
    t = rng.uniform(0, 5, 60)
    e = (rng.random(60) < 0.7).astype(int)
    r = rng.standard_normal(60)
    assert concordance_index(t, e, r) == concordance_index(t, e, np.exp(r))


def test_cindex_undefined_without_pairs():
    with pytest.raises(MetricError):
        concordance_index(np.array([1.0, 2.0]), np.array([0, 0]), np.array([1.0, 2.0]))


def test_kaplan_meier_simple():
    times, surv = kaplan_meier(np.array([1.0, 2.0, 3.0]), np.array([1, 1, 1]))
    assert np.allclose(surv, [2 / 3, 1 / 3, 0.0])


def _uncensored_train(n=50):
    rng = np.random.default_rng(1)
    return SurvivalDataset(np.zeros((n, 1)), rng.uniform(0.5, 5.0, n), np.ones(n, dtype=int))


def test_brier_perfect_predictions_scores_zero():
    rng = np.random.default_rng(2)
    n = 40
    data = SurvivalDataset(np.zeros((n, 1)), rng.uniform(0.5, 5.0, n), np.ones(n, dtype=int))
    grid = TimeGrid(np.linspace(0.6, 4.9, 9))
    curves = (data.time[:, None] > grid.points[None, :]).astype(float)
    _, bs = brier_score(curves, data, grid, censoring_km(_uncensored_train()))
    assert np.allclose(bs, 0.0)


def test_brier_coin_flip_is_quarter():
    data = _uncensored_train(60)
    grid = TimeGrid(np.linspace(0.6, 4.9, 7))
    curves = np.full((60, 7), 0.5)
    _, bs = brier_score(curves, data, grid, censoring_km(_uncensored_train()))
    assert np.allclose(bs, 0.25)


def test_brier_row_permutation_invariant():
    rng = np.random.default_rng(3)
    n = 30
    data = SurvivalDataset(np.zeros((n, 1)), rng.uniform(0.5, 5.0, n),
                           (rng.random(n) < 0.8).astype(int))
    grid = TimeGrid(np.linspace(0.6, 4.5, 6))
    curves = rng.uniform(0.1, 0.9, (n, 6))
    curves.sort(axis=1)
    curves = curves[:, ::-1].copy()
    km = censoring_km(_uncensored_train())
    _, a = brier_score(curves, data, grid, km)
    perm = rng.permutation(n)
    permuted = SurvivalDataset(data.features[perm], data.time[perm], data.event[perm])
    _, b = brier_score(curves[perm], permuted, grid, km)
    assert np.allclose(a, b)


def test_ibs_constant_and_linear():
    grid = TimeGrid(np.array([0.0, 1.0, 2.0]))
    assert integrated_brier_score(grid, np.full(3, 0.07)) == pytest.approx(0.07)
    grid2 = TimeGrid(np.array([0.0, 2.0]))
    assert integrated_brier_score(grid2, np.array([0.0, 0.2])) == pytest.approx(0.1)
    with pytest.raises(MetricError):
        integrated_brier_score(TimeGrid(np.array([1.0])), np.array([0.1]))


def test_local_accuracy_of_exact_shapley_is_zero(oracle_mild):
    rng = np.random.default_rng(4)
    bg = rng.standard_normal((8, 3))
    X = rng.standard_normal((6, 3))
    grid = TimeGrid(np.array([0.5, 2.0, 4.0]))
    attr = brute_force_shapley(oracle_mild, X, grid, bg)
    _, curve = local_accuracy_t(attr, oracle_mild, bg)
    assert curve.max() <= 1e-9


def test_local_accuracy_zero_attributions_matches_direct_formula(oracle_mild):
    rng = np.random.default_rng(5)
    bg = rng.standard_normal((8, 3))
    X = rng.standard_normal((6, 3))
    grid = TimeGrid(np.array([0.5, 2.0, 4.0]))
    pred = oracle_mild.survival_curves(X, grid)
    attr = Attribution(np.zeros((6, 3, 3)), grid, "null", pred=pred)
    _, curve = local_accuracy_t(attr, oracle_mild, bg)
    e_ref = oracle_mild.survival_curves(bg, grid).mean(axis=0)
    direct = np.sqrt(((pred - e_ref[None, :]) ** 2).mean(axis=0) / pred.mean(axis=0))
    assert np.allclose(curve, direct)


def test_local_accuracy_improves_with_integration_steps(oracle_mild):
    rng = np.random.default_rng(6)
    bg = rng.standard_normal((1, 3))
    X = rng.standard_normal((10, 3))
    grid = TimeGrid(np.linspace(0.4, 6.0, 12))
    coarse = intgrad_t(oracle_mild, X, grid, baseline=bg[0], steps=2)
    fine = intgrad_t(oracle_mild, X, grid, baseline=bg[0], steps=64)
    _, c_coarse = local_accuracy_t(coarse, oracle_mild, bg)
    _, c_fine = local_accuracy_t(fine, oracle_mild, bg)
    assert c_fine.mean() <= c_coarse.mean()
    assert c_fine.max() <= 1e-3  # completeness transfer at large step count


def _importance_attr(imp):
    # wrap an (n, p) importance matrix as a constant-in-time attribution
    n, p = imp.shape
    vals = np.repeat(np.asarray(imp, dtype=float)[:, :, None], 2, axis=2)
    return Attribution(vals, TimeGrid(np.array([1.0, 2.0])), "test")


def test_global_ranking_single_instance():
    table = global_ranking(_importance_attr(np.array([[0.5, 0.3, 0.2]])))
    assert table.ranks.tolist() == [[1, 2, 3]]
    assert table.modal_rank().tolist() == [1, 2, 3]


def test_global_ranking_tie_breaks_to_lower_index():
    table = global_ranking(_importance_attr(np.array([[0.4, 0.4, 0.2]])))
    assert table.ranks.tolist() == [[1, 2, 3]]


def test_global_ranking_rows_are_permutations():
    rng = np.random.default_rng(7)
    table = global_ranking(_importance_attr(rng.uniform(0, 1, (20, 5))))
    for row in table.ranks:
        assert sorted(row.tolist()) == [1, 2, 3, 4, 5]
    assert table.counts.sum() == 20 * 5
    assert np.all(table.counts.sum(axis=1) == 20)


def test_measure_runtime_calibration():
    d = 0.05
    med = measure_runtime(lambda: time.sleep(d), repetitions=5)
    assert abs(med - d) <= 0.2 * d


def test_measure_runtime_single_repetition():
    assert measure_runtime(lambda: None, repetitions=1) >= 0.0
    with pytest.raises(ValueError):
        measure_runtime(lambda: None, repetitions=0)
