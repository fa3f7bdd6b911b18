"""Model heads: Breslow estimator, oracle closed forms, gradient correctness."""

import numpy as np
import pytest

from survgrad.data import SurvivalDataset, TimeGrid, evaluation_grid
from survgrad.errors import TrainingError
from survgrad.models import (
    CoxWeibullOracle,
    TrainConfig,
    breslow_baseline,
    fit_deephit,
    fit_deepsurv,
    load_model,
    predict_gradient,
    predict_survival,
    save_model,
)
from survgrad.models.deephit import DeepHitModel, bin_index, deephit_loss_and_upstream
from survgrad.models.deepsurv import DeepSurvModel, cox_loss_and_upstream
from survgrad.autodiff import DenseLayer, DenseNet
from survgrad.models.base import FeatureStats
from survgrad.simulation import design_preset, simulate


def fd_survival_gradient(model, x, grid, h=1e-5):
    p = x.size
    out = np.zeros((p, len(grid)))
    for j in range(p):
        up, down = x.copy(), x.copy()
        up[j] += h
        down[j] -= h
        s_up = model.survival_curves(up[None, :], grid)[0]
        s_down = model.survival_curves(down[None, :], grid)[0]
        out[j] = (s_up - s_down) / (2 * h)
    return out


# ---------------------------------------------------------------- Breslow

def test_breslow_all_events_hand_computation():
    times, inc = breslow_baseline(
        np.array([1.0, 2.0, 3.0]), np.array([1, 1, 1]), np.zeros(3)
    )
    assert np.array_equal(times, [1.0, 2.0, 3.0])
    assert np.allclose(inc, [1 / 3, 1 / 2, 1.0])


def test_breslow_single_event_among_censored():
    times, inc = breslow_baseline(
        np.array([1.0, 2.0, 3.0, 4.0]), np.array([1, 0, 0, 0]), np.zeros(4)
    )
    assert np.array_equal(times, [1.0])
    assert np.allclose(inc, [0.25])


def test_breslow_cumulative_nondecreasing():
    rng = np.random.default_rng(0)
    times, inc = breslow_baseline(
        rng.uniform(0, 5, 200), (rng.random(200) < 0.7).astype(int), rng.standard_normal(200)
    )
    assert np.all(inc >= 0)
    assert np.all(np.diff(np.cumsum(inc)) >= 0)


def test_breslow_timevarying_constant_risk_matches_array_form():
    rng = np.random.default_rng(1)
    t = rng.uniform(0, 5, 120)
    e = (rng.random(120) < 0.8).astype(int)
    g = rng.standard_normal(120)
    times_a, inc_a = breslow_baseline(t, e, g)
    times_b, inc_b = breslow_baseline(t, e, lambda tau: g, knots=times_a)
    assert np.array_equal(times_a, times_b)
    assert np.allclose(inc_a, inc_b)


def test_breslow_needs_events():
    with pytest.raises(TrainingError):
        breslow_baseline(np.array([1.0, 2.0]), np.array([0, 0]), np.zeros(2))


# ---------------------------------------------------------------- oracle

def test_oracle_survival_closed_form_point(oracle_a1):
    grid = TimeGrid(np.array([1.0]))
    s = oracle_a1.survival_curves(np.zeros((1, 3)), grid)[0, 0]
    assert s == pytest.approx(np.exp(-0.1), abs=1e-12)


def test_oracle_gradient_closed_form_point(oracle_a1):
    grid = TimeGrid(np.array([1.0]))
    g = predict_gradient(oracle_a1, np.zeros(3), grid)
    # dS/dx1 = -S * H * beta_1 = -exp(-0.1) * 0.1 * 1.7
    assert g[0, 0] == pytest.approx(-np.exp(-0.1) * 0.1 * 1.7, abs=1e-9)
    assert g[0, 0] == pytest.approx(-0.15382, abs=1e-5)


def test_oracle_zero_effect_feature_gradient_is_zero(oracle_a1):
    grid = TimeGrid(np.linspace(0.2, 6.8, 12))
    rng = np.random.default_rng(3)
    g = oracle_a1.gradient_curves(rng.standard_normal((5, 3)), grid)
    assert np.all(g[:, 2, :] == 0.0)


def test_oracle_matches_direct_formula(oracle_a1):
    rng = np.random.default_rng(8)
    X = rng.standard_normal((10, 3))
    grid = TimeGrid(np.linspace(0.1, 7.0, 20))
    got = oracle_a1.survival_curves(X, grid)
    direct = np.exp(
        -0.1 * grid.points[None, :] ** 2.5 * np.exp(X @ np.array([1.7, -2.4, 0.0]))[:, None]
    )
    assert np.array_equal(got, direct) or np.abs(got - direct).max() < 1e-15


def test_oracle_tve_gradient_matches_finite_differences():
    oracle = CoxWeibullOracle(0.1, 1.5, np.array([-3.0, 1.7, -2.4, 0.0]), tve_coeff=6.0)
    grid = TimeGrid(np.linspace(0.2, 6.5, 9))
    rng = np.random.default_rng(4)
    for _ in range(10):
        x = np.array(
            [rng.uniform(0.05, 0.95), rng.standard_normal(), rng.standard_normal(), rng.uniform(-1, 1)]
        )
        got = predict_gradient(oracle, x, grid)
        want = fd_survival_gradient(oracle, x, grid)
        assert np.abs(got - want).max() <= 1e-5


def test_oracle_risk_score_is_linear_predictor(oracle_a1):
    X = np.array([[1.0, 0.0, 5.0], [0.0, 1.0, -2.0]])
    assert np.allclose(oracle_a1.risk_score(X), [1.7, -2.4])


# ---------------------------------------------------------------- Cox loss

def test_cox_loss_gradient_matches_finite_differences():
    rng = np.random.default_rng(5)
    n = 40
    t = rng.uniform(0, 5, n)
    e = (rng.random(n) < 0.7).astype(int)
    g = rng.standard_normal(n)
    loss, up = cox_loss_and_upstream(g, t, e)
    h = 1e-6
    for k in range(n):
        gp, gm = g.copy(), g.copy()
        gp[k] += h
        gm[k] -= h
        fd = (cox_loss_and_upstream(gp, t, e)[0] - cox_loss_and_upstream(gm, t, e)[0]) / (2 * h)
        assert up[k] == pytest.approx(fd, abs=1e-7)


def test_deephit_loss_gradient_matches_finite_differences():
    rng = np.random.default_rng(6)
    B, K = 12, 6
    logits = rng.standard_normal((B, K))
    bins = rng.integers(1, K + 1, B)
    event = (rng.random(B) < 0.7).astype(int)
    times = rng.uniform(0, 5, B)
    loss, up = deephit_loss_and_upstream(logits, bins, event, 0.5, 0.1, times)
    h = 1e-6
    for i in range(B):
        for k in range(K):
            lp, lm = logits.copy(), logits.copy()
            lp[i, k] += h
            lm[i, k] -= h
            fd = (
                deephit_loss_and_upstream(lp, bins, event, 0.5, 0.1, times)[0]
                - deephit_loss_and_upstream(lm, bins, event, 0.5, 0.1, times)[0]
            ) / (2 * h)
            assert up[i, k] == pytest.approx(fd, abs=1e-6)


# ---------------------------------------------------------------- DeepHit head

def _uniform_deephit(K=10, p=2, horizon=5.0):
    net = DenseNet([DenseLayer(np.zeros((p, K)), np.zeros(K), "identity")])
    stats = FeatureStats(np.zeros(p), np.ones(p), np.zeros(p), np.ones(p))
    return DeepHitModel(net, np.linspace(0, horizon, K + 1), stats, TrainConfig(), 0)


def test_deephit_uniform_logits_survival_arithmetic():
    model = _uniform_deephit(K=10)
    edges = model.bin_edges
    grid = TimeGrid(edges[1:])
    s = model.survival_curves(np.zeros((1, 2)), grid)[0]
    assert s[0] == pytest.approx(0.9, abs=1e-12)
    assert s[-1] == pytest.approx(0.0, abs=1e-12)
    assert np.allclose(s, 1.0 - np.arange(1, 11) / 10.0)


def test_deephit_pmf_rows_sum_to_one(deephit_small):
    rng = np.random.default_rng(7)
    pmf = deephit_small.pmf(rng.standard_normal((50, 3)))
    assert np.abs(pmf.sum(axis=1) - 1.0).max() <= 1e-9


def test_bin_index_edges():
    edges = np.array([0.0, 1.0, 2.0, 3.0])
    assert bin_index(np.array([0.5, 1.0, 1.2, 3.0]), edges).tolist() == [1, 1, 2, 3]


# ---------------------------------------------------------------- fitted models

def test_fit_requires_events():
    data = SurvivalDataset(np.zeros((20, 2)), np.ones(20), np.zeros(20, dtype=int))
    with pytest.raises(TrainingError):
        fit_deepsurv(data, TrainConfig())


def test_deepsurv_partial_likelihood_decreases_on_separable_toy():
    rng = np.random.default_rng(10)
    n = 400
    x = rng.standard_normal((n, 1))
    t = np.exp(-2.0 * x[:, 0]) * rng.uniform(0.9, 1.1, n)
    data = SurvivalDataset(x, t, np.ones(n, dtype=int))
    cfg = TrainConfig(
        hidden=(8,), batch_size=400, max_epochs=12, patience=12, dropout=0.0, seed=2
    )
    model = fit_deepsurv(data, cfg)
    losses = model.history.train_loss[:10]
    assert all(a > b for a, b in zip(losses, losses[1:]))


def test_deepsurv_pure_noise_cindex_near_half():
    from survgrad.data import train_test_split
    from survgrad.metrics import concordance_index

    rng = np.random.default_rng(11)
    n = 2000
    data = SurvivalDataset(
        rng.standard_normal((n, 1)), rng.weibull(1.5, n), np.ones(n, dtype=int)
    )
    train, test = train_test_split(data, 400, seed=0)
    model = fit_deepsurv(train, TrainConfig(hidden=(16, 16), batch_size=512, max_epochs=30, seed=0))
    c = concordance_index(test.time, test.event, model.risk_score(test.features))
    assert abs(c - 0.5) <= 0.05


def test_deepsurv_constant_risk_gives_identical_rows(a1_small):
    train, _ = a1_small
    net = DenseNet([DenseLayer(np.zeros((3, 1)), np.zeros(1), "identity")])
    times, inc = breslow_baseline(train.time, train.event, np.zeros(train.n))
    model = DeepSurvModel(net, times, inc, FeatureStats.from_data(train), TrainConfig(), 0)
    grid = evaluation_grid(train, 16)
    curves = model.survival_curves(np.random.default_rng(0).standard_normal((4, 3)), grid)
    assert np.allclose(curves, curves[0][None, :])


@pytest.mark.parametrize("model_name", ["deepsurv", "coxtime", "deephit", "oracle"])
def test_gradients_match_finite_differences_per_variant(
    model_name, deepsurv_small, coxtime_small, deephit_small, oracle_a1, a1_small
):
    model = {
        "deepsurv": deepsurv_small,
        "coxtime": coxtime_small,
        "deephit": deephit_small,
        "oracle": oracle_a1,
    }[model_name]
    grid = evaluation_grid(a1_small[0], 12)
    rng = np.random.default_rng(13)
    worst = 0.0
    for _ in range(8):
        x = rng.standard_normal(3)
        got = predict_gradient(model, x, grid)
        want = fd_survival_gradient(model, x, grid)
        worst = max(worst, float(np.abs(got - want).max()))
    assert worst <= 1e-5


def test_survival_curves_bounded_and_monotone(
    deepsurv_small, coxtime_small, deephit_small, oracle_a1, a1_small
):
    grid = evaluation_grid(a1_small[0], 24)
    rng = np.random.default_rng(14)
    X = rng.standard_normal((20, 3))
    for model in (deepsurv_small, coxtime_small, deephit_small, oracle_a1):
        s = model.survival_curves(X, grid)
        assert s.min() >= -1e-9 and s.max() <= 1.0 + 1e-9
        assert np.all(np.diff(s, axis=1) <= 1e-9)
        wrapped = predict_survival(model, X, grid)
        assert wrapped.values.min() >= 0.0 and wrapped.values.max() <= 1.0
        assert np.all(np.diff(wrapped.values, axis=1) <= 0.0)


def test_survival_is_one_at_time_zero(deepsurv_small, coxtime_small, deephit_small, oracle_a1):
    grid = TimeGrid(np.array([0.0, 1.0]))
    x = np.zeros((1, 3))
    for model in (deepsurv_small, coxtime_small, deephit_small, oracle_a1):
        assert model.survival_curves(x, grid)[0, 0] == pytest.approx(1.0, abs=1e-12)


def test_deepsurv_gradient_matrix_is_rank_one(deepsurv_small, a1_small):
    grid = evaluation_grid(a1_small[0], 32)
    rng = np.random.default_rng(15)
    for _ in range(5):
        g = predict_gradient(deepsurv_small, rng.standard_normal(3), grid)
        norms = np.abs(g).max(axis=1, keepdims=True)
        norms[norms == 0] = 1.0
        gn = g / norms
        for a in range(3):
            for b in range(a + 1, 3):
                minors = gn[a, :, None] * gn[b, None, :] - gn[a, None, :] * gn[b, :, None]
                assert np.abs(minors).max() <= 1e-9


def test_coxtime_flat_extrapolation_beyond_knots(coxtime_small):
    last = coxtime_small.knot_times[-1]
    grid = TimeGrid(np.array([last, last + 5.0, last + 50.0]))
    s = coxtime_small.survival_curves(np.zeros((1, 3)), grid)[0]
    assert s[0] == pytest.approx(s[1], abs=1e-15)
    assert s[1] == pytest.approx(s[2], abs=1e-15)


@pytest.mark.parametrize("fixture", ["deepsurv_small", "coxtime_small", "deephit_small", "oracle_a1"])
def test_model_json_roundtrip(fixture, request, a1_small, tmp_path):
    model = request.getfixturevalue(fixture)
    path = tmp_path / "model.json"
    save_model(model, path)
    back = load_model(path)
    grid = evaluation_grid(a1_small[0], 10)
    X = np.random.default_rng(16).standard_normal((5, 3))
    assert np.array_equal(model.survival_curves(X, grid), back.survival_curves(X, grid))
    assert np.array_equal(model.gradient_curves(X, grid), back.gradient_curves(X, grid))


def test_train_determinism(a1_small, quick_cfg):
    train, _ = a1_small
    a = fit_deephit(train, quick_cfg)
    b = fit_deephit(train, quick_cfg)
    grid = evaluation_grid(train, 8)
    X = np.zeros((1, 3))
    assert np.array_equal(a.survival_curves(X, grid), b.survival_curves(X, grid))
