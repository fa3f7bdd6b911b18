"""Attribution methods against closed-form, linear-model and repetition oracles."""

import warnings

import numpy as np
import pytest

from survgrad.attribution import (
    Attribution,
    NoiseSpec,
    attribution_from_json,
    attribution_to_csv,
    attribution_to_json,
    grad_t,
    gradshap_t,
    gradxinput_t,
    intgrad_t,
    normalized_contributions,
    smoothgrad_t,
    time_averaged_importance,
)
from survgrad.data import TimeGrid
from survgrad.errors import ConfigError
from survgrad.models import CoxWeibullOracle
from survgrad.models.base import FittedModel


class LinearCurveModel(FittedModel):
    """S(t|x) = a(t) + b(t) . x -- not a real survival law, but ideal for
    checking linearity properties of the methods."""

    variant = "linear-toy"

    def __init__(self, a, B):
        self.a = np.asarray(a, dtype=np.float64)  # (T,)
        self.B = np.asarray(B, dtype=np.float64)  # (p, T)
        self.feature_stats = None

    @property
    def p(self):
        return self.B.shape[0]

    def survival_curves(self, X, grid):
        X = np.atleast_2d(X)
        return self.a[None, :] + X @ self.B

    def gradient_curves(self, X, grid):
        X = np.atleast_2d(X)
        return np.broadcast_to(self.B[None, :, :], (X.shape[0], *self.B.shape)).copy()


GRID = TimeGrid(np.linspace(0.25, 6.75, 14))


@pytest.fixture(scope="module")
def linear_model():
    rng = np.random.default_rng(21)
    return LinearCurveModel(rng.uniform(0.2, 0.8, len(GRID)), rng.standard_normal((3, len(GRID))))


def test_grad_signs_on_oracle(oracle_a1):
    rng = np.random.default_rng(1)
    attr = grad_t(oracle_a1, rng.standard_normal((6, 3)), GRID)
    assert np.all(attr.values[:, 0, :] < 0)  # harmful feature: raising it lowers survival
    assert np.all(attr.values[:, 1, :] > 0)
    assert np.all(attr.values[:, 2, :] == 0)


def test_grad_constant_model_is_zero(oracle_a1):
    constant = CoxWeibullOracle(0.1, 2.5, np.zeros(3))
    attr = grad_t(constant, np.random.default_rng(2).standard_normal((4, 3)), GRID)
    assert not attr.values.any()


def test_grad_absolute_flag(oracle_a1):
    X = np.random.default_rng(3).standard_normal((4, 3))
    signed = grad_t(oracle_a1, X, GRID)
    unsigned = grad_t(oracle_a1, X, GRID, absolute=True)
    assert np.array_equal(unsigned.values, np.abs(signed.values))


def test_smoothgrad_zero_sigma_equals_grad(oracle_a1):
    X = np.random.default_rng(4).standard_normal((3, 3))
    rng_range = (np.ones(3), np.ones(3))  # degenerate range: sigma = 0
    g = grad_t(oracle_a1, X, GRID)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        single = smoothgrad_t(oracle_a1, X, GRID, NoiseSpec(0.2, 1, 0), feature_range=rng_range)
        many = smoothgrad_t(oracle_a1, X, GRID, NoiseSpec(0.2, 7, 0), feature_range=rng_range)
    assert np.array_equal(single.values, g.values)  # K = 1: no averaging rounding
    assert np.allclose(many.values, g.values, atol=1e-12, rtol=0)


def test_smoothgrad_equals_grad_for_linear_model(linear_model):
    X = np.random.default_rng(5).standard_normal((4, 3))
    spec = NoiseSpec(noise_level=0.5, samples=11, seed=3)
    sg = smoothgrad_t(linear_model, X, GRID, spec, feature_range=(np.zeros(3), np.ones(3)))
    g = grad_t(linear_model, X, GRID)
    assert np.allclose(sg.values, g.values, atol=1e-12)


def test_smoothgrad_error_shrinks_like_sqrt_k(oracle_a1):
    # Monte Carlo repetition study: sd over reruns at K and 10K differs ~ sqrt(10)
    x = np.array([[0.3, -0.4, 0.1]])
    ranges = (np.full(3, -2.0), np.full(3, 2.0))
    spec_t = GRID.points.searchsorted(3.0)
    reps = 40
    sds = []
    for K in (50, 500):
        vals = []
        for seed in range(reps):
            attr = smoothgrad_t(
                oracle_a1, x, GRID, NoiseSpec(0.15, K, seed), feature_range=ranges
            )
            vals.append(attr.values[0, 0, spec_t])
        sds.append(np.std(vals))
    ratio = sds[0] / sds[1]
    assert abs(ratio - np.sqrt(10.0)) <= 0.3 * np.sqrt(10.0)


def test_smoothgrad_multiply_input_scaling(oracle_a1):
    X = np.random.default_rng(6).standard_normal((3, 3))
    spec = NoiseSpec(noise_level=0.1, samples=9, seed=1)
    rng_range = (np.full(3, -2.0), np.full(3, 2.0))
    plain = smoothgrad_t(oracle_a1, X, GRID, spec, feature_range=rng_range)
    scaled = smoothgrad_t(
        oracle_a1, X, GRID, spec, multiply_input=True, feature_range=rng_range
    )
    assert np.allclose(scaled.values, plain.values * X[:, :, None])


def test_gradxinput_zero_input(oracle_a1):
    attr = gradxinput_t(oracle_a1, np.zeros((1, 3)), GRID)
    assert not attr.values.any()


def test_gradxinput_euler_identity_for_linear_origin_model():
    rng = np.random.default_rng(7)
    model = LinearCurveModel(np.zeros(len(GRID)), rng.standard_normal((3, len(GRID))))
    X = rng.standard_normal((5, 3))
    attr = gradxinput_t(model, X, GRID)
    assert np.allclose(attr.values.sum(axis=1), model.survival_curves(X, GRID), atol=1e-12)


def test_gradxinput_sign_follows_feature_value(oracle_a1):
    # input scaling makes the attribution sign track the feature value, not the
    # coefficient: with dS/dx2 > 0 everywhere (protective), sign(R2) = sign(x2)
    x = np.array([[-0.435, 0.1162, -0.081]])
    attr = gradxinput_t(oracle_a1, x, GRID)
    assert np.all(attr.values[0, 1, :] >= 0)  # positive value, negative log-HR
    assert np.all(attr.values[0, 0, :] >= 0)  # negative value, positive log-HR
    flipped = x.copy()
    flipped[0, 1] = -flipped[0, 1]
    attr2 = gradxinput_t(oracle_a1, flipped, GRID)
    assert np.all(attr2.values[0, 1, :] <= 0)


def test_intgrad_degenerate_path(oracle_a1):
    x = np.array([0.5, -0.3, 0.9])
    attr = intgrad_t(oracle_a1, x[None, :], GRID, baseline=x, steps=16)
    assert np.allclose(attr.values, 0.0)
    assert np.allclose(attr.pred_diff, 0.0)


def test_intgrad_completeness_on_oracle(oracle_a1):
    rng = np.random.default_rng(8)
    X = rng.standard_normal((10, 3))
    attr = intgrad_t(oracle_a1, X, GRID, baseline="zeros", steps=64)
    gap = np.abs(attr.values.sum(axis=1) - attr.pred_diff)
    assert gap.max() <= 0.01


def test_intgrad_exact_for_linear_model_single_step(linear_model):
    X = np.random.default_rng(9).standard_normal((4, 3))
    attr = intgrad_t(linear_model, X, GRID, baseline=np.zeros(3), steps=1)
    assert np.abs(attr.values.sum(axis=1) - attr.pred_diff).max() <= 1e-12


def test_intgrad_rejects_zero_steps(oracle_a1):
    with pytest.raises(ConfigError):
        intgrad_t(oracle_a1, np.zeros((1, 3)), GRID, steps=0)


def test_gradshap_self_background_is_zero(oracle_a1):
    x = np.array([[0.4, 0.2, -0.7]])
    attr = gradshap_t(oracle_a1, x, GRID, background=x, n_samples=4, n_int=8, seed=0)
    assert np.allclose(attr.values, 0.0)


def test_gradshap_stratified_single_reference_matches_intgrad(oracle_a1):
    rng = np.random.default_rng(10)
    x = rng.standard_normal((1, 3))
    ref = rng.standard_normal((1, 3))
    gs = gradshap_t(
        oracle_a1, x, GRID, background=ref, n_samples=1, n_int=64, seed=0, stratified=True
    )
    ig = intgrad_t(oracle_a1, x, GRID, baseline=ref[0], steps=64)
    assert np.abs(gs.values - ig.values).max() <= 1e-3


def test_gradshap_deterministic_given_seed(oracle_a1):
    rng = np.random.default_rng(11)
    X = rng.standard_normal((2, 3))
    bg = rng.standard_normal((6, 3))
    a = gradshap_t(oracle_a1, X, GRID, bg, n_samples=4, n_int=5, seed=42)
    b = gradshap_t(oracle_a1, X, GRID, bg, n_samples=4, n_int=5, seed=42)
    assert np.array_equal(a.values, b.values)
    c = gradshap_t(oracle_a1, X, GRID, bg, n_samples=4, n_int=5, seed=43)
    assert not np.array_equal(a.values, c.values)


def test_feature_permutation_symmetry():
    # permuting features of model and input permutes attribution rows identically
    rng = np.random.default_rng(12)
    beta = np.array([0.9, -0.4, 0.2])
    perm = np.array([2, 0, 1])
    m1 = CoxWeibullOracle(0.1, 2.5, beta)
    m2 = CoxWeibullOracle(0.1, 2.5, beta[perm])
    X = rng.standard_normal((4, 3))
    bg = rng.standard_normal((5, 3))
    a1 = gradshap_t(m1, X, GRID, bg, n_samples=5, n_int=6, seed=1).values
    a2 = gradshap_t(m2, X[:, perm], GRID, bg[:, perm], n_samples=5, n_int=6, seed=1).values
    assert np.allclose(a1[:, perm, :], a2, atol=1e-12)


def test_dummy_feature_gets_zero_everywhere(oracle_a1):
    rng = np.random.default_rng(13)
    X = rng.standard_normal((3, 3))
    bg = rng.standard_normal((6, 3))
    ranges = (np.full(3, -2.0), np.full(3, 2.0))
    results = [
        grad_t(oracle_a1, X, GRID).values,
        gradxinput_t(oracle_a1, X, GRID).values,
        smoothgrad_t(oracle_a1, X, GRID, NoiseSpec(0.1, 5, 0), feature_range=ranges).values,
        intgrad_t(oracle_a1, X, GRID, baseline="zeros", steps=16).values,
        gradshap_t(oracle_a1, X, GRID, bg, n_samples=4, n_int=8, seed=0).values,
    ]
    for vals in results:
        assert np.all(vals[:, 2, :] == 0.0)


def test_chf_target_consistent_with_survival(oracle_a1):
    X = np.random.default_rng(14).standard_normal((3, 3))
    s_attr = grad_t(oracle_a1, X, GRID)
    h_attr = grad_t(oracle_a1, X, GRID, target="chf")
    s = np.maximum(oracle_a1.survival_curves(X, GRID), 1e-12)  # documented floor
    assert np.allclose(h_attr.values, -s_attr.values / s[:, None, :], rtol=1e-9, atol=1e-12)
    with pytest.raises(ConfigError):
        grad_t(oracle_a1, X, GRID, target="hazard")


def test_normalized_contributions_arithmetic():
    vals = np.zeros((1, 2, 1))
    vals[0, :, 0] = [3.0, -1.0]
    attr = Attribution(vals, TimeGrid(np.array([1.0])), "grad")
    norm = normalized_contributions(attr)
    assert np.allclose(norm[0, :, 0], [0.75, 0.25])


def test_normalized_contributions_sum_to_one(oracle_a1):
    X = np.random.default_rng(15).standard_normal((4, 3))
    attr = grad_t(oracle_a1, X, GRID)
    norm = normalized_contributions(attr)
    assert np.abs(norm.sum(axis=1) - 1.0).max() <= 1e-12


def test_normalized_contributions_zero_slice_uniform():
    attr = Attribution(np.zeros((1, 4, 2)), TimeGrid(np.array([1.0, 2.0])), "grad")
    with pytest.warns(UserWarning):
        norm = normalized_contributions(attr)
    assert np.allclose(norm, 0.25)


def test_time_averaged_importance_properties(oracle_a1):
    X = np.random.default_rng(16).standard_normal((5, 3))
    attr = grad_t(oracle_a1, X, GRID)
    imp = time_averaged_importance(attr)
    assert np.abs(imp.sum(axis=1) - 1.0).max() <= 1e-12
    # constant-in-time slice: average equals the slice
    vals = np.tile(np.array([[2.0], [1.0]])[None, :, :], (1, 1, len(GRID)))
    const = Attribution(vals, GRID, "grad")
    assert np.allclose(time_averaged_importance(const)[0], [2 / 3, 1 / 3])


def test_exports_roundtrip(tmp_path, oracle_a1):
    X = np.random.default_rng(17).standard_normal((2, 3))
    attr = intgrad_t(oracle_a1, X, GRID, baseline="zeros", steps=8)
    csv_path = tmp_path / "attr.csv"
    attribution_to_csv(attr, csv_path)
    lines = csv_path.read_text().strip().split("\n")
    assert lines[0] == "instance,feature,time,value,method"
    assert len(lines) == 1 + 2 * 3 * len(GRID)

    json_path = tmp_path / "attr.json"
    attribution_to_json(attr, json_path)
    back = attribution_from_json(json_path)
    assert np.array_equal(back.values, attr.values)
    assert np.array_equal(back.pred_diff, attr.pred_diff)
    assert back.method == attr.method
