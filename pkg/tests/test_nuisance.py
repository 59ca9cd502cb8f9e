import numpy as np
import pytest

from longterm.data import CombinedDataset
from longterm.errors import EmptyStratum, IndexOutOfRange
from longterm.nuisance import (
    NuisanceSet,
    bias_at,
    bias_matrix,
    confounding_bias,
    fit_nuisances,
    observed_outcome_difference,
    outcome_difference_at,
)
from longterm.regress import FittedModel, RegressorSpec
from longterm.sim import SimConfig, generate, true_tau, unconfounded

OLS1 = RegressorSpec.ols(1)
GRID = np.linspace(-1.5, 1.5, 7).reshape(-1, 1)


def linear(c0, c1):
    return FittedModel(OLS1, 1, coef=np.array([c0, c1], dtype=float))


@pytest.fixture(scope="module")
def big_fit():
    ds, _ = generate(SimConfig(n_e=50_000, n_o=100_000, noise_sd=0.1, seed=11))
    return fit_nuisances(ds, OLS1)


def test_noiseless_unconfounded_gives_zero_bias():
    rng = np.random.default_rng(0)
    n = 40
    x = rng.normal(size=(n, 1))
    group = np.array(["E", "O"] * (n // 2))
    a = np.tile([0, 0, 1, 1], n // 4)
    s = np.column_stack([t * x[:, 0] for t in (1, 2, 3)])
    y = np.where(group == "O", 4 * x[:, 0], np.nan)
    nuis = fit_nuisances(CombinedDataset(group, a, x, s, y, 1), OLS1)
    for t in (1, 2, 3):
        np.testing.assert_allclose(nuis.mu_S_O[t - 1][1].predict(GRID), t * GRID[:, 0], atol=1e-9)
        np.testing.assert_allclose(bias_at(nuis, t, GRID), 0.0, atol=1e-9)


def test_first_step_contrasts_match_closed_form(big_fit):
    e0, e1 = big_fit.mu_S_E[0]
    o0, o1 = big_fit.mu_S_O[0]
    # observational contrast carries E[U | A=1] - E[U | A=0] = x
    np.testing.assert_allclose(o1.coef - o0.coef, [1.0, 1.1], atol=0.05)
    np.testing.assert_allclose(e1.coef - e0.coef, [1.0, 0.1], atol=0.05)


def test_bias_follows_doubling_law(big_fit):
    x = np.array([[-1.0], [-0.5], [0.5], [1.0]])
    for t in range(1, 7):
        np.testing.assert_allclose(bias_at(big_fit, t, x), -(2.0 ** (t - 1)) * x[:, 0], atol=0.03 * 2 ** (t - 1))
    m = bias_matrix(big_fit, x)
    np.testing.assert_allclose(m[:, 1:] / m[:, :-1], 2.0, atol=0.05)


def test_observed_difference_is_biased_by_long_term_confounding(big_fit):
    cfg = SimConfig()
    for xv in (-1.0, 0.5, 1.0):
        # observational contrast = tau - omega_L with omega_L = -2^8 x
        expected = true_tau(cfg, [xv]) + 2.0**8 * xv
        assert abs(observed_outcome_difference(big_fit, [xv]) - expected) < 0.02 * 2.0**8


def test_unconfounded_bias_and_difference_within_three_se():
    cfg = unconfounded(SimConfig(n_e=1000, n_o=2000))
    xq = np.array([[0.5]])
    omegas, diffs = [], []
    for seed in range(20):
        ds, _ = generate(SimConfig(**{**cfg.__dict__, "seed": seed}))
        nuis = fit_nuisances(ds, OLS1)
        omegas.append(bias_matrix(nuis, xq)[0])
        diffs.append(outcome_difference_at(nuis, xq)[0] - true_tau(cfg, [0.5]))
    omegas, diffs = np.array(omegas), np.array(diffs)
    se = omegas.std(axis=0, ddof=1) / np.sqrt(20)
    assert np.all(np.abs(omegas.mean(axis=0)) <= 3 * se)
    assert abs(diffs.mean()) <= 3 * diffs.std(ddof=1) / np.sqrt(20)


def test_constant_outcome_gives_zero_difference():
    c = linear(2.5, 0.0)
    nuis = NuisanceSet(((c, c),), ((c, c),), (c, c), 1)
    assert observed_outcome_difference(nuis, [0.3]) == 0.0


def test_swap_negates_and_identical_models_vanish(big_fit):
    np.testing.assert_array_equal(bias_at(big_fit.swapped(), 3, GRID), -bias_at(big_fit, 3, GRID))
    m = linear(0.3, -1.2)
    same = NuisanceSet(((m, m),) * 2, ((m, m),) * 2, (m, m), 1)
    np.testing.assert_allclose(bias_matrix(same, GRID), 0.0, atol=1e-12)


def test_deterministic_and_point_form_agrees(big_fit):
    a = bias_matrix(big_fit, GRID)
    np.testing.assert_array_equal(a, bias_matrix(big_fit, GRID))
    assert confounding_bias(big_fit, 2, GRID[3]) == a[3, 1]


def test_errors(big_fit):
    with pytest.raises(IndexOutOfRange):
        bias_at(big_fit, 7, GRID)
    with pytest.raises(IndexOutOfRange):
        bias_at(big_fit, 0, GRID)
    ds, _ = generate(SimConfig(n_e=30, n_o=30, seed=0))
    keep = np.flatnonzero(~ds.mask("E", 1))
    with pytest.raises(EmptyStratum):
        fit_nuisances(ds.take(keep), OLS1)
