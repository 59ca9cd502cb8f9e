import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from longterm import regress
from longterm.errors import DimensionMismatch, EmptyTraining, SingularSystem, ValidationError
from longterm.regress import RegressorSpec, monomial_exponents, polynomial_features


def test_spec_parse_and_str():
    for text in ("ols:1", "ridge:2:0.5", "knn:7"):
        assert str(RegressorSpec.parse(text)) == text
    for bad in ("ols", "ols:0", "ols:6", "ridge:1:-1", "knn:0", "tree:3"):
        with pytest.raises(ValidationError):
            RegressorSpec.parse(bad)


@pytest.mark.parametrize("d, degree, count", [(1, 1, 2), (1, 3, 4), (2, 2, 6), (3, 2, 10)])
def test_coefficient_count(d, degree, count):
    assert len(monomial_exponents(d, degree)) == count
    x = np.random.default_rng(0).normal(size=(20, d))
    m = regress.fit(RegressorSpec.ols(degree), x, x.sum(axis=1))
    assert m.coef.shape == (count,)


def test_linear_exact():
    x = np.linspace(-2, 2, 9)
    m = regress.fit(RegressorSpec.ols(1), x, 3 * x + 1)
    np.testing.assert_allclose(m.coef, [1, 3], atol=1e-10)


def test_uniform_weights_match_unweighted():
    rng = np.random.default_rng(1)
    x, y = rng.normal(size=30), rng.normal(size=30)
    a = regress.fit(RegressorSpec.ols(2), x, y)
    b = regress.fit(RegressorSpec.ols(2), x, y, weights=np.full(30, 3.0))
    np.testing.assert_allclose(a.coef, b.coef, atol=1e-10)


def test_quadratic_exact_on_held_out_grid():
    x = np.linspace(-1, 1, 10)
    m = regress.fit(RegressorSpec.ols(2), x, x**2)
    grid = np.linspace(-3, 3, 25)
    np.testing.assert_allclose(m.predict(grid), grid**2, atol=1e-9)


def test_constant_and_knn_mean():
    x = np.random.default_rng(2).normal(size=(12, 2))
    m = regress.fit(RegressorSpec.ols(2), x, np.full(12, 4.5))
    np.testing.assert_allclose(m.predict(np.ones((3, 2)) * 7), 4.5, atol=1e-9)
    y = np.arange(12.0)
    k = regress.fit(RegressorSpec.knn(12), x, y)
    np.testing.assert_allclose(k.predict(np.zeros((4, 2))), y.mean())


def test_knn_k1_interpolates_with_lowest_index_ties():
    x = np.array([[0.0], [1.0], [1.0], [2.0]])
    y = np.array([5.0, 6.0, 7.0, 8.0])
    m = regress.fit(RegressorSpec.knn(1), x, y)
    np.testing.assert_array_equal(m.predict(x), [5.0, 6.0, 6.0, 8.0])


def test_knn_zero_weight_neighbourhood_uses_plain_mean():
    m = regress.fit(RegressorSpec.knn(2), [0.0, 1.0, 5.0], [1.0, 3.0, 9.0], weights=[0.0, 0.0, 1.0])
    assert m.predict([0.0])[0] == 2.0


def test_ridge_shrinks_to_intercept():
    rng = np.random.default_rng(3)
    x = rng.normal(size=50)
    y = 2 * x + rng.normal(size=50)
    y -= y.mean()
    m = regress.fit(RegressorSpec.ridge(1, 1e12), x, y)
    # intercept-only fit of centred targets
    np.testing.assert_allclose(m.coef[0], y.mean() - 0.0, atol=1e-6)
    assert abs(m.coef[1]) < 1e-8


def test_duplicate_equals_double_weight():
    rng = np.random.default_rng(4)
    x, y = rng.normal(size=15), rng.normal(size=15)
    dup = regress.fit(RegressorSpec.ols(2), np.append(x, x[0]), np.append(y, y[0]))
    w = np.ones(15)
    w[0] = 2
    wt = regress.fit(RegressorSpec.ols(2), x, y, weights=w)
    np.testing.assert_allclose(dup.coef, wt.coef, atol=1e-10)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000), kind=st.sampled_from(["ols:2", "ridge:2:0.3", "knn:3"]))
def test_permutation_invariance(seed, kind):
    rng = np.random.default_rng(seed)
    x, y = rng.normal(size=(20, 1)), rng.normal(size=20)
    perm = rng.permutation(20)
    spec = RegressorSpec.parse(kind)
    q = rng.normal(size=(5, 1))
    a = regress.fit(spec, x, y).predict(q)
    b = regress.fit(spec, x[perm], y[perm]).predict(q)
    np.testing.assert_allclose(a, b, atol=1e-10)


def test_rank_deficient_fallback_and_strict_mode():
    x = np.ones(5)
    m = regress.fit(RegressorSpec.ols(1), x, np.arange(5.0))
    assert m.ridge_fallback and np.isfinite(m.coef).all()
    with pytest.raises(SingularSystem):
        regress.fit(RegressorSpec.ols(1), x, np.arange(5.0), allow_fallback=False)
    z = regress.fit(RegressorSpec.ols(1), x, np.ones(5), multipliers=np.zeros(5))
    assert z.ridge_fallback and np.all(z.coef == 0)


def test_multipliers_solve_scaled_problem():
    x = np.linspace(-1, 1, 8)
    m = np.linspace(1, 3, 8)
    fitted = regress.fit(RegressorSpec.ols(1), x, m * (2 - x), multipliers=m)
    np.testing.assert_allclose(fitted.coef, [2, -1], atol=1e-10)


def test_errors():
    with pytest.raises(EmptyTraining):
        regress.fit(RegressorSpec.ols(1), np.empty((0, 1)), [])
    with pytest.raises(DimensionMismatch):
        regress.fit(RegressorSpec.ols(1), [1.0, 2.0], [1.0])
    m = regress.fit(RegressorSpec.ols(1), np.random.default_rng(0).normal(size=(5, 2)), np.arange(5.0))
    with pytest.raises(DimensionMismatch):
        regress.predict(m, [1.0, 2.0, 3.0])
    assert np.isfinite(regress.predict(m, [1.0, 2.0]))


def test_features_order():
    f = polynomial_features(np.array([[2.0, 3.0]]), 2)
    np.testing.assert_array_equal(f, [[1, 2, 3, 4, 6, 9]])


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10_000), k=st.integers(1, 12), levels=st.integers(2, 6))
def test_partial_neighbour_search_matches_full_sort(seed, k, levels):
    # coarse integer distances force many ties
    dist = np.random.default_rng(seed).integers(0, levels, size=(7, 10)).astype(float)
    expected = np.argsort(dist, axis=1, kind="stable")[:, :k]
    np.testing.assert_array_equal(regress._nearest(dist, k)[:, :k], expected)
