import numpy as np
import pytest
from scipy.interpolate import CubicSpline
from sklearn.exceptions import NotFittedError

from lficonflict.imputation import (
    ENGINES,
    Ar1Params,
    ForestImputer,
    LinearBayesImputer,
    ar1_conditional,
    fill_window,
    fit_ar1,
    impute_window,
)


@pytest.fixture(scope="module")
def linear_table():
    rng = np.random.default_rng(10)
    x0 = rng.uniform(0, 10, size=400)
    x1 = 2.0 + 3.0 * x0 + rng.standard_normal(400) * 0.5
    return np.column_stack([x0, x1])


# --- linear-bayes engine ------------------------------------------------------

def test_exact_linear_relation_is_reproduced():
    rng = np.random.default_rng(0)
    x0 = rng.uniform(-1, 1, size=50)
    X = np.column_stack([x0, 2.0 * x0])
    imp = LinearBayesImputer().fit(X)
    draws = imp.impute(np.array([3.0, np.nan]), missing=[1], n_draws=20, seed=1)
    assert draws.shape == (20, 2)
    assert np.allclose(draws[:, 1], 6.0, atol=1e-6)
    assert np.all(draws[:, 0] == 3.0)


def test_single_missing_posterior_mean(linear_table):
    X = linear_table
    imp = LinearBayesImputer().fit(X)
    draws = imp.impute(np.array([4.0, np.nan]), missing=[1], n_draws=3000, seed=2)
    Z = np.column_stack([np.ones(X.shape[0]), X[:, 0]])
    beta = np.linalg.lstsq(Z, X[:, 1], rcond=None)[0]
    assert draws[:, 1].mean() == pytest.approx(beta[0] + 4.0 * beta[1], abs=0.05)
    # predictive spread dominated by the residual scale
    assert draws[:, 1].std() == pytest.approx(0.5, abs=0.08)


def test_draws_depend_on_seed(linear_table):
    imp = LinearBayesImputer().fit(linear_table)
    x = np.array([4.0, np.nan])
    a = imp.impute(x, [1], n_draws=5, seed=3)
    b = imp.impute(x, [1], n_draws=5, seed=3)
    c = imp.impute(x, [1], n_draws=5, seed=4)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_multiple_missing_components_cycle():
    rng = np.random.default_rng(5)
    x0 = rng.standard_normal(200)
    X = np.column_stack([x0, x0 + 0.1 * rng.standard_normal(200), rng.standard_normal(200)])
    imp = LinearBayesImputer(sweeps=4).fit(X)
    draws = imp.impute(np.array([1.0, np.nan, np.nan]), [1, 2], n_draws=50, seed=6)
    assert draws.shape == (50, 3)
    assert np.all(np.isfinite(draws))
    # x1 tracks x0 closely in the reference table
    assert abs(draws[:, 1].mean() - 1.0) < 0.2


def test_needs_enough_rows():
    with pytest.raises(ValueError, match="reference rows"):
        LinearBayesImputer().fit(np.random.default_rng(0).standard_normal((3, 2)))


def test_collinear_reference_ridged():
    rng = np.random.default_rng(7)
    X = np.column_stack([rng.standard_normal(30), np.zeros(30), rng.standard_normal(30)])
    with pytest.warns(UserWarning, match="ridge"):
        imp = LinearBayesImputer().fit(X)
    draws = imp.impute(np.array([0.0, np.nan, 0.0]), [1], n_draws=10, seed=0)
    assert np.all(np.isfinite(draws))


def test_not_fitted():
    with pytest.raises(NotFittedError):
        LinearBayesImputer().impute(np.zeros(2), [1], 1, 0)
    with pytest.raises(NotFittedError):
        ForestImputer().impute(np.zeros(2), [1], 1, 0)


def test_impute_argument_validation(linear_table):
    imp = LinearBayesImputer().fit(linear_table)
    with pytest.raises(ValueError, match="observed"):
        imp.impute(np.array([np.nan, np.nan]), [0, 1], 5, 0)
    with pytest.raises(ValueError, match="components"):
        imp.impute(np.zeros(3), [1], 5, 0)
    with pytest.raises(ValueError, match="finite"):
        imp.impute(np.array([np.nan, 1.0]), [1], 5, 0)
    with pytest.raises(ValueError):
        imp.impute(np.array([1.0, np.nan]), [1], 0, 0)


# --- forest engine ---------------------------------------------------------

def test_pmm_values_are_donors(linear_table):
    X = linear_table
    imp = ForestImputer(n_trees=15, random_state=1).fit(X)
    draws = imp.impute(np.array([4.0, np.nan]), [1], n_draws=40, seed=8)
    assert np.all(np.isin(draws[:, 1], X[:, 1]))
    assert np.all(draws[:, 0] == 4.0)
    # donors should sit near the regression value 2 + 3 * 4 = 14
    assert abs(np.median(draws[:, 1]) - 14.0) < 2.0


def test_forest_imputer_multi_missing_donor_membership():
    rng = np.random.default_rng(9)
    x0 = rng.uniform(0, 1, 150)
    X = np.column_stack([x0, x0 ** 2 + 0.05 * rng.standard_normal(150), rng.uniform(0, 1, 150)])
    imp = ForestImputer(n_trees=10, random_state=2).fit(X)
    draws = imp.impute(np.array([0.5, np.nan, np.nan]), [1, 2], n_draws=25, seed=10)
    assert np.all(np.isin(draws[:, 1], X[:, 1]))
    assert np.all(np.isin(draws[:, 2], X[:, 2]))


def test_forest_imputer_deterministic(linear_table):
    imp = ForestImputer(n_trees=8, random_state=3).fit(linear_table)
    x = np.array([2.0, np.nan])
    a = imp.impute(x, [1], n_draws=12, seed=11)
    b = imp.impute(x, [1], n_draws=12, seed=11)
    assert np.array_equal(a, b)


def test_engine_registry():
    assert set(ENGINES) == {"linear-bayes", "forest"}
    assert ENGINES["linear-bayes"] is LinearBayesImputer
    assert ENGINES["forest"] is ForestImputer


def test_engines_share_get_params_interface():
    assert LinearBayesImputer(sweeps=7).get_params()["sweeps"] == 7
    assert ForestImputer(n_trees=9).get_params()["n_trees"] == 9


# --- AR(1) fitting ------------------------------------------------------------

def test_fit_ar1_three_point_hand_case():
    p = fit_ar1(np.array([1.0, 2.0, 3.0]))
    assert p.mean == pytest.approx(2.0)
    assert p.phi == pytest.approx(0.0)
    assert p.marginal_var == pytest.approx(2.0 / 3.0)
    assert p.innovation_var == pytest.approx(2.0 / 3.0)


def test_fit_ar1_clamps_near_unit_root():
    p = fit_ar1(np.arange(500.0))
    assert p.phi == 0.99


def test_fit_ar1_recovers_phi():
    rng = np.random.default_rng(12)
    n, phi = 60000, 0.7
    x = np.empty(n)
    x[0] = 0.0
    eps = rng.standard_normal(n)
    for t in range(1, n):
        x[t] = phi * x[t - 1] + eps[t]
    p = fit_ar1(x)
    assert p.phi == pytest.approx(phi, abs=0.02)
    assert p.marginal_var == pytest.approx(1.0 / (1 - phi ** 2), rel=0.05)


def test_fit_ar1_rejects_constant():
    with pytest.raises(ValueError, match="zero variance"):
        fit_ar1(np.full(10, 2.0))


# --- AR(1) conditionals -----------------------------------------------------

def _dense_conditional(params, patch, window):
    patch = np.asarray(patch)
    window = np.asarray(window)
    obs = np.setdiff1d(patch, window)
    idx = {t: i for i, t in enumerate(patch)}
    lags = np.abs(patch[:, None] - patch[None, :])
    S = params.marginal_var * params.phi ** lags
    w = [idx[t] for t in window]
    o = [idx[t] for t in obs]
    A = S[np.ix_(w, o)] @ np.linalg.inv(S[np.ix_(o, o)])
    cov = S[np.ix_(w, w)] - A @ S[np.ix_(o, w)]
    return A, cov


def test_three_point_bridge_closed_form():
    p = Ar1Params(mean=1.0, phi=0.6, marginal_var=2.0)
    A, cov = ar1_conditional(p, [0, 1, 2], [1])
    coeff = p.phi / (1 + p.phi ** 2)
    assert A == pytest.approx(np.array([[coeff, coeff]]), abs=1e-12)
    assert cov[0, 0] == pytest.approx(p.innovation_var / (1 + p.phi ** 2), abs=1e-12)


def test_phi_zero_conditional_is_marginal():
    p = Ar1Params(mean=0.0, phi=0.0, marginal_var=3.0)
    A, cov = ar1_conditional(p, np.arange(10), np.arange(4, 7))
    assert np.allclose(A, 0.0)
    assert np.allclose(cov, 3.0 * np.eye(3))


def test_window_equals_patch_gives_marginal_cov():
    p = Ar1Params(mean=0.0, phi=0.5, marginal_var=1.5)
    patch = np.arange(5)
    A, cov = ar1_conditional(p, patch, patch)
    assert A.shape == (5, 0)
    lags = np.abs(patch[:, None] - patch[None, :])
    assert np.allclose(cov, 1.5 * 0.5 ** lags, atol=1e-12)


def test_conditional_matches_dense_formula_with_gap():
    p = Ar1Params(mean=-0.3, phi=0.8, marginal_var=0.7)
    patch = np.array([0, 1, 2, 6, 7, 8])
    window = np.array([6, 7])
    A, cov = ar1_conditional(p, patch, window)
    A_ref, cov_ref = _dense_conditional(p, patch, window)
    assert np.allclose(A, A_ref, atol=1e-10)
    assert np.allclose(cov, cov_ref, atol=1e-10)


def test_conditional_random_patches_property():
    rng = np.random.default_rng(13)
    for _ in range(25):
        phi = rng.uniform(-0.9, 0.9)
        p = Ar1Params(mean=0.0, phi=phi, marginal_var=rng.uniform(0.2, 3.0))
        pts = np.sort(rng.choice(20, size=rng.integers(3, 9), replace=False))
        w = pts[rng.integers(0, pts.size - 1) : pts.size - 1]
        if w.size == 0:
            w = pts[:1]
        A, cov = ar1_conditional(p, pts, w)
        A_ref, cov_ref = _dense_conditional(p, pts, w)
        assert np.allclose(A, A_ref, atol=1e-9)
        assert np.allclose(cov, cov_ref, atol=1e-9)
        assert np.all(np.linalg.eigvalsh(cov) > -1e-12)


def test_window_not_subset_rejected():
    p = Ar1Params(mean=0.0, phi=0.5, marginal_var=1.0)
    with pytest.raises(ValueError, match="subset"):
        ar1_conditional(p, [0, 1, 2], [5])


# --- window imputation ------------------------------------------------------

def _ar1_series(n, phi, seed):
    rng = np.random.default_rng(seed)
    x = np.empty(n)
    x[0] = rng.standard_normal() / np.sqrt(1 - phi ** 2)
    for t in range(1, n):
        x[t] = phi * x[t - 1] + rng.standard_normal()
    return x


def test_impute_window_mean_and_covariance():
    x = _ar1_series(60, 0.6, seed=14)
    p = Ar1Params(mean=0.0, phi=0.6, marginal_var=1.0 / (1 - 0.36))
    draws = impute_window(x, (25, 29), n_draws=6000, seed=15, ar1=p)
    assert draws.shape == (6000, 4)

    known = np.concatenate([np.arange(25), np.arange(29, 60)])
    spline = CubicSpline(known, x[known], bc_type="natural")
    assert np.allclose(draws.mean(axis=0), spline(np.arange(25, 29)), atol=0.06)

    patch = np.arange(17, 37)
    _, cov = ar1_conditional(p, patch, np.arange(25, 29))
    assert np.allclose(np.cov(draws.T), cov, atol=0.08)


def test_impute_window_boundary_extends_nearest():
    x = _ar1_series(30, 0.4, seed=16)
    quiet = Ar1Params(mean=0.0, phi=0.0, marginal_var=1e-18)
    draws = impute_window(x, (0, 3), n_draws=5, seed=17, ar1=quiet)
    assert np.allclose(draws, x[3], atol=1e-8)


def test_impute_window_reproducible():
    x = _ar1_series(40, 0.5, seed=18)
    a = impute_window(x, (10, 14), n_draws=6, seed=19)
    b = impute_window(x, (10, 14), n_draws=6, seed=19)
    c = impute_window(x, (10, 14), n_draws=6, seed=20)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_impute_window_validation():
    x = _ar1_series(20, 0.3, seed=21)
    with pytest.raises(ValueError, match="out of range"):
        impute_window(x, (15, 25), n_draws=2, seed=0)
    with pytest.raises(ValueError, match="observed point"):
        impute_window(x, (0, 20), n_draws=2, seed=0)
    with pytest.raises(ValueError):
        impute_window(np.arange(3.0), (1, 2), n_draws=2, seed=0)


def test_fill_window():
    x = np.arange(10.0)
    out = fill_window(x, (3, 6), [-1.0, -2.0, -3.0])
    assert np.array_equal(out[3:6], [-1.0, -2.0, -3.0])
    assert np.array_equal(out[:3], x[:3])
    assert np.array_equal(out[6:], x[6:])
    assert out is not x
    with pytest.raises(ValueError, match="length"):
        fill_window(x, (3, 6), [1.0])
