import numpy as np
import pytest
from sklearn.base import clone
from sklearn.discriminant_analysis import QuadraticDiscriminantAnalysis

from ensdiv.bayes import (
    COEFF_CLAMP,
    ChernoffBayesBound,
    ChernoffSweep,
    QuadraticDiscriminant,
    bayes_error_bound,
    chernoff_sweep,
    default_alpha_grid,
    load_iris,
    minmax_scale,
    qda_cv_error,
    read_labeled_csv,
)
from ensdiv.exceptions import ConfigurationError, ModelError, ParameterError


def test_alpha_grid():
    g = default_alpha_grid()
    assert g.size == 99 and g[0] == 0.01 and g[-1] == 0.99


def test_bound_formula():
    sweep = ChernoffSweep(np.array([0.4]), np.array([0.5]), np.array([0.5]), 0.4, 0.5)
    rep = bayes_error_bound(sweep, w1=0.3)
    assert rep.bound == pytest.approx(0.3 ** 0.4 * 0.7 ** 0.6 * 0.5, rel=1e-15)
    assert bayes_error_bound(sweep).bound == pytest.approx(0.25)
    with pytest.raises(ParameterError):
        bayes_error_bound(sweep, w1=1.0)


def test_sweep_clamps_and_takes_minimum(rng):
    X1, X2 = rng.random((200, 2)), rng.random((200, 2))
    sw = chernoff_sweep(X1, X2, grid=[0.2, 0.5, 0.8])
    assert np.all(sw.coefficients <= COEFF_CLAMP) and np.all(sw.coefficients >= 0)
    assert sw.c_star == sw.coefficients.min()
    assert sw.alpha_star in (0.2, 0.5, 0.8)
    with pytest.raises(ParameterError):
        chernoff_sweep(X1, X2, grid=[0.0, 0.5])


def test_minmax_scale_pooled():
    a, b = minmax_scale(np.array([[0.0, 5.0], [2.0, 5.0]]), np.array([[4.0, 5.0]]))
    assert a.tolist() == [[0.0, 0.0], [0.5, 0.0]] and b.tolist() == [[1.0, 0.0]]


def test_estimator_contract_and_separation():
    g = np.random.default_rng(0)
    X = np.vstack([g.normal(0, 1, (200, 2)), g.normal(4, 1, (200, 2))])
    y = np.repeat(["a", "b"], 200)
    est = ChernoffBayesBound(priors=0.5)
    assert clone(est).get_params()["priors"] == 0.5
    est.fit(X, y)
    assert 0 <= est.bound_ < 0.1
    assert list(est.classes_) == ["a", "b"]
    with pytest.raises(ConfigurationError):
        ChernoffBayesBound().fit(X, np.repeat(["a", "b", "c", "d"], 100))


def test_bootstrap_interval_attached(rng):
    X = rng.random((160, 2))
    y = np.repeat([0, 1], 80)
    est = ChernoffBayesBound(n_bootstraps=100, alphas=[0.5])
    est.fit(X, y)
    lo, hi = est.ci_
    assert lo <= hi and est.report_.bootstrap.replicates.size == 100


def test_qda_matches_sklearn_on_well_conditioned_data():
    g = np.random.default_rng(1)
    X = np.vstack([g.normal(0, 1, (100, 3)), g.normal(1, 2, (100, 3))])
    y = np.repeat([0, 1], 100)
    ours = QuadraticDiscriminant(ridge=0.0).fit(X, y)
    ref = QuadraticDiscriminantAnalysis().fit(X, y)
    Z = g.normal(0.5, 2, (500, 3))
    assert np.mean(ours.predict(Z) == ref.predict(Z)) == 1.0


def test_qda_errors():
    with pytest.raises(ModelError):
        QuadraticDiscriminant().fit(np.zeros((3, 2)), [0, 0, 1])
    with pytest.raises(ModelError):
        QuadraticDiscriminant(ridge=0.0).fit(np.zeros((4, 2)), [0, 0, 1, 1])


def test_qda_cv_error_separable():
    g = np.random.default_rng(2)
    X = np.vstack([g.normal(0, 1, (50, 2)), g.normal(10, 1, (50, 2))])
    y = np.repeat([0, 1], 50)
    assert qda_cv_error(X, y, folds=5, seed=0) == 0.0
    with pytest.raises(ParameterError):
        qda_cv_error(X, y, folds=1)


def test_iris_fixture():
    X, y = load_iris()
    assert X.shape == (150, 4)
    assert {c: int(np.sum(y == c)) for c in np.unique(y)} == {
        "setosa": 50, "versicolor": 50, "virginica": 50}


def test_read_labeled_csv_ragged(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("1,2,a\n3,b\n")
    with pytest.raises(ConfigurationError, match="row 2"):
        read_labeled_csv(p)


def test_pair_config_small_class_fallback():
    from ensdiv.bayes import SMALL_CLASS_L_BAR, pair_config

    assert pair_config(50, 50).l_bar == SMALL_CLASS_L_BAR
    assert pair_config(500, 500).l_bar is None
    assert pair_config(50, 50, l_bar=(2.0, 3.0)).l_bar == (2.0, 3.0)
    # M2 = 6 caps k at 6: l = 3.0 would need k = 7
    assert pair_config(6, 12).l_bar == (1.0, 1.5, 2.0, 2.5)
