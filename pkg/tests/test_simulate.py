import math

import numpy as np
import pytest
from scipy import integrate

from ensdiv.ensemble import EnsembleConfig
from ensdiv.exceptions import ParameterError, PathologicalSpecError
from ensdiv.simulate import (
    TruncatedGaussianSpec,
    clt_experiment,
    loglog_slope,
    mse_sweep,
    run_trials,
    sample_truncated_gaussian,
    truncated_gaussian_chernoff,
    truncated_gaussian_kl,
    truth_value,
)

S1 = TruncatedGaussianSpec((0.7, 0.6), 0.1)
S2 = TruncatedGaussianSpec((0.3, 0.4), 0.3)


def test_spec_validation_and_scale():
    assert TruncatedGaussianSpec.isotropic(3, 0.5, 0.04).scale == pytest.approx(0.2)
    assert TruncatedGaussianSpec((0.5,), 0.04, sigma_is_variance=False).scale == 0.04
    for bad in [dict(mu=(), sigma=1.0), dict(mu=(0.5,), sigma=0.0),
                dict(mu=(np.nan,), sigma=1.0)]:
        with pytest.raises(PathologicalSpecError):
            TruncatedGaussianSpec(**bad)


def test_pdf_integrates_to_one():
    total, _ = integrate.dblquad(lambda y, x: S2.pdf([[x, y]])[0], 0, 1, 0, 1)
    assert total == pytest.approx(1.0, abs=1e-9)
    assert S2.pdf([[1.5, 0.5]])[0] == 0.0


def test_sampler_support_shape_and_determinism():
    X = sample_truncated_gaussian(S1, 1000, seed=3)
    assert X.shape == (1000, 2)
    assert np.all((X >= 0) & (X <= 1))
    assert np.array_equal(X, sample_truncated_gaussian(S1, 1000, seed=3))
    assert np.allclose(X.mean(axis=0), [0.67, 0.6], atol=0.05)


def test_sampler_rejects_pathological_spec():
    with pytest.raises(PathologicalSpecError):
        sample_truncated_gaussian(TruncatedGaussianSpec((8.0,), 0.01), 10)
    with pytest.raises(ParameterError):
        sample_truncated_gaussian(S1, 0)


def test_kl_oracle_against_2d_quadrature():
    def integrand(y, x):
        p, q = S1.pdf([[x, y]])[0], S2.pdf([[x, y]])[0]
        return p * math.log(p / q)

    ref, _ = integrate.dblquad(integrand, 0, 1, 0, 1, epsabs=1e-11, epsrel=1e-11)
    assert truncated_gaussian_kl(S1, S2) == pytest.approx(ref, rel=1e-8)


def test_chernoff_oracle_against_2d_quadrature():
    a = 0.3
    ref, _ = integrate.dblquad(
        lambda y, x: S1.pdf([[x, y]])[0] ** a * S2.pdf([[x, y]])[0] ** (1 - a),
        0, 1, 0, 1, epsabs=1e-11, epsrel=1e-11)
    assert truncated_gaussian_chernoff(S1, S2, a) == pytest.approx(ref, rel=1e-8)


def test_oracle_identities():
    assert truncated_gaussian_kl(S1, S1) == pytest.approx(0.0, abs=1e-12)
    assert truncated_gaussian_chernoff(S2, S2, 0.4) == pytest.approx(1.0, abs=1e-10)
    assert truth_value(S1, S2, "kl_reverse") == pytest.approx(truncated_gaussian_kl(S2, S1))
    assert truth_value(S1, S2, "hellinger") == pytest.approx(
        truncated_gaussian_chernoff(S1, S2, 0.5))


def test_untruncated_limit_matches_closed_form():
    # far from the cube faces the truncation is negligible
    a = TruncatedGaussianSpec((0.5,), 0.05, sigma_is_variance=False)
    b = TruncatedGaussianSpec((0.55,), 0.05, sigma_is_variance=False)
    assert truncated_gaussian_kl(a, b) == pytest.approx(0.5, rel=1e-9)
    assert truncated_gaussian_chernoff(a, b, 0.5) == pytest.approx(math.exp(-1 / 8), rel=1e-9)


def test_loglog_slope():
    T = [100, 200, 400, 800]
    assert loglog_slope(T, [1.0 / t for t in T]) == pytest.approx(-1.0)
    assert math.isnan(loglog_slope(T, [1.0, 0.0, 1.0, 1.0]))


def test_run_trials_independent_of_workers():
    cfg = EnsembleConfig()
    a = run_trials(S1, S2, 100, 6, cfg, seed=5, n_jobs=1)
    b = run_trials(S1, S2, 100, 6, cfg, seed=5, n_jobs=3)
    assert np.array_equal(a.estimates, b.estimates)
    assert a.config["T"] == 100 and a.seeds[2] == [5, 2]


def test_clt_experiment_small():
    batch, diag = clt_experiment(S1, S2, 100, 25, seed=1)
    assert batch.estimates.size == 25 and diag.n == 25
    with pytest.raises(ParameterError):
        clt_experiment(S1, S2, 100, 10)


def test_mse_sweep_with_exact_rate_double():
    def estimator(X1, X2, config, f):
        g = np.random.default_rng(config.seed)
        return 1.0 + g.standard_normal() / math.sqrt(X2.shape[0])

    res = mse_sweep(S1, S2, [100, 400, 1600, 6400], 200, 1.0, estimator=estimator, seed=2)
    assert -1.2 < res.slope < -0.8
    assert res.to_dict()["slope_defined"]
    with pytest.raises(ParameterError):
        mse_sweep(S1, S2, [100, 200, 300], 5, 1.0, estimator=estimator)
    with pytest.raises(ParameterError):
        mse_sweep(S1, S2, [100, 300, 200, 400], 5, 1.0, estimator=estimator)
