"""Resampling inference for ensemble divergence estimates.

The ensemble estimate is asymptotically normal, but its variance constants
are not computable from data, so the bootstrap supplies the scale. Each
replicate or permutation draws from a stream keyed by ``(seed, index)``,
which keeps results independent of execution order.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr, ndtri

from ._validation import check_open_unit, check_points, check_same_dim
from .ensemble import EnsembleConfig, child_rng, ensemble_estimate
from .exceptions import DegenerateTrialsError, EnsdivError, EstimatorFailureError, ParameterError
from .functionals import make_functional

MAX_FAILURE_RATE = 0.01
_IDX_GUARD = 1e-9


def normal_cdf(x):
    return ndtr(x)


def normal_ppf(p):
    return ndtri(p)


@dataclass
class BootstrapResult:
    replicates: np.ndarray
    point: float
    ci_low: float
    ci_high: float
    level: float
    method: str
    n_failed: int = 0

    @property
    def sd(self):
        return float(np.std(self.replicates, ddof=1)) if self.replicates.size > 1 else 0.0

    def to_dict(self, include_replicates=False):
        out = {"point": self.point, "ci_low": self.ci_low, "ci_high": self.ci_high,
               "level": self.level, "method": self.method, "B": int(self.replicates.size),
               "n_failed": self.n_failed, "sd": self.sd}
        if include_replicates:
            out["replicates"] = [float(v) for v in self.replicates]
        return out


def percentile_interval(replicates, level=0.95):
    """Order-statistic interval.

    With ``B`` sorted replicates the endpoints are the
    ``ceil(B (1 - level) / 2)``-th (1-based) and the
    ``floor(B (1 + level) / 2)``-th (0-based) values, which is symmetric in
    rank: for B=100 and level 0.95 this picks ranks 3 and 98.
    """
    level = check_open_unit(level, "level")
    r = np.sort(np.asarray(replicates, dtype=np.float64))
    B = r.size
    if B == 0:
        raise ParameterError("no replicates")
    lo = max(1, math.ceil(B * (1.0 - level) / 2.0 - _IDX_GUARD))
    hi = min(B - 1, math.floor(B * (1.0 + level) / 2.0 + _IDX_GUARD))
    return float(r[lo - 1]), float(r[hi])


def normal_interval(point, replicates, level=0.95):
    level = check_open_unit(level, "level")
    z = float(ndtri(0.5 + level / 2.0))
    sd = float(np.std(replicates, ddof=1))
    return point - z * sd, point + z * sd


def bootstrap(f1_sample, f2_sample, statistic, B=1000, level=0.95, seed=0,
              method="percentile"):
    """Bootstrap a two-sample statistic.

    Each sample is resampled with replacement at its own size.
    ``statistic(X1, X2, split_seed)`` is called on each replicate with a
    split seed drawn from the replicate's stream. Replicates raising a
    library error are dropped; more than 1% failures aborts.
    """
    if B < 100:
        raise ParameterError(f"need at least 100 bootstrap replicates, got {B}")
    check_open_unit(level, "level")
    if method not in ("percentile", "normal"):
        raise ParameterError(f"method must be 'percentile' or 'normal', got {method!r}")
    n1, n2 = f1_sample.shape[0], f2_sample.shape[0]
    point = float(statistic(f1_sample, f2_sample, None))
    reps, failures = [], []
    for b in range(B):
        rng = child_rng(seed, b)
        i1 = rng.integers(0, n1, n1)
        i2 = rng.integers(0, n2, n2)
        split_seed = int(rng.integers(2**31))
        try:
            reps.append(float(statistic(f1_sample[i1], f2_sample[i2], split_seed)))
        except (EnsdivError, FloatingPointError) as exc:
            failures.append((b, str(exc)))
            if len(failures) > MAX_FAILURE_RATE * B:
                raise EstimatorFailureError(
                    f"{len(failures)} of {b + 1} bootstrap replicates failed; "
                    f"first: replicate {failures[0][0]}: {failures[0][1]}") from exc
    reps = np.asarray(reps)
    if method == "percentile":
        lo, hi = percentile_interval(reps, level)
    else:
        lo, hi = normal_interval(point, reps, level)
    return BootstrapResult(reps, point, lo, hi, float(level), method, len(failures))


def bootstrap_estimate(f1_sample, f2_sample, config=None, f="kl_forward", B=1000,
                       level=0.95, method="percentile"):
    """Bootstrap confidence interval for the ensemble estimate.

    The master seed is ``config.seed``; the f2 split is redrawn for every
    replicate.
    """
    config = config or EnsembleConfig()
    f = make_functional(f)
    f1_sample = check_points(f1_sample, "f1_sample")
    f2_sample = check_points(f2_sample, "f2_sample", min_samples=2)
    check_same_dim(f1_sample, f2_sample)

    def stat(X1, X2, split_seed):
        cfg = config if split_seed is None else config.with_seed(split_seed)
        return ensemble_estimate(X1, X2, cfg, f).value

    return bootstrap(f1_sample, f2_sample, stat, B, level, config.seed, method)


@dataclass
class NormalityDiagnostic:
    normalized_values: np.ndarray
    theoretical_quantiles: np.ndarray
    ks_statistic: float

    @property
    def n(self):
        return int(self.normalized_values.size)

    def ks_critical(self, coefficient=1.63):
        """Asymptotic KS critical value ``c / sqrt(n)``; 1.63 is the 0.01 level."""
        return coefficient / math.sqrt(self.n)


def ks_statistic(values, cdf=normal_cdf):
    """Kolmogorov-Smirnov distance between the empirical CDF and ``cdf``."""
    x = np.sort(np.asarray(values, dtype=np.float64))
    n = x.size
    F = cdf(x)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - F), np.max(F - (i - 1) / n)))


def qq_diagnostic(trial_estimates):
    """Standardize, sort and pair with normal quantiles ``ppf((i - 0.5)/n)``."""
    t = np.asarray(trial_estimates, dtype=np.float64).ravel()
    n = t.size
    if n < 20:
        raise ParameterError(f"need at least 20 trials, got {n}")
    sd = np.std(t, ddof=1)
    if not sd > 0 or not np.isfinite(sd):
        raise DegenerateTrialsError("trial estimates have zero variance")
    z = np.sort((t - t.mean()) / sd)
    q = ndtri((np.arange(1, n + 1) - 0.5) / n)
    return NormalityDiagnostic(z, q, ks_statistic(z))


@dataclass
class TwoSampleTestResult:
    statistic: float
    p_value: float
    null_statistics: np.ndarray = field(repr=False)
    n_failed: int = 0

    def to_dict(self):
        return {"statistic": self.statistic, "p_value": self.p_value,
                "B": int(self.null_statistics.size), "n_failed": self.n_failed}


def permutation_p_value(observed, null_statistics):
    null = np.asarray(null_statistics, dtype=np.float64)
    return (1.0 + np.count_nonzero(null >= observed)) / (null.size + 1.0)


def two_sample_test(f1_sample, f2_sample, config=None, f="kl_forward", B=200):
    """Permutation test of ``f1 == f2`` using the divergence estimate.

    The pooled sample is relabeled ``B`` times; the split seed stays fixed
    so observed and permuted statistics are exchangeable under the null.
    """
    config = config or EnsembleConfig()
    f = make_functional(f)
    f1_sample = check_points(f1_sample, "f1_sample")
    f2_sample = check_points(f2_sample, "f2_sample", min_samples=2)
    check_same_dim(f1_sample, f2_sample)
    if B < 1:
        raise ParameterError("B must be positive")
    n1 = f1_sample.shape[0]
    pooled = np.vstack([f1_sample, f2_sample])
    observed = ensemble_estimate(f1_sample, f2_sample, config, f).value
    null, failures = [], 0
    for b in range(B):
        perm = child_rng(config.seed, b).permutation(pooled.shape[0])
        try:
            null.append(ensemble_estimate(pooled[perm[:n1]], pooled[perm[n1:]], config, f).value)
        except EnsdivError as exc:
            failures += 1
            if failures > MAX_FAILURE_RATE * B:
                raise EstimatorFailureError(f"{failures} permutations failed") from exc
    null = np.asarray(null)
    return TwoSampleTestResult(float(observed), float(permutation_p_value(observed, null)),
                               null, failures)
