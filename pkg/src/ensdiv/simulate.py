"""Truncated Gaussians on the unit cube and Monte Carlo experiment harnesses.

Isotropic Gaussians restricted to ``[0, 1]^d`` factor into independent 1-D
truncated normals, so KL divergences and Chernoff coefficients between two
of them reduce to sums and products of 1-D integrals. Those are the truth
oracles here; they never call the estimator under test.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate
from scipy.special import ndtr

from ._validation import check_positive_int
from .ensemble import EnsembleConfig, child_rng, ensemble_estimate
from .exceptions import ParameterError, PathologicalSpecError
from .functionals import make_functional
from .inference import qq_diagnostic

RNG_ALGORITHM = "numpy.PCG64/standard_normal(ziggurat)"
_PROBE = 4096
_MIN_ACCEPT = 1e-4


@dataclass(frozen=True)
class TruncatedGaussianSpec:
    """Isotropic normal restricted and renormalized to the unit cube.

    ``sigma`` is the diagonal covariance entry when ``sigma_is_variance`` is
    true (covariance ``sigma * I``), otherwise the standard deviation.
    """

    mu: tuple
    sigma: float
    sigma_is_variance: bool = True

    def __post_init__(self):
        mu = tuple(float(v) for v in np.atleast_1d(self.mu))
        if not mu or not all(math.isfinite(v) for v in mu):
            raise PathologicalSpecError("mu must be a nonempty finite vector")
        if not (self.sigma > 0 and math.isfinite(self.sigma)):
            raise PathologicalSpecError(f"sigma must be positive, got {self.sigma!r}")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", float(self.sigma))

    @classmethod
    def isotropic(cls, d, mu, sigma, sigma_is_variance=True):
        return cls((float(mu),) * int(d), sigma, sigma_is_variance)

    @property
    def d(self):
        return len(self.mu)

    @property
    def scale(self):
        return math.sqrt(self.sigma) if self.sigma_is_variance else self.sigma

    def marginal_mass(self):
        """Per-coordinate probability of landing in [0, 1] before truncation."""
        mu = np.asarray(self.mu)
        return ndtr((1.0 - mu) / self.scale) - ndtr(-mu / self.scale)

    def marginal_pdf(self, j):
        mu, s = self.mu[j], self.scale
        z = float(ndtr((1.0 - mu) / s) - ndtr(-mu / s))
        norm = s * math.sqrt(2.0 * math.pi) * z

        def pdf(x):
            return math.exp(-0.5 * ((x - mu) / s) ** 2) / norm

        return pdf

    def pdf(self, X):
        """Joint density at the rows of ``X`` (zero outside the cube)."""
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        mu, s = np.asarray(self.mu), self.scale
        logz = np.log(self.marginal_mass()).sum()
        quad = (((X - mu) / s) ** 2).sum(axis=1)
        logp = -0.5 * quad - self.d * math.log(s * math.sqrt(2 * math.pi)) - logz
        inside = np.all((X >= 0.0) & (X <= 1.0), axis=1)
        return np.where(inside, np.exp(logp), 0.0)

    def to_dict(self):
        return {"mu": list(self.mu), "sigma": self.sigma,
                "sigma_is_variance": self.sigma_is_variance}


def sample_truncated_gaussian(spec, n, seed=0):
    """``n`` i.i.d. draws by rejection from the untruncated normal."""
    n = check_positive_int(n, "n")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    mu = np.asarray(spec.mu)
    d, s = spec.d, spec.scale

    def draw(size):
        z = rng.standard_normal((size, d)) * s + mu
        return z[np.all((z >= 0.0) & (z <= 1.0), axis=1)]

    first = draw(_PROBE)
    rate = first.shape[0] / _PROBE
    if rate < _MIN_ACCEPT:
        raise PathologicalSpecError(
            f"acceptance rate {rate:.2e} below {_MIN_ACCEPT:g}; the cube holds almost no mass")
    chunks, have = [first], first.shape[0]
    while have < n:
        size = int(math.ceil((n - have) / rate * 1.1)) + 16
        batch = draw(size)
        chunks.append(batch)
        have += batch.shape[0]
    return np.concatenate(chunks)[:n]


def _quad(fun, tol=1e-12):
    return integrate.quad(fun, 0.0, 1.0, epsabs=tol, epsrel=tol, limit=200)[0]


def truncated_gaussian_kl(spec1, spec2):
    """KL(f1 || f2) by 1-D quadrature per coordinate."""
    if spec1.d != spec2.d:
        raise ParameterError("specs have different dimensions")
    total = 0.0
    for j in range(spec1.d):
        p, q = spec1.marginal_pdf(j), spec2.marginal_pdf(j)
        total += _quad(lambda x: p(x) * (math.log(p(x)) - math.log(q(x))))
    return total


def truncated_gaussian_chernoff(spec1, spec2, alpha):
    """Chernoff coefficient ``int f1**alpha f2**(1-alpha)`` by 1-D quadrature."""
    if spec1.d != spec2.d:
        raise ParameterError("specs have different dimensions")
    out = 1.0
    for j in range(spec1.d):
        p, q = spec1.marginal_pdf(j), spec2.marginal_pdf(j)
        out *= _quad(lambda x: p(x) ** alpha * q(x) ** (1.0 - alpha))
    return out


def truth_value(spec1, spec2, f):
    f = make_functional(f)
    if f.name == "kl_forward":
        return truncated_gaussian_kl(spec1, spec2)
    if f.name == "kl_reverse":
        return truncated_gaussian_kl(spec2, spec1)
    return truncated_gaussian_chernoff(spec1, spec2, f.alpha)


def _run(fn, items, n_jobs):
    if n_jobs is None or n_jobs <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=n_jobs) as pool:
        return list(pool.map(fn, items))


def default_estimator(X1, X2, config, f):
    return ensemble_estimate(X1, X2, config, f).value


@dataclass
class TrialBatch:
    estimates: np.ndarray
    config: dict
    seeds: list = field(default_factory=list)

    def to_dict(self):
        return {"estimates": [float(v) for v in self.estimates],
                "config": self.config, "seeds": self.seeds}


def run_trials(spec1, spec2, T, n_trials, config=None, f="kl_forward", seed=0,
               estimator=None, n_jobs=1, key=()):
    """Independent end-to-end estimates on fresh samples.

    Trial ``i`` draws its samples and split from streams keyed by
    ``(seed, *key, i)``, so results do not depend on ``n_jobs``.
    """
    config = config or EnsembleConfig()
    f = make_functional(f)
    estimator = estimator or default_estimator

    def one(i):
        X1 = sample_truncated_gaussian(spec1, T, child_rng(seed, *key, i, 0))
        X2 = sample_truncated_gaussian(spec2, T, child_rng(seed, *key, i, 1))
        split_seed = int(child_rng(seed, *key, i, 2).integers(2**31))
        return float(estimator(X1, X2, config.with_seed(split_seed), f))

    estimates = np.array(_run(one, range(n_trials), n_jobs))
    snapshot = {"spec1": spec1.to_dict(), "spec2": spec2.to_dict(), "T": int(T),
                "functional": f.to_dict(), "ensemble": config.to_dict(),
                "rng": RNG_ALGORITHM}
    return TrialBatch(estimates, snapshot, [[int(seed), *key, i] for i in range(n_trials)])


def clt_experiment(spec1, spec2, T_per_density, n_trials, config=None, f="kl_forward",
                   seed=0, estimator=None, n_jobs=1):
    """Repeated estimates and their normality diagnostic."""
    if n_trials < 20:
        raise ParameterError(f"need at least 20 trials, got {n_trials}")
    batch = run_trials(spec1, spec2, T_per_density, n_trials, config, f, seed,
                       estimator, n_jobs)
    return batch, qq_diagnostic(batch.estimates)


@dataclass
class MseSweepResult:
    T: list
    mse: list
    slope: float
    slope_defined: bool
    truth: float
    batches: list = field(default_factory=list, repr=False)

    def to_dict(self):
        return {"T": list(self.T), "mse": [float(v) for v in self.mse],
                "slope": None if not self.slope_defined else float(self.slope),
                "slope_defined": self.slope_defined, "truth": float(self.truth)}


def loglog_slope(T_list, mse):
    """OLS slope of ``log(mse)`` on ``log(T)``; ``nan`` if any MSE is zero."""
    mse = np.asarray(mse, dtype=np.float64)
    if np.any(mse <= 0) or not np.all(np.isfinite(mse)):
        return float("nan")
    x = np.log(np.asarray(T_list, dtype=np.float64))
    y = np.log(mse)
    xc = x - x.mean()
    return float(xc @ (y - y.mean()) / (xc @ xc))


def mse_sweep(spec1, spec2, T_list, trials_per_T, truth, config=None, f="kl_forward",
              seed=0, estimator=None, n_jobs=1):
    """Empirical MSE against an externally supplied truth for each T."""
    T_list = [int(t) for t in T_list]
    if len(T_list) < 4 or any(b <= a for a, b in zip(T_list, T_list[1:])):
        raise ParameterError("T_list must be strictly increasing with at least 4 entries")
    mse, batches = [], []
    for j, T in enumerate(T_list):
        batch = run_trials(spec1, spec2, T, trials_per_T, config, f, seed,
                           estimator, n_jobs, key=(j,))
        batches.append(batch)
        mse.append(float(np.mean((batch.estimates - truth) ** 2)))
    slope = loglog_slope(T_list, mse)
    return MseSweepResult(T_list, mse, slope, bool(np.isfinite(slope)), float(truth), batches)
