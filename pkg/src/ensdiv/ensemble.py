"""Optimally weighted ensemble of k-NN plug-in divergence estimates."""

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_open_unit, check_points, check_same_dim
from .divergence import SplitLayout, likelihood_ratios, make_split, split_sizes
from .exceptions import ConfigurationError, NumericError, ParameterError
from .functionals import make_functional
from .weights import WeightSolution, optimal_weights

L_LOW, L_HIGH = 1.5, 3.0


def child_rng(seed, *keys):
    """Generator keyed by ``(seed, *keys)``, independent of call order."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, keys)]))


def default_l_bar(d, m_cap=None, m2=None):
    """``max(d, 5)`` evenly spaced values on [1.5, 3.0].

    When ``m_cap`` and ``m2`` are given, the upper end shrinks so that the
    largest neighbor count ``round(l * sqrt(m2))`` stays within ``m_cap``.
    """
    L = max(int(d), 5)
    hi = L_HIGH
    if m_cap is not None and m2 is not None:
        hi = min(hi, (m_cap - 0.5) / math.sqrt(m2))
        if hi <= 0:
            raise ConfigurationError(f"sample too small for any neighbor count (cap {m_cap})")
    lo = min(L_LOW, hi / 2.0)
    return tuple(float(v) for v in np.linspace(lo, hi, L))


def neighbor_count(l, m2):
    return max(1, int(math.floor(l * math.sqrt(m2) + 0.5)))


@dataclass(frozen=True)
class EnsembleConfig:
    """Everything the ensemble estimator consumes besides the data.

    ``l_bar=None`` picks :func:`default_l_bar` once the sample sizes are
    known. ``seed`` fixes the random split of the f2 sample.
    """

    l_bar: Optional[tuple] = None
    alpha_frac: float = 0.5
    eta: float = 1.0
    seed: int = 0
    weight_mode: str = "relaxed"
    knn_method: str = "auto"

    def __post_init__(self):
        check_open_unit(self.alpha_frac, "alpha_frac")
        if not self.eta > 0:
            raise ParameterError(f"eta must be positive, got {self.eta!r}")
        if self.weight_mode not in ("exact", "relaxed"):
            raise ParameterError(f"weight_mode must be 'exact' or 'relaxed', got {self.weight_mode!r}")
        if self.l_bar is not None:
            l_bar = tuple(float(v) for v in self.l_bar)
            if not l_bar or any(not (v > 0 and math.isfinite(v)) for v in l_bar):
                raise ParameterError("l_bar must be a nonempty list of positive reals")
            if len(set(l_bar)) != len(l_bar):
                raise ParameterError("l_bar values must be distinct")
            object.__setattr__(self, "l_bar", l_bar)

    def resolve(self, d, T, m1):
        """Concrete ``(l_bar, n_eval, m2, ks)`` for the given sample sizes."""
        n_eval, m2 = split_sizes(T, self.alpha_frac)
        cap = min(m1, m2)
        l_bar = self.l_bar if self.l_bar is not None else default_l_bar(d, cap, m2)
        ks = []
        for l in l_bar:
            k = neighbor_count(l, m2)
            if k > cap:
                raise ConfigurationError(
                    f"l={l:g} gives k={k} > min(M1, M2)={cap}; shrink l_bar")
            ks.append(k)
        return l_bar, n_eval, m2, ks

    def to_dict(self):
        return {
            "l_bar": None if self.l_bar is None else list(self.l_bar),
            "alpha_frac": self.alpha_frac,
            "eta": self.eta,
            "seed": self.seed,
            "weight_mode": self.weight_mode,
            "knn_method": self.knn_method,
        }

    def with_seed(self, seed):
        return replace(self, seed=int(seed))


@dataclass
class EnsembleResult:
    """Point estimate with the per-index estimates and weights behind it."""

    value: float
    per_l: np.ndarray
    weights: WeightSolution
    l_bar: tuple
    k: list
    layout: SplitLayout
    functional: object
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "value": self.value,
            "per_l": [float(v) for v in self.per_l],
            "l_bar": list(self.l_bar),
            "k": list(self.k),
            "weights": self.weights.to_dict(),
            "functional": self.functional.to_dict(),
            "n_eval": self.layout.n_eval,
            "m1": self.layout.m1,
            "m2": self.layout.m2,
            "diagnostics": dict(self.diagnostics),
        }


@dataclass
class RatioTable:
    """Estimated likelihood ratios for every ``l``, shared across functionals."""

    ratios: np.ndarray
    weights: WeightSolution
    l_bar: tuple
    k: list
    layout: SplitLayout
    diagnostics: dict

    def estimate(self, f):
        f = make_functional(f)
        values = f.g(self.ratios)
        if not np.all(np.isfinite(values)):
            idx = int(np.argwhere(~np.isfinite(values))[0, 1])
            raise NumericError(f"g is not finite at evaluation point {idx}", index=idx)
        per_l = values.mean(axis=1)
        return EnsembleResult(
            value=float(np.dot(self.weights.w, per_l)), per_l=per_l,
            weights=self.weights, l_bar=self.l_bar, k=self.k, layout=self.layout,
            functional=f, diagnostics=dict(self.diagnostics))

    def power_estimates(self, alphas):
        """Ensemble estimates of ``E[L**alpha]`` for each alpha, and per-l values."""
        alphas = np.asarray(alphas, dtype=np.float64)
        per_l = np.empty((alphas.size, self.ratios.shape[0]))
        for i, a in enumerate(alphas):
            per_l[i] = (self.ratios ** a).mean(axis=1)
        return np.array([float(np.dot(self.weights.w, row)) for row in per_l]), per_l


def ratio_table(f1_sample, f2_sample, config=None, layout=None):
    """Split, choose neighbor counts, solve weights and estimate all ratios."""
    config = config or EnsembleConfig()
    m1, d = f1_sample.shape
    T = f2_sample.shape[0]
    l_bar, _, _, ks = config.resolve(d, T, m1)
    if layout is None:
        layout = make_split(T, m1, config.alpha_frac, config.seed)
    elif layout.T != T or layout.m1 != m1:
        raise ConfigurationError("layout does not match the sample sizes")
    weights = optimal_weights(l_bar, d, T, config.eta, config.weight_mode)
    ratios, diag = likelihood_ratios(
        f1_sample, f2_sample[layout.eval_indices], f2_sample[layout.ref2_indices],
        ks, ks, config.knn_method)
    return RatioTable(ratios, weights, tuple(l_bar), ks, layout, diag)


def ensemble_estimate(f1_sample, f2_sample, config=None, f="kl_forward", layout=None):
    """Weighted ensemble divergence estimate of ``E_{f2}[g(f1/f2)]``.

    The f2 sample is split once (seeded by ``config.seed`` unless ``layout``
    is given); every ``l`` in ``l_bar`` reuses that split with
    ``k(l) = round(l * sqrt(M2))`` neighbors for both density estimates.
    """
    f = make_functional(f)
    f1_sample = check_points(f1_sample, "f1_sample")
    f2_sample = check_points(f2_sample, "f2_sample", min_samples=2)
    check_same_dim(f1_sample, f2_sample)
    return ratio_table(f1_sample, f2_sample, config, layout).estimate(f)


class EnsembleDivergence(BaseEstimator):
    """Weighted ensemble k-NN estimator of an f-divergence.

    Parameters
    ----------
    functional : str
        One of ``kl_forward``, ``kl_reverse``, ``renyi_alpha``,
        ``chernoff_alpha``, ``hellinger``.
    alpha : float, optional
        Exponent for the power functionals.
    l_bar : sequence of float, optional
        Neighborhood indices; ``k(l) = round(l * sqrt(M2))``.
    eta : float
        Budget on the squared weight norm (relaxed weights).
    alpha_frac : float
        Fraction of the f2 sample used as density reference.
    weight_mode : {"relaxed", "exact"}
    random_state : int
        Seed of the f2 split.

    Attributes
    ----------
    divergence_ : float
    estimates_ : ndarray of shape (L,)
        Plug-in estimate for each ``l``.
    weights_ : ndarray of shape (L,)
    k_ : list of int
    result_ : EnsembleResult
    """

    def __init__(self, functional="kl_forward", alpha=None, l_bar=None, eta=1.0,
                 alpha_frac=0.5, weight_mode="relaxed", random_state=0):
        self.functional = functional
        self.alpha = alpha
        self.l_bar = l_bar
        self.eta = eta
        self.alpha_frac = alpha_frac
        self.weight_mode = weight_mode
        self.random_state = random_state

    def _config(self):
        return EnsembleConfig(
            l_bar=None if self.l_bar is None else tuple(self.l_bar),
            alpha_frac=self.alpha_frac, eta=self.eta, seed=self.random_state,
            weight_mode=self.weight_mode)

    def fit(self, X, Y):
        """Estimate the divergence between the laws of ``X`` (f1) and ``Y`` (f2)."""
        X = check_points(X, "X")
        Y = check_points(Y, "Y", min_samples=2)
        self.n_features_in_ = check_same_dim(X, Y)
        f = make_functional(self.functional, self.alpha)
        self.result_ = ensemble_estimate(X, Y, self._config(), f)
        self.divergence_ = self.result_.value
        self.estimates_ = self.result_.per_l
        self.weights_ = self.result_.weights.w
        self.k_ = list(self.result_.k)
        self.l_bar_ = self.result_.l_bar
        return self

    def score(self, X=None, Y=None):
        """The fitted divergence, or a fresh estimate when both samples are given."""
        if X is not None and Y is not None:
            return self.fit(X, Y).divergence_
        check_is_fitted(self, "divergence_")
        return self.divergence_
