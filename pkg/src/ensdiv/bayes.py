"""Chernoff-coefficient bounds on the Bayes error, and a QDA baseline.

For two classes with priors ``w1, w2`` and densities ``f1, f2`` the Bayes
error is at most ``w1**a * w2**(1-a) * c_a`` for every ``a`` in (0, 1),
where ``c_a = E_{f2}[(f1/f2)**a]`` is the Chernoff coefficient. The
coefficient is estimated on a grid of ``a`` with the ensemble estimator and
the smallest value is used.
"""

import csv
import hashlib
from dataclasses import dataclass, field
from importlib import resources

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.model_selection import StratifiedKFold
from sklearn.utils.validation import check_is_fitted, check_X_y

from ._validation import check_open_unit, check_points, check_same_dim
from .divergence import split_sizes
from .ensemble import EnsembleConfig, neighbor_count, ratio_table
from .exceptions import ConfigurationError, ModelError, ParameterError
from .inference import bootstrap

COEFF_CLAMP = 1.0 + 1e-6
# index set for small classes (<= SMALL_CLASS points), e.g. 50-per-class tables
SMALL_CLASS_L_BAR = (1.0, 1.5, 2.0, 2.5, 3.0)
SMALL_CLASS = 100
IRIS_SHA256 = "c963159b401f3a844673a6dec6dac21a3c6448f92773975b36b572d1f9a5965d"


def default_alpha_grid():
    return np.round(np.arange(1, 100) / 100.0, 2)


@dataclass
class ChernoffSweep:
    alphas: np.ndarray
    coefficients: np.ndarray
    raw_coefficients: np.ndarray
    alpha_star: float
    c_star: float

    def to_dict(self):
        return {"alphas": [float(a) for a in self.alphas],
                "coefficients": [float(c) for c in self.coefficients],
                "raw_coefficients": [float(c) for c in self.raw_coefficients],
                "alpha_star": self.alpha_star, "c_star": self.c_star}


def chernoff_sweep(f1_sample, f2_sample, config=None, grid=None):
    """Ensemble estimates of ``c_a`` over ``grid``, clamped to [0, 1 + 1e-6].

    One split and one set of neighbor distances serve every grid point.
    """
    f1_sample = check_points(f1_sample, "f1_sample")
    f2_sample = check_points(f2_sample, "f2_sample", min_samples=2)
    check_same_dim(f1_sample, f2_sample)
    alphas = default_alpha_grid() if grid is None else np.asarray(grid, dtype=np.float64).ravel()
    if alphas.size == 0 or np.any(alphas <= 0) or np.any(alphas >= 1):
        raise ParameterError("alpha grid must be nonempty and strictly inside (0, 1)")
    table = ratio_table(f1_sample, f2_sample, config or EnsembleConfig())
    raw, _ = table.power_estimates(alphas)
    coeff = np.clip(raw, 0.0, COEFF_CLAMP)
    i = int(np.argmin(coeff))
    return ChernoffSweep(alphas, coeff, raw, float(alphas[i]), float(coeff[i]))


@dataclass
class BayesBoundReport:
    w1: float
    w2: float
    bound: float
    alpha_star: float
    c_star: float
    ci: tuple = None
    class_pair: tuple = None
    bootstrap: object = field(default=None, repr=False)

    def to_dict(self):
        out = {"class_pair": None if self.class_pair is None else list(self.class_pair),
               "w1": self.w1, "w2": self.w2, "bound": self.bound,
               "alpha_star": self.alpha_star, "c_star": self.c_star,
               "ci": None if self.ci is None else list(self.ci)}
        if self.bootstrap is not None:
            out["bootstrap"] = self.bootstrap.to_dict()
        return out


def bayes_error_bound(sweep, w1=0.5):
    """``w1**a* (1 - w1)**(1 - a*) c*``, floored at 0."""
    w1 = check_open_unit(w1, "w1")
    w2 = 1.0 - w1
    a = sweep.alpha_star
    bound = max(0.0, w1 ** a * w2 ** (1.0 - a) * sweep.c_star)
    return BayesBoundReport(w1, w2, float(bound), a, sweep.c_star)


def bootstrap_bayes_bound(f1_sample, f2_sample, config=None, grid=None, w1=0.5,
                          B=1000, level=0.95, method="percentile"):
    """Bound on the original samples plus a bootstrap interval for it."""
    config = config or EnsembleConfig()
    f1_sample = check_points(f1_sample, "f1_sample")
    f2_sample = check_points(f2_sample, "f2_sample", min_samples=2)

    def stat(X1, X2, split_seed):
        cfg = config if split_seed is None else config.with_seed(split_seed)
        return bayes_error_bound(chernoff_sweep(X1, X2, cfg, grid), w1).bound

    boot = bootstrap(f1_sample, f2_sample, stat, B, level, config.seed, method)
    report = bayes_error_bound(chernoff_sweep(f1_sample, f2_sample, config, grid), w1)
    report.ci = (boot.ci_low, boot.ci_high)
    report.bootstrap = boot
    return report


def pair_config(n1, n2, l_bar=None, **kwargs):
    """Ensemble config for a class pair; small classes get ``SMALL_CLASS_L_BAR``.

    Values whose neighbor count would exceed the smaller reference set are
    dropped from the fallback.
    """
    if l_bar is None and min(n1, n2) <= SMALL_CLASS:
        cfg = EnsembleConfig(**kwargs)
        _, m2 = split_sizes(n2, cfg.alpha_frac)
        cap = min(n1, m2)
        l_bar = tuple(l for l in SMALL_CLASS_L_BAR if neighbor_count(l, m2) <= cap) or None
    return EnsembleConfig(l_bar=None if l_bar is None else tuple(l_bar), **kwargs)


def minmax_scale(*samples):
    """Map the pooled samples into [0, 1]^d per feature."""
    pooled = np.vstack(samples)
    lo, hi = pooled.min(axis=0), pooled.max(axis=0)
    span = np.where(hi > lo, hi - lo, 1.0)
    return tuple((s - lo) / span for s in samples)


class ChernoffBayesBound(BaseEstimator):
    """Upper bound on the two-class Bayes error from labeled data.

    ``fit(X, y)`` takes exactly two classes; ``classes`` fixes which one is
    class 1 (density f1). Features are min-max scaled to the unit cube over
    the pooled pair when ``scale="minmax"``.
    """

    def __init__(self, classes=None, priors="empirical", alphas=None, l_bar=None, eta=1.0,
                 alpha_frac=0.5, weight_mode="relaxed", scale="minmax", n_bootstraps=0,
                 level=0.95, random_state=0):
        self.classes = classes
        self.priors = priors
        self.alphas = alphas
        self.l_bar = l_bar
        self.eta = eta
        self.alpha_frac = alpha_frac
        self.weight_mode = weight_mode
        self.scale = scale
        self.n_bootstraps = n_bootstraps
        self.level = level
        self.random_state = random_state

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=np.float64)
        classes = list(np.unique(y)) if self.classes is None else list(self.classes)
        if len(classes) != 2:
            raise ConfigurationError(f"need exactly two classes, got {classes}")
        X1, X2 = X[y == classes[0]], X[y == classes[1]]
        if X1.shape[0] == 0 or X2.shape[0] == 0:
            raise ConfigurationError(f"class labels {classes} not both present in y")
        if self.scale == "minmax":
            X1, X2 = minmax_scale(X1, X2)
        elif self.scale is not None:
            raise ParameterError(f"scale must be 'minmax' or None, got {self.scale!r}")
        w1 = X1.shape[0] / (X1.shape[0] + X2.shape[0]) if self.priors == "empirical" else self.priors
        config = pair_config(X1.shape[0], X2.shape[0], self.l_bar, alpha_frac=self.alpha_frac,
                             eta=self.eta, seed=self.random_state, weight_mode=self.weight_mode)
        if self.n_bootstraps:
            report = bootstrap_bayes_bound(X1, X2, config, self.alphas, w1,
                                           self.n_bootstraps, self.level)
        else:
            report = bayes_error_bound(chernoff_sweep(X1, X2, config, self.alphas), w1)
        report.class_pair = tuple(classes)
        self.classes_ = np.asarray(classes)
        self.report_ = report
        self.bound_ = report.bound
        self.alpha_star_ = report.alpha_star
        self.c_star_ = report.c_star
        self.ci_ = report.ci
        return self


class QuadraticDiscriminant(ClassifierMixin, BaseEstimator):
    """Gaussian class-conditional classifier with a small ridge.

    Each class covariance gets ``ridge * trace(S)/d`` added to its diagonal.
    """

    def __init__(self, ridge=1e-6):
        self.ridge = ridge

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=np.float64)
        self.classes_ = np.unique(y)
        d = X.shape[1]
        self.means_, self.chol_, self.logdet_, self.log_priors_ = [], [], [], []
        for c in self.classes_:
            Xc = X[y == c]
            if Xc.shape[0] < 2:
                raise ModelError(f"class {c!r} has fewer than 2 training points")
            S = np.cov(Xc, rowvar=False).reshape(d, d)
            S = S + np.eye(d) * self.ridge * np.trace(S) / d
            try:
                Lc = np.linalg.cholesky(S)
            except np.linalg.LinAlgError as exc:
                raise ModelError(f"covariance of class {c!r} is singular") from exc
            self.means_.append(Xc.mean(axis=0))
            self.chol_.append(Lc)
            self.logdet_.append(2.0 * np.log(np.diag(Lc)).sum())
            self.log_priors_.append(np.log(Xc.shape[0] / X.shape[0]))
        self.n_features_in_ = d
        return self

    def decision_function(self, X):
        check_is_fitted(self, "classes_")
        X = check_points(X, "X")
        scores = np.empty((X.shape[0], self.classes_.size))
        for j in range(self.classes_.size):
            z = np.linalg.solve(self.chol_[j], (X - self.means_[j]).T)
            scores[:, j] = self.log_priors_[j] - 0.5 * self.logdet_[j] - 0.5 * (z * z).sum(axis=0)
        return scores

    def predict(self, X):
        return self.classes_[np.argmax(self.decision_function(X), axis=1)]


def qda_cv_error(X, y, folds=5, seed=0, ridge=1e-6):
    """Pooled misclassification rate of QDA under stratified k-fold CV."""
    X, y = check_X_y(X, y, dtype=np.float64)
    if folds < 2:
        raise ParameterError("folds must be at least 2")
    _, counts = np.unique(y, return_counts=True)
    if counts.min() < folds:
        raise ConfigurationError(f"every class needs at least {folds} points")
    errors = 0
    for train, test in StratifiedKFold(folds, shuffle=True, random_state=seed).split(X, y):
        model = QuadraticDiscriminant(ridge).fit(X[train], y[train])
        errors += int(np.count_nonzero(model.predict(X[test]) != y[test]))
    return errors / X.shape[0]


def read_labeled_csv(path):
    """Headerless CSV, numeric features then a string label per row."""
    rows, labels = [], []
    with open(path, newline="") as fh:
        width = None
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if width is None:
                width = len(row)
            if len(row) != width:
                raise ConfigurationError(f"row {lineno}: expected {width} columns, got {len(row)}")
            try:
                rows.append([float(v) for v in row[:-1]])
            except ValueError as exc:
                raise ConfigurationError(f"row {lineno}: {exc}") from exc
            labels.append(row[-1].strip())
    if not rows:
        raise ConfigurationError(f"{path}: no data rows")
    return np.asarray(rows), np.asarray(labels)


def iris_path():
    return resources.files("ensdiv") / "data" / "iris.csv"


def load_iris(verify=True):
    """The bundled Iris table as ``(X, y)`` with string labels."""
    path = iris_path()
    if verify:
        digest = hashlib.sha256(path.read_bytes()).hexdigest()
        if digest != IRIS_SHA256:
            raise ConfigurationError(f"iris.csv checksum mismatch: {digest}")
    with resources.as_file(path) as p:
        return read_labeled_csv(p)
