"""Plug-in divergence estimates built from two k-NN density estimates.

The f2 sample is split into evaluation points and reference points. At each
evaluation point the likelihood ratio is estimated as the k-NN density of the
f1 sample over the k-NN density of the f2 reference split, and ``g`` of that
ratio is averaged over the evaluation points.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ._validation import check_open_unit, check_points, check_same_dim
from .exceptions import ConfigurationError, InsufficientNeighborsError, NumericError
from .functionals import make_functional
from .knn import density_from_distances, sorted_knn_distances

RATIO_MIN = 1e-12
RATIO_MAX = 1e12


@dataclass(frozen=True)
class SplitLayout:
    """Partition of the f2 sample into evaluation and reference indices."""

    eval_indices: np.ndarray
    ref2_indices: np.ndarray
    m1: int

    def __post_init__(self):
        ev = np.asarray(self.eval_indices, dtype=np.intp)
        rf = np.asarray(self.ref2_indices, dtype=np.intp)
        object.__setattr__(self, "eval_indices", ev)
        object.__setattr__(self, "ref2_indices", rf)
        if ev.size == 0:
            raise ConfigurationError("empty evaluation split")
        if rf.size == 0:
            raise ConfigurationError("empty f2 reference split")
        if self.m1 < 1:
            raise ConfigurationError("f1 sample is empty")
        both = np.concatenate([ev, rf])
        if np.unique(both).size != both.size or both.min() < 0 or both.max() != both.size - 1:
            raise ConfigurationError("evaluation and reference indices must partition 0..T-1")

    @property
    def n_eval(self):
        return int(self.eval_indices.size)

    @property
    def m2(self):
        return int(self.ref2_indices.size)

    @property
    def T(self):
        return self.n_eval + self.m2


def split_sizes(T, alpha_frac):
    """``(N, M2)`` with ``M2 = round(alpha_frac * T)``, both at least 1."""
    alpha_frac = check_open_unit(alpha_frac, "alpha_frac")
    if T < 2:
        raise ConfigurationError(f"the f2 sample needs at least 2 points, got {T}")
    m2 = min(max(int(round(alpha_frac * T)), 1), T - 1)
    return T - m2, m2


def make_split(T, m1, alpha_frac=0.5, seed=0):
    """Random split of ``range(T)``; deterministic for a given seed."""
    n, m2 = split_sizes(T, alpha_frac)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    perm = rng.permutation(T)
    return SplitLayout(np.sort(perm[:n]), np.sort(perm[n:]), m1)


@dataclass
class PlugInEstimate:
    value: float
    k1: int
    k2: int
    per_point_ratios: Optional[np.ndarray] = None
    diagnostics: dict = field(default_factory=dict)


def likelihood_ratios(f1_sample, eval_points, ref2, ks1, ks2, method="auto", workers=1):
    """Estimated ratios ``f1/f2`` at every evaluation point for each (k1, k2).

    Returns ``(ratios, diagnostics)`` where ``ratios`` has shape
    ``(len(ks1), n_eval)``. Nearest-neighbor distances are computed once at
    the largest k and shared by all rows.
    """
    ks1 = [int(k) for k in ks1]
    ks2 = [int(k) for k in ks2]
    m1, d = f1_sample.shape
    m2 = ref2.shape[0]
    if max(ks1) > m1 or min(ks1) < 1:
        raise InsufficientNeighborsError(f"k1 values {ks1} must lie in [1, {m1}]")
    if max(ks2) > m2 or min(ks2) < 1:
        raise InsufficientNeighborsError(f"k2 values {ks2} must lie in [1, {m2}]")
    rho1 = sorted_knn_distances(eval_points, f1_sample, max(ks1), method, workers)
    rho2 = sorted_knn_distances(eval_points, ref2, max(ks2), method, workers)

    ratios = np.empty((len(ks1), eval_points.shape[0]))
    n_rho = 0
    for row, (k1, k2) in enumerate(zip(ks1, ks2)):
        dens1, c1 = density_from_distances(rho1[:, k1 - 1], k1, m1, d)
        dens2, c2 = density_from_distances(rho2[:, k2 - 1], k2, m2, d)
        n_rho += c1 + c2
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            ratios[row] = dens1 / dens2
    bad = np.isnan(ratios)
    if np.any(bad):
        _, idx = np.argwhere(bad)[0]
        raise NumericError(f"non-finite likelihood ratio at evaluation point {idx}", index=int(idx))
    outside = (ratios < RATIO_MIN) | (ratios > RATIO_MAX)
    n_ratio = int(np.count_nonzero(outside))
    if n_ratio:
        np.clip(ratios, RATIO_MIN, RATIO_MAX, out=ratios)
    return ratios, {"rho_clamped": n_rho, "ratio_clamped": n_ratio}


def plug_in_estimate(f1_sample, f2_sample, layout, k1, k2, f="kl_forward",
                     keep_ratios=False, method="auto"):
    """Mean of ``g(f1_hat / f2_hat)`` over the evaluation split."""
    f = make_functional(f)
    f1_sample = check_points(f1_sample, "f1_sample")
    f2_sample = check_points(f2_sample, "f2_sample")
    check_same_dim(f1_sample, f2_sample)
    if layout.T != f2_sample.shape[0] or layout.m1 != f1_sample.shape[0]:
        raise ConfigurationError("layout does not match the sample sizes")
    ratios, diag = likelihood_ratios(
        f1_sample, f2_sample[layout.eval_indices], f2_sample[layout.ref2_indices],
        [k1], [k2], method)
    values = f.g(ratios[0])
    if not np.all(np.isfinite(values)):
        idx = int(np.flatnonzero(~np.isfinite(values))[0])
        raise NumericError(f"g is not finite at evaluation point {idx}", index=idx)
    return PlugInEstimate(
        value=float(np.mean(values)), k1=int(k1), k2=int(k2),
        per_point_ratios=ratios[0].copy() if keep_ratios else None,
        diagnostics=diag)
