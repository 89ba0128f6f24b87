"""Exact k-nearest-neighbor distances and k-NN density estimates.

Distances are Euclidean. Brute force over all reference points is the
definition; a KD-tree is used only to shortlist candidates, whose distances
are then recomputed with the same arithmetic as the brute-force path, so
both routes return bit-identical values.

The public operations perform no self-exclusion: a query that is also a
member of the reference set sees itself at distance 0.
"""

import math
import warnings
from typing import NamedTuple

import numpy as np
from scipy.spatial import cKDTree

from ._validation import check_points, check_query
from .exceptions import (
    DegenerateGeometryWarning,
    InsufficientNeighborsError,
    InvalidDimensionError,
)

RHO_FLOOR = 1e-12

# relative gap between tree and canonical distances treated as "surely larger"
_TREE_SLACK = 1e-9
_BRUTE_CHUNK = 4_000_000


class KnnQueryResult(NamedTuple):
    rho: float
    k: int


def unit_ball_volume(d):
    """Lebesgue volume of the Euclidean unit ball in ``d`` dimensions."""
    if isinstance(d, bool) or int(d) != d or d < 1:
        raise InvalidDimensionError(f"dimension must be a positive integer, got {d!r}")
    d = int(d)
    if d <= 300:
        return math.pi ** (d / 2) / math.gamma(d / 2 + 1)
    return math.exp(d / 2 * math.log(math.pi) - math.lgamma(d / 2 + 1))


def _distances(queries, points):
    """Euclidean distances with a fixed summation order.

    ``queries`` and ``points`` broadcast against each other on all but the
    last axis. Coordinates are accumulated left to right so the result does
    not depend on array layout.
    """
    diff = queries[..., 0] - points[..., 0]
    acc = diff * diff
    for j in range(1, queries.shape[-1]):
        diff = queries[..., j] - points[..., j]
        acc = acc + diff * diff
    return np.sqrt(acc)


def _brute_sorted(queries, reference, kmax):
    nq, d = queries.shape
    m = reference.shape[0]
    out = np.empty((nq, kmax))
    step = max(1, _BRUTE_CHUNK // max(1, m * d))
    for start in range(0, nq, step):
        block = queries[start:start + step]
        dist = _distances(block[:, None, :], reference[None, :, :])
        if kmax < m:
            dist = np.partition(dist, kmax - 1, axis=1)[:, :kmax]
        dist.sort(axis=1)
        out[start:start + step] = dist
    return out


def sorted_knn_distances(queries, reference, kmax, method="auto", workers=1):
    """Sorted distances from each query to its ``kmax`` nearest references.

    Returns an array of shape (n_queries, kmax) whose column ``k - 1`` holds
    the k-th nearest-neighbor distance.

    ``method`` is ``"brute"``, ``"tree"`` or ``"auto"``. The tree route
    falls back to brute force for any query whose shortlist cannot be
    certified complete (ties at the boundary, duplicated points).
    """
    queries = np.asarray(queries, dtype=np.float64)
    reference = np.asarray(reference, dtype=np.float64)
    m = reference.shape[0]
    if kmax < 1 or kmax > m:
        raise InsufficientNeighborsError(
            f"k={kmax} neighbors requested from a reference set of {m} points")
    if method == "auto":
        method = "tree" if m * queries.shape[0] > 20_000 else "brute"
    if method == "brute":
        return _brute_sorted(queries, reference, kmax)
    if method != "tree":
        raise ValueError(f"unknown method {method!r}")

    kq = min(m, kmax + max(2, kmax // 8))
    tree = cKDTree(reference)
    tree_dist, idx = tree.query(queries, k=kq, workers=workers)
    tree_dist = tree_dist.reshape(queries.shape[0], kq)
    idx = idx.reshape(queries.shape[0], kq)
    dist = _distances(queries[:, None, :], reference[idx])
    dist.sort(axis=1)
    dist = dist[:, :kmax]
    if kq == m:
        return dist
    # every reference outside the shortlist is at least tree_dist[:, -1] away
    bad = ~(dist[:, -1] < tree_dist[:, -1] * (1.0 - _TREE_SLACK))
    if np.any(bad):
        dist[bad] = _brute_sorted(queries[bad], reference, kmax)
    return dist


def knn_distance(query, reference, k):
    """Distance from ``query`` to its ``k``-th nearest point in ``reference``."""
    reference = check_points(reference, "reference")
    q = check_query(query, reference.shape[1])
    m = reference.shape[0]
    if k < 1 or k > m:
        raise InsufficientNeighborsError(
            f"k={k} neighbors requested from a reference set of {m} points")
    rho = _brute_sorted(q[None, :], reference, k)[0, k - 1]
    return KnnQueryResult(float(rho), int(k))


def density_from_distances(rho, k, m, d):
    """Vectorized ``k / (m * c_d * rho**d)`` with the radius floor applied.

    Returns ``(density, n_clamped)``.
    """
    rho = np.asarray(rho, dtype=np.float64)
    low = rho < RHO_FLOOR
    n_clamped = int(np.count_nonzero(low))
    if n_clamped:
        rho = np.where(low, RHO_FLOOR, rho)
    return k / (m * unit_ball_volume(d) * rho ** d), n_clamped


def knn_density(query, reference, k):
    """k-NN density estimate at ``query``.

    A radius below ``RHO_FLOOR`` (e.g. a query sitting on ``k`` duplicate
    reference points) is clamped and a ``DegenerateGeometryWarning`` is
    issued.
    """
    reference = check_points(reference, "reference")
    m, d = reference.shape
    result = knn_distance(query, reference, k)
    value, n_clamped = density_from_distances(result.rho, k, m, d)
    if n_clamped:
        warnings.warn(f"k-NN radius {result.rho!r} clamped to {RHO_FLOOR}",
                      DegenerateGeometryWarning, stacklevel=2)
    return float(value)
