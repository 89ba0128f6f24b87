"""Input checks shared by the estimators and the functional API."""

import numbers

import numpy as np
from sklearn.utils.validation import check_array

from .exceptions import ParameterError, ShapeError


def check_points(X, name="X", min_samples=1):
    """Return ``X`` as a finite float64 array of shape (n, d).

    A 1-D input is read as n points in one dimension.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    if X.ndim != 2:
        raise ShapeError(f"{name} must be 2-D (n_points, d), got shape {X.shape}")
    try:
        X = check_array(X, dtype=np.float64, ensure_min_samples=min_samples,
                        input_name=name)
    except ValueError as exc:
        raise ShapeError(str(exc)) from exc
    return X


def check_query(query, d):
    q = np.atleast_1d(np.asarray(query, dtype=np.float64))
    if q.ndim != 1 or q.shape[0] != d:
        raise ShapeError(f"query has dimension {q.shape}, reference has d={d}")
    if not np.all(np.isfinite(q)):
        raise ShapeError("query coordinates must be finite")
    return q


def check_same_dim(*arrays):
    dims = {a.shape[1] for a in arrays}
    if len(dims) != 1:
        raise ShapeError(f"samples have mismatched dimensions {sorted(dims)}")
    return dims.pop()


def check_open_unit(value, name):
    if not isinstance(value, numbers.Real) or not 0.0 < value < 1.0:
        raise ParameterError(f"{name} must lie in (0, 1), got {value!r}")
    return float(value)


def check_positive_int(value, name):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral) or value < 1:
        raise ParameterError(f"{name} must be a positive integer, got {value!r}")
    return int(value)
