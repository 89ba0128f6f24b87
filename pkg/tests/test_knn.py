import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ensdiv.exceptions import (
    DegenerateGeometryWarning,
    InsufficientNeighborsError,
    InvalidDimensionError,
    ShapeError,
)
from ensdiv.knn import (
    RHO_FLOOR,
    density_from_distances,
    knn_density,
    knn_distance,
    sorted_knn_distances,
    unit_ball_volume,
)


def scalar_sorted_distances(q, ref):
    out = []
    for p in ref:
        s = 0.0
        for a, b in zip(q, p):
            s += (a - b) * (a - b)
        out.append(math.sqrt(s))
    return sorted(out)


@pytest.mark.parametrize("d,expected", [(1, 2.0), (2, math.pi), (3, 4 * math.pi / 3),
                                        (4, math.pi ** 2 / 2)])
def test_unit_ball_volume_closed_forms(d, expected):
    assert unit_ball_volume(d) == pytest.approx(expected, rel=1e-14)


def test_unit_ball_volume_high_dimension_is_finite_and_tiny():
    v = unit_ball_volume(400)
    assert 0.0 < v < 1e-200
    assert math.log(v) == pytest.approx(200 * math.log(math.pi) - math.lgamma(201), rel=1e-12)


@pytest.mark.parametrize("d", [0, -1, 2.5, True])
def test_unit_ball_volume_rejects_bad_dimension(d):
    with pytest.raises(InvalidDimensionError):
        unit_ball_volume(d)


def test_knn_distance_on_a_line():
    ref = np.array([[0.0], [1.0], [3.0]])
    assert knn_distance([0.5], ref, 1).rho == 0.5
    assert knn_distance([0.5], ref, 2).rho == 0.5
    assert knn_distance([0.5], ref, 3).rho == 2.5


def test_knn_distance_errors():
    ref = np.zeros((3, 2))
    with pytest.raises(InsufficientNeighborsError):
        knn_distance([0.0, 0.0], ref, 4)
    with pytest.raises(InsufficientNeighborsError):
        knn_distance([0.0, 0.0], ref, 0)
    with pytest.raises(ShapeError):
        knn_distance([0.0, 0.0, 0.0], ref, 1)


@pytest.mark.parametrize("method", ["brute", "tree"])
def test_sorted_distances_match_scalar_oracle(method, rng):
    for d in (1, 2, 5):
        ref = rng.random((40, d))
        qs = rng.random((7, d))
        got = sorted_knn_distances(qs, ref, 40, method=method)
        for q, row in zip(qs, got):
            assert row.tolist() == scalar_sorted_distances(q, ref)


def test_tree_handles_duplicates_and_ties(rng):
    ref = np.repeat(rng.integers(0, 3, (20, 2)).astype(float), 5, axis=0)
    qs = rng.integers(0, 3, (30, 2)).astype(float)
    for k in (1, 5, 17, 60):
        assert np.array_equal(sorted_knn_distances(qs, ref, k, "tree"),
                              sorted_knn_distances(qs, ref, k, "brute"))


def test_unknown_method_rejected():
    with pytest.raises(ValueError):
        sorted_knn_distances(np.zeros((1, 1)), np.zeros((2, 1)), 1, method="ball")


def test_density_formula_term_by_term():
    ref = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 2.0], [3.0, 3.0]])
    q = np.array([0.1, 0.1])
    rho = scalar_sorted_distances(q, ref)[1]
    expected = 2 / (4 * math.pi * rho ** 2)
    assert knn_density(q, ref, 2) == pytest.approx(expected, rel=1e-14)


def test_density_clamps_zero_radius_with_warning():
    ref = np.zeros((3, 2))
    with pytest.warns(DegenerateGeometryWarning):
        value = knn_density([0.0, 0.0], ref, 2)
    assert value == pytest.approx(2 / (3 * math.pi * RHO_FLOOR ** 2))
    dens, n = density_from_distances(np.array([0.0, 1.0]), 1, 1, 1)
    assert n == 1 and dens[1] == pytest.approx(0.5, rel=1e-15)


def test_no_warning_for_regular_geometry():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        knn_density([0.5], [[0.0], [1.0]], 1)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 4), st.integers(2, 30), st.integers(0, 2**32 - 1))
def test_distances_sorted_and_nondecreasing_in_k(d, m, seed):
    g = np.random.default_rng(seed)
    ref = g.random((m, d))
    q = g.random((3, d))
    rho = sorted_knn_distances(q, ref, m, "tree")
    assert np.all(np.diff(rho, axis=1) >= 0)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 4), st.integers(0, 2**32 - 1), st.integers(-8, 8))
def test_translation_invariance_on_dyadic_grid(d, seed, shift):
    # coordinates and shifts are small dyadic rationals, so x + s is exact
    g = np.random.default_rng(seed)
    ref = g.integers(0, 64, (25, d)) / 64.0
    q = g.integers(0, 64, (4, d)) / 64.0
    k = int(g.integers(1, 26))
    a = sorted_knn_distances(q, ref, k, "tree")
    b = sorted_knn_distances(q + shift, ref + shift, k, "tree")
    assert np.array_equal(a, b)


def test_reference_order_does_not_matter(rng):
    ref = rng.random((50, 3))
    q = rng.random(3)
    perm = rng.permutation(50)
    for k in (1, 7, 50):
        assert knn_distance(q, ref, k).rho == knn_distance(q, ref[perm], k).rho


@pytest.mark.parametrize("s", [0.25, 2.0, 8.0])
def test_dilation_scales_density_by_power_of_s(s, rng):
    ref = rng.random((40, 3))
    q = rng.random(3)
    assert knn_density(q * s, ref * s, 5) == knn_density(q, ref, 5) * s ** -3
