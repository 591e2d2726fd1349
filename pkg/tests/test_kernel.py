import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from krigmeta import kernel as kern
from krigmeta.errors import DimensionMismatch, NotPositiveDefinite
from krigmeta.kernel import KernelParams
from krigmeta.linalg import cholesky
from oracles import gauss_corr


def test_params_defaults_to_p2():
    params = KernelParams([0.5, 3.0])
    assert np.all(params.p == 2.0)


@pytest.mark.parametrize("theta,p", [([0.0], None), ([-1.0], None), ([1.0], [0.0]), ([1.0], [2.5])])
def test_params_validation(theta, p):
    with pytest.raises(ValueError):
        KernelParams(theta, p)


class TestCorrelate:
    def test_zero_distance(self):
        params = KernelParams([3.0, 0.1], [1.5, 2.0])
        assert kern.correlate([0.2, 0.7], [0.2, 0.7], params) == 1.0

    def test_one_dim(self):
        assert kern.correlate([0.0], [1.0], KernelParams([1.0])) == pytest.approx(math.exp(-1), abs=1e-15)

    def test_two_dim(self):
        val = kern.correlate([0.0, 0.0], [1.0, 1.0], KernelParams([2.0, 0.5]))
        assert val == pytest.approx(math.exp(-2.5), abs=1e-15)
        assert val == pytest.approx(0.0820850, abs=1e-7)

    def test_general_exponent(self):
        params = KernelParams([1.3, 0.4], [1.0, 1.7])
        xi, xj = [0.1, 0.9], [0.6, 0.2]
        assert kern.correlate(xi, xj, params) == pytest.approx(gauss_corr(xi, xj, [1.3, 0.4], [1.0, 1.7]),
                                                               rel=1e-14)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            kern.correlate([0.0, 1.0], [0.0], KernelParams([1.0, 1.0]))
        with pytest.raises(DimensionMismatch):
            kern.correlate([0.0], [1.0], KernelParams([1.0, 1.0]))


vec3 = st.lists(st.floats(0, 1), min_size=3, max_size=3)
theta3 = st.lists(st.floats(1e-4, 1e2), min_size=3, max_size=3)


@settings(max_examples=200, deadline=None)
@given(vec3, vec3, theta3, st.lists(st.floats(0.1, 2.0), min_size=3, max_size=3))
def test_symmetry(a, b, theta, p):
    params = KernelParams(theta, p)
    assert kern.correlate(a, b, params) == kern.correlate(b, a, params)


@settings(max_examples=200, deadline=None)
@given(st.floats(0.01, 0.5), st.floats(0.01, 0.5), st.floats(1e-2, 10.0), st.sampled_from([1.0, 1.5, 2.0]))
def test_monotone_in_distance(h, dh, theta, p):
    params = KernelParams([theta], [p])
    near = kern.correlate([0.0], [h], params)
    far = kern.correlate([0.0], [h + dh], params)
    assert far < near


@settings(max_examples=200, deadline=None)
@given(st.floats(0.05, 1.0), st.floats(1e-2, 5.0), st.floats(1.01, 3.0))
def test_monotone_in_theta(h, theta, factor):
    low = kern.correlate([0.0, 0.3], [h, 0.3], KernelParams([theta, 1.0]))
    high = kern.correlate([0.0, 0.3], [h, 0.3], KernelParams([theta * factor, 1.0]))
    assert high < low


class TestBuildMatrix:
    def test_duplicate_rows(self):
        X = np.array([[0.3, 0.4], [0.3, 0.4], [0.9, 0.1]])
        C = kern.build_matrix(X, KernelParams([1.0, 1.0]), 0.0)
        assert C.psi[0, 1] == 1.0
        with pytest.raises(NotPositiveDefinite):
            cholesky(C.psi)

    def test_two_points(self):
        C = kern.build_matrix([[0.0], [1.0]], KernelParams([1.0]), 0.0)
        e = math.exp(-1)
        assert_allclose(C.psi, [[1.0, e], [e, 1.0]], rtol=1e-15)

    def test_nugget_diagonal(self, rng):
        X = rng.random((7, 3))
        C = kern.build_matrix(X, KernelParams([1.0, 2.0, 3.0]), 1e-10)
        assert np.all(np.diag(C.psi) == 1.0 + 1e-10)
        assert C.nugget == 1e-10

    def test_matches_pairwise_oracle(self, rng):
        X = rng.random((9, 3))
        theta, p = [0.7, 5.0, 0.01], [2.0, 1.3, 0.8]
        C = kern.build_matrix(X, KernelParams(theta, p), 0.0)
        for i in range(9):
            for j in range(9):
                assert C.psi[i, j] == pytest.approx(gauss_corr(X[i], X[j], theta, p), rel=1e-13)

    def test_exact_symmetry_and_range(self, rng):
        X = rng.random((12, 4))
        psi = kern.build_matrix(X, KernelParams([0.2, 1.0, 8.0, 40.0]), 0.0).psi
        assert np.array_equal(psi, psi.T)
        off = psi[~np.eye(12, dtype=bool)]
        assert np.all(off > 0) and np.all(off <= 1)


class TestBuildVector:
    def test_training_row_gives_one(self, rng):
        X = rng.random((5, 2))
        r = kern.build_vector(X, X[3], KernelParams([2.0, 2.0]))
        assert r[3] == 1.0

    def test_midpoint(self):
        r = kern.build_vector([[0.0], [1.0]], [0.5], KernelParams([1.0]))
        assert_allclose(r, [math.exp(-0.25)] * 2, rtol=1e-15)

    def test_far_point(self):
        r = kern.build_vector([[0.0], [1.0]], [1.5], KernelParams([100.0]))
        assert np.all(r < 1e-6)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            kern.build_vector(np.zeros((3, 2)), [0.0, 0.0, 0.0], KernelParams([1.0, 1.0]))

    def test_cross_agrees_with_vector(self, rng):
        X, Xs = rng.random((6, 2)), rng.random((4, 2))
        params = KernelParams([3.0, 0.5])
        R = kern.build_cross(X, Xs, params)
        for j in range(4):
            assert_allclose(R[:, j], kern.build_vector(X, Xs[j], params), rtol=1e-15)
