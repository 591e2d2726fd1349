import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from krigmeta import kriging, metrics
from krigmeta.errors import AllColumnsConstant, ConstantVector, DimensionMismatch, EmptyInput, TooFewPoints
from krigmeta.kriging import FitConfig
from krigmeta.metrics import Fidelity, denormalize, normalize, pearson_r, rmse


class TestNormalize:
    def test_linear_map(self):
        Z, _ = normalize([[0.0], [5.0], [10.0]])
        assert_allclose(Z[:, 0], [0.0, 0.5, 1.0])

    def test_constant_column_dropped(self):
        X = np.array([[1.0, 7.0, 0.0], [2.0, 7.0, 3.0], [4.0, 7.0, 1.0]])
        with pytest.warns(UserWarning, match="constant"):
            Z, rec = normalize(X)
        assert Z.shape == (3, 2)
        assert rec.kept == (0, 2) and rec.dropped == (1,)

    def test_all_constant(self):
        with pytest.raises(AllColumnsConstant):
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                normalize(np.ones((4, 2)))

    def test_too_few_rows(self):
        with pytest.raises(TooFewPoints):
            normalize([[1.0, 2.0]])

    def test_round_trip(self, rng):
        X = rng.normal(50, 30, size=(20, 4))
        Z, rec = normalize(X)
        assert np.max(np.abs(denormalize(Z, rec) - X)) <= 1e-12 * np.max(np.abs(X))

    def test_extrapolation_warns_without_clamping(self):
        _, rec = normalize([[0.0], [2.0]])
        with pytest.warns(UserWarning, match="outside"):
            Z = rec.transform([[3.0]])
        assert Z[0, 0] == pytest.approx(1.5)

    def test_record_serializes(self, rng):
        _, rec = normalize(rng.random((5, 3)))
        back = metrics.ScalingRecord.from_dict(rec.to_dict())
        assert_allclose(back.col_min, rec.col_min, rtol=0)
        assert back.kept == rec.kept


@settings(max_examples=100, deadline=None)
@given(st.integers(2, 12), st.integers(1, 4), st.integers(0, 2**31))
def test_normalize_attains_bounds(n, k, seed):
    X = np.random.default_rng(seed).normal(size=(n, k))
    Z, _ = normalize(X)
    assert np.all((Z >= 0) & (Z <= 1))
    assert_allclose(Z.min(axis=0), 0.0)
    assert_allclose(Z.max(axis=0), 1.0)


class TestRmse:
    def test_identical(self):
        assert rmse([1.0, 2.0, 3.0], [1.0, 2.0, 3.0]) == 0.0

    def test_unit_offsets(self):
        assert rmse([0.0, 0.0], [1.0, 1.0]) == 1.0

    def test_hand_value(self):
        assert rmse([0.0, 3.0], [4.0, 3.0]) == pytest.approx(math.sqrt(8), abs=1e-15)
        assert rmse([0.0, 3.0], [4.0, 3.0]) == pytest.approx(2.828427, abs=1e-6)

    def test_errors(self):
        with pytest.raises(DimensionMismatch):
            rmse([1.0], [1.0, 2.0])
        with pytest.raises(EmptyInput):
            rmse([], [])


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=20).flatmap(
    lambda a: st.tuples(st.just(a), st.lists(st.floats(-1e3, 1e3), min_size=len(a), max_size=len(a)))))
def test_rmse_symmetric_nonnegative(pair):
    a, b = pair
    assert rmse(a, b) == rmse(b, a)
    assert rmse(a, b) >= 0
    assert (rmse(a, b) == 0) == (a == b)


class TestPearson:
    def test_positive_linear(self, rng):
        a = rng.random(10)
        assert pearson_r(a, 2 * a + 3) == pytest.approx(1.0, abs=1e-12)

    def test_negative(self, rng):
        a = rng.random(10)
        assert pearson_r(a, -a) == pytest.approx(-1.0, abs=1e-12)

    def test_hand_value(self):
        assert pearson_r([1, 2, 3], [1, 3, 2]) == pytest.approx(0.5, abs=1e-15)

    def test_constant(self):
        with pytest.raises(ConstantVector):
            pearson_r([1.0, 1.0, 1.0], [1.0, 2.0, 3.0])

    def test_too_short(self):
        with pytest.raises(TooFewPoints):
            pearson_r([1.0], [2.0])


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**31), st.floats(0.1, 10), st.floats(-5, 5))
def test_pearson_affine(seed, a, b):
    rng = np.random.default_rng(seed)
    x, y = rng.random(8), rng.random(8)
    r = pearson_r(x, y)
    assert pearson_r(a * x + b, y) == pytest.approx(r, abs=1e-10)
    assert pearson_r(-a * x + b, y) == pytest.approx(-r, abs=1e-10)


class TestFidelity:
    def test_cell_format(self):
        assert Fidelity(0.0223, 0.9912).cell() == "0.0223(0.99)"
        assert Fidelity(1.4412, 0.654).cell() == "1.44(0.65)"

    def test_training_data(self):
        rng = np.random.Generator(np.random.Philox(4))
        X = rng.random((20, 2))
        y = np.sin(3 * X[:, 0]) + X[:, 1]
        m = kriging.fit(X, y, FitConfig(seed=0, de_iterations=60))
        fid = metrics.fidelity_report(m, X, y)
        assert fid.rmse <= 1e-6 * np.ptp(y)
        assert fid.r >= 0.999999
        assert fid.units == "model response units"
