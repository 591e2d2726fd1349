import math

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from krigmeta import baseline
from krigmeta.baseline import (DEFAULT_GRID, SynthGlmSpec, compare_importance, detect_hde, generate_synth_glm,
                               logistic_fit)
from krigmeta.errors import DimensionMismatch, InvalidSpec, OneClassOnly, SingularInformation
from krigmeta.interpret import rank_thetas
from oracles import gradient_ascent_logistic


class TestGenerator:
    def test_fair_coin(self):
        spec = SynthGlmSpec(n=4000, coeffs=(0.0,) * 6, seed=1)
        d = generate_synth_glm(spec)
        assert abs(d.y.mean() - 0.5) <= 3 / math.sqrt(spec.n)
        assert d.true_active == set()

    def test_strong_link(self):
        d = generate_synth_glm(SynthGlmSpec(n=5000, coeffs=(10.0, 0, 0, 0, 0, 0), seed=2))
        assert d.y[d.X[:, 0] > 1].mean() > 0.95

    def test_deterministic(self):
        a = generate_synth_glm(SynthGlmSpec(n=50, seed=9))
        b = generate_synth_glm(SynthGlmSpec(n=50, seed=9))
        assert_array_equal(a.X, b.X)
        assert_array_equal(a.y, b.y)

    def test_layout(self):
        d = generate_synth_glm(SynthGlmSpec(n=20, noise_features=3))
        assert d.names == ["x1", "x2", "x3", "x4", "x5", "x2x3", "noise1", "noise2", "noise3"]
        assert_allclose(d.X[:, 5], d.X[:, 1] * d.X[:, 2])
        assert d.true_active == set(range(6))

    def test_feature_correlation(self):
        n = 20000
        d = generate_synth_glm(SynthGlmSpec(n=n, feature_corr=0.4, seed=3))
        C = np.corrcoef(d.X[:, :5], rowvar=False)
        target = np.full((5, 5), 0.4)
        np.fill_diagonal(target, 1.0)
        assert np.max(np.abs(C - target)) <= 5 / math.sqrt(n)

    @pytest.mark.parametrize("kw", [{"n": 5}, {"feature_corr": 1.0}, {"coeffs": (1.0, 2.0)},
                                    {"noise_features": -1}])
    def test_invalid(self, kw):
        with pytest.raises(InvalidSpec):
            SynthGlmSpec(**kw)


class TestLogisticFit:
    def test_symmetric_intercept(self):
        f = logistic_fit([-1.0, 1.0, -1.0, 1.0, -1.0, 1.0], [0, 1, 0, 1, 1, 0])
        assert abs(f.beta[0]) <= 1e-6
        assert f.converged

    def test_separation(self):
        x = np.array([-2.0, -1.5, -1.0, -0.5, 0.5, 1.0, 1.5, 2.0])
        f = logistic_fit(x, (x > 0).astype(float))
        assert f.separation_flag

    def test_one_class(self):
        with pytest.raises(OneClassOnly):
            logistic_fit([[0.0], [1.0]], [1.0, 1.0])

    def test_collinear(self, rng):
        x = rng.standard_normal(30)
        with pytest.raises(SingularInformation):
            logistic_fit(np.column_stack([x, 2 * x]), (rng.random(30) < 0.5).astype(float))

    def test_consistency(self):
        spec = SynthGlmSpec(n=5000, noise_features=0, seed=4)
        d = generate_synth_glm(spec)
        f = logistic_fit(d.X, d.y)
        assert f.converged and not f.separation_flag
        within = np.abs(f.beta[1:] - np.array(spec.coeffs)) <= 3 * f.std_err[1:]
        assert within.sum() >= 5

    def test_matches_gradient_ascent(self):
        d = generate_synth_glm(SynthGlmSpec(n=400, coeffs=(0.6, -0.4, 0.3, 0, 0, 0.2), noise_features=1,
                                            seed=5))
        f = logistic_fit(d.X, d.y, tol=1e-12)
        ref = gradient_ascent_logistic(d.X, d.y)
        assert_allclose(f.beta, ref, atol=1e-5)

    def test_log_likelihood_non_decreasing(self):
        d = generate_synth_glm(SynthGlmSpec(n=300, seed=6))
        lls = [logistic_fit(d.X, d.y, max_iters=i).log_likelihood for i in range(1, 9)]
        assert all(b >= a for a, b in zip(lls, lls[1:]))

    def test_wald_is_ratio(self):
        d = generate_synth_glm(SynthGlmSpec(n=300, seed=7))
        f = logistic_fit(d.X, d.y)
        assert_allclose(f.wald_z, f.beta / f.std_err)


class TestHde:
    def test_single_point_grid(self):
        d = generate_synth_glm(SynthGlmSpec(n=100, seed=1))
        tr = detect_hde(d.X, d.y, 0, [1.0])
        assert len(tr.points) == 1 and tr.hde is None

    def test_inert_feature(self):
        d = generate_synth_glm(SynthGlmSpec(n=300, seed=2))
        tr = detect_hde(d.X, d.y, 7, [0.001, 0.002, 0.004])
        assert max(tr.wald_z) < 3 and tr.hde is False

    def test_strong_feature(self):
        d = generate_synth_glm(SynthGlmSpec(n=300, seed=3))
        tr = detect_hde(d.X, d.y, 0, DEFAULT_GRID)
        assert tr.hde
        # the likelihood-ratio statistic keeps rising while |z| falls
        assert all(b >= a - 1e-6 for a, b in zip(tr.lr_stat, tr.lr_stat[1:]))

    def test_grid_validation(self):
        d = generate_synth_glm(SynthGlmSpec(n=50))
        with pytest.raises(ValueError):
            detect_hde(d.X, d.y, 0, [1.0, 0.5])
        with pytest.raises(DimensionMismatch):
            detect_hde(d.X, d.y, 99, [1.0])

    def test_non_monotone_rule(self):
        assert baseline.is_non_monotone([1.0, 3.0, 2.0])
        assert not baseline.is_non_monotone([1.0, 2.0, 3.0])
        assert not baseline.is_non_monotone([3.0, 2.0, 1.0])


def quasi_separated(seed):
    # x1 decides y except where it is zero; the other columns are inert
    rng = np.random.Generator(np.random.Philox(seed))
    n = 120
    x1 = rng.choice([-1.0, 0.0, 1.0], n)
    y = np.where(x1 > 0, 1.0, np.where(x1 < 0, 0.0, (rng.random(n) < 0.5) * 1.0))
    return np.column_stack([x1, rng.standard_normal((n, 3))]), y


class TestCompare:
    def test_perfect_kriging(self):
        rep = rank_thetas([5.0, 4.0, 1e-4, 1e-4], list("abcd"), (1e-4, 1e2))
        glm = logistic_fit(*quasi_separated(0))
        s = compare_importance(rep, glm, {0, 1})
        assert s.kriging_hit_rate == 1.0
        assert s.kriging_ranks == {0: 1, 1: 2}

    def test_quasi_separation_demotes_active(self):
        X, y = quasi_separated(0)
        glm = logistic_fit(X, y)
        assert glm.separation_flag
        assert abs(glm.wald_z[1]) < 0.1
        rep = rank_thetas([1.0, 0.5, 0.2, 0.1], list("abcd"), (1e-4, 1e2))
        s = compare_importance(rep, glm, {0})
        assert s.glm_ranks[0] == 4
        assert s.glm_hit_rate == 0.0

    def test_no_ground_truth(self):
        rep = rank_thetas([1.0, 2.0, 3.0, 4.0], list("abcd"), (1e-4, 1e2))
        s = compare_importance(rep, logistic_fit(*quasi_separated(1)), set())
        assert s.kriging_hit_rate is None and s.glm_hit_rate is None
        assert s.note == "no ground truth"

    def test_mismatch(self):
        rep = rank_thetas([1.0, 2.0], list("ab"), (1e-4, 1e2))
        with pytest.raises(DimensionMismatch):
            compare_importance(rep, logistic_fit(*quasi_separated(1)), {0})


def test_run_validation_report():
    out = baseline.run_validation(SynthGlmSpec(n=150, seed=0), kriging_n=40, grid=(0.5, 1.0))
    assert out["spec"]["coeffs"] == list(baseline.DEFAULT_COEFFS)
    assert set(out) >= {"kriging", "logistic", "comparison", "hde"}
    assert len(out["kriging"]["theta"]) == 10
