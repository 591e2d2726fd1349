"""Synthetic GLM experiment: data generation, IRLS logistic regression, HDE probe.

The generator draws equicorrelated Gaussian features and binary labels
from a logistic model with five linear terms and the ``x2*x3``
interaction. The interaction is exposed as its own design column so both
the logistic fit and the Kriging surrogate see the same feature space.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Set, Tuple

import numpy as np
from scipy.special import expit

from .errors import DimensionMismatch, InvalidSpec, NotPositiveDefinite, OneClassOnly, SingularInformation
from .interpret import ImportanceReport
from .linalg import cholesky, solve_chol

DEFAULT_COEFFS = (1.0, -1.0, 0.8, -0.8, 0.5, 1.2)
_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class SynthGlmSpec:
    n: int = 1000
    coeffs: Tuple[float, ...] = DEFAULT_COEFFS
    intercept: float = 0.0
    feature_corr: float = 0.2
    noise_features: int = 4
    seed: int = 0

    def __post_init__(self):
        if self.n < 10:
            raise InvalidSpec(f"n must be at least 10, got {self.n}")
        if len(self.coeffs) != 6:
            raise InvalidSpec("six coefficients are required (five linear terms and x2*x3)")
        if not 0 <= self.feature_corr < 1:
            raise InvalidSpec("feature_corr must lie in [0, 1)")
        if self.noise_features < 0:
            raise InvalidSpec("noise_features must be non-negative")
        object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))

    def describe(self) -> dict:
        return {"n": self.n, "coeffs": list(self.coeffs), "intercept": self.intercept,
                "feature_corr": self.feature_corr, "noise_features": self.noise_features, "seed": self.seed}


@dataclass(frozen=True)
class Dataset:
    """Design matrix with labels, true linear predictor and success probabilities.

    Columns are ``x1..x5``, ``x2x3`` and then the inert noise features.
    """

    X: np.ndarray
    y: np.ndarray
    eta: np.ndarray
    prob: np.ndarray
    names: List[str]
    true_active: Set[int]


def generate_synth_glm(spec: SynthGlmSpec) -> Dataset:
    rng = np.random.Generator(np.random.Philox(spec.seed))
    rho = spec.feature_corr
    z0 = rng.standard_normal((spec.n, 1))
    zj = rng.standard_normal((spec.n, 5))
    base = math.sqrt(rho) * z0 + math.sqrt(1.0 - rho) * zj
    inter = (base[:, 1] * base[:, 2])[:, None]
    noise = rng.standard_normal((spec.n, spec.noise_features))
    X = np.hstack([base, inter, noise])
    beta = np.concatenate([spec.coeffs, np.zeros(spec.noise_features)])
    eta = spec.intercept + X @ beta
    prob = expit(eta)
    y = (rng.random(spec.n) < prob).astype(float)
    names = [f"x{j}" for j in range(1, 6)] + ["x2x3"] + [f"noise{j}" for j in range(1, spec.noise_features + 1)]
    active = {j for j, c in enumerate(spec.coeffs) if c != 0}
    return Dataset(X, y, eta, prob, names, active)


@dataclass
class GlmFit:
    beta: np.ndarray
    std_err: np.ndarray
    wald_z: np.ndarray
    converged: bool
    iterations: int
    separation_flag: bool
    hde_flags: np.ndarray
    log_likelihood: float = float("nan")


def _fitted(eta: np.ndarray) -> np.ndarray:
    # probabilities kept within [eps, 1 - eps] so weights never vanish
    return np.clip(expit(eta), _EPS, 1 - _EPS)


def _loglik(eta: np.ndarray, y: np.ndarray) -> float:
    # log(1 + e^eta) computed stably
    return float(np.sum(y * eta - np.logaddexp(0.0, eta)))


def logistic_fit(X, y, max_iters: int = 100, tol: float = 1e-8) -> GlmFit:
    """Logistic regression by iteratively reweighted least squares.

    An intercept column is prepended. Each Newton step is halved until the
    log-likelihood does not decrease. Separation is flagged when a
    coefficient exceeds 1e3 in magnitude or, if the iteration fails to
    converge, when a fitted probability is within 1e-8 of 0 or 1.

    Raises
    ------
    OneClassOnly
        If `y` does not contain both classes.
    SingularInformation
        If the weighted information matrix cannot be factored.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    y = np.asarray(y, dtype=float).ravel()
    if X.shape[0] != y.size:
        raise DimensionMismatch("X and y lengths differ")
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("y must be binary")
    if y.min() == y.max():
        raise OneClassOnly("both classes must be present")
    A = np.hstack([np.ones((X.shape[0], 1)), X])
    beta = np.zeros(A.shape[1])
    eta = A @ beta
    ll = _loglik(eta, y)
    converged = False
    blowup = False
    it = 0
    for it in range(1, max_iters + 1):
        mu = _fitted(eta)
        w = mu * (1 - mu)
        info = A.T @ (A * w[:, None])
        try:
            F = cholesky(info)
        except NotPositiveDefinite as exc:
            if it == 1:
                raise SingularInformation("information matrix is singular; features may be collinear") from exc
            break
        step = solve_chol(F, A.T @ (y - mu))
        t = 1.0
        while True:
            cand = beta + t * step
            eta_c = A @ cand
            ll_c = _loglik(eta_c, y)
            if ll_c >= ll or t < 1e-10:
                break
            t *= 0.5
        if ll_c < ll:
            break
        delta = np.max(np.abs(cand - beta))
        beta, eta, ll = cand, eta_c, ll_c
        if np.max(np.abs(beta)) > 1e3:
            blowup = True
        if delta <= tol:
            converged = True
            break

    mu = _fitted(eta)
    w = mu * (1 - mu)
    info = A.T @ (A * w[:, None])
    try:
        cov_diag = np.diag(solve_chol(cholesky(info), np.eye(beta.size)))
        std_err = np.sqrt(np.where(cov_diag > 0, cov_diag, np.inf))
    except NotPositiveDefinite:
        std_err = np.full(beta.size, np.inf)
    with np.errstate(divide="ignore", invalid="ignore"):
        wald = np.where(np.isfinite(std_err) & (std_err > 0), beta / std_err, 0.0)
    p_hat = expit(eta)
    saturated = bool(np.any((p_hat < 1e-8) | (p_hat > 1 - 1e-8)))
    separation = blowup or (not converged and saturated)
    # a huge coefficient with a small Wald statistic is the HDE signature
    hde = separation & (np.abs(beta) > 10) & (np.abs(wald) < 2)
    return GlmFit(beta, std_err, wald, converged, it, bool(separation), np.asarray(hde), ll)


@dataclass
class HdeTrace:
    coefficient: int
    scales: List[float]
    wald_z: List[float]
    lr_stat: List[float]
    hde: Optional[bool]

    @property
    def points(self) -> List[Tuple[float, float]]:
        return list(zip(self.scales, self.wald_z))


def is_non_monotone(values: Sequence[float], rel_tol: float = 1e-3) -> bool:
    """True when the sequence rises to a peak and then falls below it."""
    v = np.asarray(values, dtype=float)
    if v.size < 2:
        return False
    peak = int(np.argmax(v))
    if peak == v.size - 1:
        return False
    rose = peak > 0 and v[peak] > v[0] * (1 + rel_tol)
    return bool(rose and np.min(v[peak:]) < v[peak] * (1 - rel_tol))


def detect_hde(X, y, coefficient_index: int, scale_grid: Sequence[float],
               max_iters: int = 100, tol: float = 1e-8) -> HdeTrace:
    """Refit while pushing feature `coefficient_index` toward separation.

    For every scale ``s`` the rows of class 1 have ``s/2`` added to the
    feature and the rows of class 0 have ``s/2`` subtracted, which widens
    the gap between the class-conditional means by ``s``. The trace holds
    ``|z|`` for that coefficient and, as an independent monotonicity
    reference, the likelihood-ratio statistic for dropping the feature.

    ``hde`` is None when the grid has fewer than two points.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    j = int(coefficient_index)
    if not 0 <= j < X.shape[1]:
        raise DimensionMismatch(f"coefficient index {j} out of range")
    grid = [float(s) for s in scale_grid]
    if any(s <= 0 for s in grid) or any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("scale_grid must be increasing and positive")
    reduced = logistic_fit(np.delete(X, j, axis=1), y, max_iters, tol).log_likelihood
    sign = 2.0 * y - 1.0
    zs, lrs = [], []
    for s in grid:
        Xs = X.copy()
        Xs[:, j] += 0.5 * s * sign
        f = logistic_fit(Xs, y, max_iters, tol)
        zs.append(float(abs(f.wald_z[j + 1])))
        lrs.append(2.0 * (f.log_likelihood - reduced))
    hde = is_non_monotone(zs) if len(grid) >= 2 else None
    return HdeTrace(j, grid, zs, lrs, hde)


@dataclass
class ComparisonSummary:
    kriging_order: List[int]
    glm_order: List[int]
    kriging_ranks: dict
    glm_ranks: dict
    kriging_hit_rate: Optional[float]
    glm_hit_rate: Optional[float]
    note: str = ""

    def to_dict(self) -> dict:
        return {
            "kriging_order": self.kriging_order,
            "glm_order": self.glm_order,
            "kriging_ranks": {str(k): v for k, v in self.kriging_ranks.items()},
            "glm_ranks": {str(k): v for k, v in self.glm_ranks.items()},
            "kriging_hit_rate": self.kriging_hit_rate,
            "glm_hit_rate": self.glm_hit_rate,
            "note": self.note,
        }


def glm_order(glm: GlmFit) -> List[int]:
    """Features sorted by decreasing ``|z|``, intercept excluded, ties by index."""
    z = np.abs(np.nan_to_num(glm.wald_z[1:], nan=0.0))
    return [int(j) for j in np.argsort(-z, kind="stable")]


def _hit_rate(order: List[int], active: Set[int]) -> float:
    m = len(active)
    return len(set(order[:m]) & active) / m


def compare_importance(kriging_report: ImportanceReport, glm_fit: GlmFit, true_active) -> ComparisonSummary:
    """Rank positions (1-based) of the true active features under each method.

    The hit rate is the share of true active features found among the
    top ``m`` of each ranking, ``m`` being the number of active features.
    """
    k_order = kriging_report.order
    g_order = glm_order(glm_fit)
    if len(k_order) != len(g_order):
        raise DimensionMismatch(f"kriging ranks {len(k_order)} features, glm {len(g_order)}")
    active = set(int(a) for a in true_active)
    if any(a < 0 or a >= len(k_order) for a in active):
        raise DimensionMismatch("true_active index outside the feature range")
    k_ranks = {a: k_order.index(a) + 1 for a in sorted(active)}
    g_ranks = {a: g_order.index(a) + 1 for a in sorted(active)}
    if not active:
        return ComparisonSummary(k_order, g_order, {}, {}, None, None, "no ground truth")
    return ComparisonSummary(k_order, g_order, k_ranks, g_ranks, _hit_rate(k_order, active),
                             _hit_rate(g_order, active))


DEFAULT_GRID = (0.1, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0)


def run_validation(spec: SynthGlmSpec, config=None, kriging_n: int = 100, target: str = "eta",
                   hde_feature: int = 0, grid: Sequence[float] = DEFAULT_GRID) -> dict:
    """Fit the Kriging surrogate and logistic regression to one synthetic draw.

    The surrogate is fitted to the true GLM function on the first
    `kriging_n` rows: the linear predictor (``target="eta"``) or the
    success probability (``target="prob"``). Logistic regression sees all
    rows and the binary labels.
    """
    from .interpret import feature_importance
    from .surrogate import fit_surrogate

    if target not in ("eta", "prob"):
        raise InvalidSpec(f"unknown surrogate target {target!r}")
    data = generate_synth_glm(spec)
    m = min(kriging_n, spec.n)
    response = data.eta if target == "eta" else data.prob
    sur = fit_surrogate(data.X[:m], response[:m], data.names, config, target=target)
    report = feature_importance(sur.model, sur.used_features)
    glm = logistic_fit(data.X, data.y)
    summary = compare_importance(report, glm, data.true_active)
    trace = detect_hde(data.X, data.y, hde_feature, grid)
    return {
        "spec": spec.describe(),
        "feature_names": data.names,
        "true_active": sorted(data.true_active),
        "kriging": {
            "rows": m,
            "target": target,
            "theta": sur.model.params.theta.tolist(),
            "log_likelihood": sur.model.log_likelihood,
        },
        "logistic": {
            "beta": glm.beta.tolist(),
            "std_err": glm.std_err.tolist(),
            "wald_z": glm.wald_z.tolist(),
            "converged": glm.converged,
            "separation_flag": glm.separation_flag,
            "significant_at_1.96": int(np.sum(np.abs(glm.wald_z[1:]) > 1.96)),
        },
        "comparison": summary.to_dict(),
        "hde": {
            "feature": data.names[hde_feature],
            "scales": trace.scales,
            "abs_wald_z": trace.wald_z,
            "lr_stat": trace.lr_stat,
            "declared": trace.hde,
        },
    }
