"""Ordinary Kriging: concentrated likelihood, fitting and prediction.

The model is ``Y(x) = mu + Z(x)`` with a constant mean and a stationary
Gaussian process ``Z`` whose correlation is the Gaussian product kernel.
For fixed kernel parameters the mean and process variance have closed
forms, so only ``theta`` (and optionally ``p``) is searched numerically.
"""
from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from . import kernel as kern
from .errors import (DegenerateResponse, DimensionMismatch, InvalidConfig, NonFiniteInput,
                     NotPositiveDefinite, TooFewPoints)
from .kernel import KernelParams
from .linalg import CholeskyFactor, cholesky, log_det, solve_chol
from .optim import Bounds, OptimResult, bounded_quasi_newton, differential_evolution, finite_diff_grad

logger = logging.getLogger(__name__)

P_BOUNDS = (0.1, 2.0)


class Optimizer(str, enum.Enum):
    DE = "de"
    QN = "lbfgsb"
    BOTH = "both"


@dataclass(frozen=True)
class FitConfig:
    """Settings for maximum-likelihood fitting.

    ``de_population`` of ``None`` means ten members per searched dimension.
    """

    optimizer: Optimizer = Optimizer.DE
    theta_bounds: Tuple[float, float] = (kern.THETA_LO, kern.THETA_HI)
    nugget: float = 1e-10
    nugget_max: float = 1e-4
    de_population: Optional[int] = None
    de_iterations: int = 200
    qn_restarts: int = 5
    qn_iterations: int = 200
    seed: int = 0
    optimize_p: bool = False
    de_mutation: float = 0.8
    de_crossover: float = 0.9
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "optimizer", Optimizer(self.optimizer))
        lo, hi = self.theta_bounds
        if not (0 < lo < hi):
            raise InvalidConfig(f"invalid theta bounds {self.theta_bounds}")
        if not (0 <= self.nugget <= self.nugget_max):
            raise InvalidConfig("need 0 <= nugget <= nugget_max")
        if self.de_population is not None and self.de_population < 4:
            raise InvalidConfig("de_population must be at least 4")
        if self.de_iterations < 1 or self.qn_restarts < 1 or self.qn_iterations < 1:
            raise InvalidConfig("iteration counts must be positive")


@dataclass(frozen=True)
class Likelihood:
    log_likelihood: float
    mu_hat: float
    sigma2_hat: float
    chol: CholeskyFactor
    nugget: float


@dataclass(frozen=True)
class KrigingModel:
    X: np.ndarray
    y: np.ndarray
    params: KernelParams
    mu_hat: float
    sigma2_hat: float
    chol: CholeskyFactor
    alpha: np.ndarray
    nugget: float
    log_likelihood: float
    theta_bounds: Tuple[float, float] = (kern.THETA_LO, kern.THETA_HI)
    # Psi^-1 1 and 1^T Psi^-1 1, needed by the variance formula
    psi_inv_one: np.ndarray = field(default=None, repr=False)
    one_psi_inv_one: float = field(default=None, repr=False)
    fit_info: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def k(self) -> int:
        return self.X.shape[1]


def _likelihood_from_psi(psi: np.ndarray, y: np.ndarray, nugget: float) -> Likelihood:
    n = y.size
    F = cholesky(psi)
    one = np.ones(n)
    pi_one = solve_chol(F, one)
    pi_y = solve_chol(F, y)
    mu = float(one @ pi_y) / float(one @ pi_one)
    r = y - mu
    sigma2 = float(r @ solve_chol(F, r)) / n
    if not sigma2 > 0:
        raise DegenerateResponse("estimated process variance is zero")
    logl = -0.5 * n * math.log(sigma2) - 0.5 * log_det(F)
    return Likelihood(logl, mu, sigma2, F, nugget)


def _check_data(X, y) -> Tuple[np.ndarray, np.ndarray]:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[0] != y.size:
        raise DimensionMismatch(f"X has {X.shape[0]} rows, y has {y.size} entries")
    if y.size < 2:
        raise TooFewPoints("need at least two observations")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise NonFiniteInput("X and y must be finite")
    if np.ptp(y) == 0:
        raise DegenerateResponse("response is constant")
    return X, y


def concentrated_log_likelihood(X, y, params: KernelParams, nugget: float = 0.0) -> Likelihood:
    """Concentrated log-likelihood at fixed kernel parameters.

    Returns the log-likelihood ``-(n/2) ln sigma2 - (1/2) ln|Psi|`` with
    the generalized-least-squares mean ``mu`` and the variance ``sigma2``
    plugged in, all from one factorization of ``Psi + nugget*I``.
    """
    X, y = _check_data(X, y)
    psi = kern.build_matrix(X, params, nugget).psi
    return _likelihood_from_psi(psi, y, nugget)


def _escalating(psi_fn, y, nugget: float, nugget_max: float) -> Likelihood:
    # multiply the nugget by 10 after every failed factorization
    while True:
        try:
            return _likelihood_from_psi(psi_fn(nugget), y, nugget)
        except NotPositiveDefinite:
            if nugget >= nugget_max:
                raise
            nugget = min(max(nugget * 10.0, 1e-12), nugget_max)


def likelihood_with_escalation(X, y, params: KernelParams, config: FitConfig) -> Likelihood:
    X, y = _check_data(X, y)
    return _escalating(lambda g: kern.build_matrix(X, params, g).psi, y, config.nugget, config.nugget_max)


class _Objective:
    """Log-likelihood as a function of the search vector.

    The search vector holds ``log10(theta)`` followed, when ``p`` is
    searched, by the exponents themselves.
    """

    def __init__(self, X, y, config: FitConfig):
        self.X, self.y, self.config = X, y, config
        self.n, self.k = X.shape
        if not config.optimize_p:
            self.D = kern.pairwise_distances(X, np.full(self.k, 2.0))

    def params(self, z) -> KernelParams:
        z = np.asarray(z, dtype=float)
        theta = 10.0 ** z[: self.k]
        p = z[self.k:] if self.config.optimize_p else None
        return KernelParams(theta, p)

    def likelihood(self, z) -> Likelihood:
        params = self.params(z)
        if self.config.optimize_p:
            D = kern.pairwise_distances(self.X, params.p)
        else:
            D = self.D
        return _escalating(lambda g: kern.matrix_from_distances(D, self.n, params.theta, g),
                           self.y, self.config.nugget, self.config.nugget_max)

    def __call__(self, z) -> float:
        try:
            return self.likelihood(z).log_likelihood
        except (NotPositiveDefinite, DegenerateResponse):
            return -np.inf


def _search_bounds(k: int, config: FitConfig) -> Bounds:
    lo = np.full(k, math.log10(config.theta_bounds[0]))
    hi = np.full(k, math.log10(config.theta_bounds[1]))
    if config.optimize_p:
        lo = np.concatenate([lo, np.full(k, P_BOUNDS[0])])
        hi = np.concatenate([hi, np.full(k, P_BOUNDS[1])])
    return Bounds(lo, hi)


def _quasi_newton(obj: _Objective, bounds: Bounds, x0, config: FitConfig) -> OptimResult:
    grad = lambda z: finite_diff_grad(obj, z, 1e-5, bounds)  # noqa: E731
    return bounded_quasi_newton(obj, grad, bounds, x0, max_iters=config.qn_iterations)


def fit(X, y, config: Optional[FitConfig] = None) -> KrigingModel:
    """Fit an Ordinary Kriging model by maximum likelihood.

    ``theta`` is searched in log10 space within ``config.theta_bounds``.
    With ``Optimizer.BOTH`` the differential evolution optimum seeds the
    quasi-Newton refinement and the better of the two is kept (the
    refined point wins ties within 1e-9).

    Raises
    ------
    DegenerateResponse
        If `y` is constant.
    TooFewPoints
        If fewer than two observations are given.
    NonFiniteInput
        On NaN or infinite entries.
    """
    config = config or FitConfig()
    X, y = _check_data(X, y)
    n, k = X.shape
    obj = _Objective(X, y, config)
    bounds = _search_bounds(k, config)
    d = bounds.d
    info: dict = {"optimizer": config.optimizer.value}

    best_z, best_f = None, -np.inf
    if config.optimizer in (Optimizer.DE, Optimizer.BOTH):
        pop = config.de_population or 10 * d
        res = differential_evolution(obj, bounds, population=pop, iterations=config.de_iterations,
                                     seed=config.seed, mutation=config.de_mutation,
                                     crossover=config.de_crossover, workers=config.workers)
        best_z, best_f = res.x_best, res.f_best
        info["de"] = {"f_best": res.f_best, "evaluations": res.evaluations, "converged": res.converged,
                      "generations": res.trace[-1][0]}
        if config.optimizer is Optimizer.BOTH and np.isfinite(best_f):
            qn = _quasi_newton(obj, bounds, best_z, config)
            info["qn"] = {"f_best": qn.f_best, "evaluations": qn.evaluations, "converged": qn.converged}
            if qn.f_best >= best_f - 1e-9:
                best_z, best_f = qn.x_best, qn.f_best
    else:
        rng = np.random.Generator(np.random.Philox(config.seed))
        starts = bounds.lo + rng.random((config.qn_restarts, d)) * (bounds.hi - bounds.lo)
        runs = []
        for x0 in starts:
            if not np.isfinite(obj(x0)):
                continue
            qn = _quasi_newton(obj, bounds, x0, config)
            runs.append({"f_best": qn.f_best, "evaluations": qn.evaluations, "converged": qn.converged})
            if qn.f_best > best_f:
                best_z, best_f = qn.x_best, qn.f_best
        info["qn_restarts"] = runs

    if best_z is None or not np.isfinite(best_f):
        raise NotPositiveDefinite(-1)
    params = obj.params(best_z)
    return _assemble(X, y, params, obj.likelihood(best_z), config.theta_bounds, info)


def _assemble(X, y, params, lik: Likelihood, theta_bounds, info=None) -> KrigingModel:
    F = lik.chol
    alpha = solve_chol(F, y - lik.mu_hat)
    pi_one = solve_chol(F, np.ones(y.size))
    X = X.copy()
    y = y.copy()
    for a in (X, y, alpha, pi_one):
        a.setflags(write=False)
    return KrigingModel(X=X, y=y, params=params, mu_hat=lik.mu_hat, sigma2_hat=lik.sigma2_hat, chol=F,
                        alpha=alpha, nugget=lik.nugget, log_likelihood=lik.log_likelihood,
                        theta_bounds=tuple(theta_bounds), psi_inv_one=pi_one,
                        one_psi_inv_one=float(pi_one.sum()), fit_info=info or {})


def model_at(X, y, params: KernelParams, nugget: float = 1e-10, nugget_max: float = 1e-4,
             theta_bounds=(kern.THETA_LO, kern.THETA_HI)) -> KrigingModel:
    """Build a model at given kernel parameters without any search."""
    X, y = _check_data(X, y)
    lik = _escalating(lambda g: kern.build_matrix(X, params, g).psi, y, nugget, max(nugget, nugget_max))
    return _assemble(X, y, params, lik, theta_bounds)


def _as_points(model: KrigingModel, xstar) -> Tuple[np.ndarray, bool]:
    xs = np.asarray(xstar, dtype=float)
    single = xs.ndim <= 1
    if single:
        xs = xs.reshape(1, -1)
    if xs.shape[1] != model.k:
        raise DimensionMismatch(f"model has {model.k} features, got {xs.shape[1]}")
    return xs, single


def _cross(model: KrigingModel, xs: np.ndarray) -> np.ndarray:
    """Cross-correlations with the nugget counted at zero distance.

    The nugget is jitter on the kernel itself, so a query that coincides
    with a training row sees the same diagonal as Psi. This keeps the
    predictor an exact interpolator and the MSE zero at the data.
    """
    r = kern.build_cross(model.X, xs, model.params)
    if model.nugget > 0:
        same = np.all(model.X[:, None, :] == xs[None, :, :], axis=2)
        r = r + model.nugget * same
    return r


def predict_mean(model: KrigingModel, xstar):
    """Best linear unbiased predictor ``mu + psi(x)^T alpha``.

    Accepts one point (k-vector) or a batch (m x k).
    """
    xs, single = _as_points(model, xstar)
    r = _cross(model, xs)
    out = model.mu_hat + model.alpha @ r
    return float(out[0]) if single else out


def predict_variance(model: KrigingModel, xstar):
    """Mean squared error of the predictor, clamped at zero."""
    xs, single = _as_points(model, xstar)
    r = _cross(model, xs)
    pr = solve_chol(model.chol, r)
    q = np.einsum("ij,ij->j", r, pr)
    u = 1.0 - model.psi_inv_one @ r
    s2 = model.sigma2_hat * (1.0 + model.nugget - q + u * u / model.one_psi_inv_one)
    s2 = np.maximum(s2, 0.0)
    return float(s2[0]) if single else s2


def _norm_cdf(u):
    return 0.5 * (1.0 + np.vectorize(math.erf)(np.asarray(u) / math.sqrt(2.0)))


def _norm_pdf(u):
    return np.exp(-0.5 * np.asarray(u) ** 2) / math.sqrt(2.0 * math.pi)


def expected_improvement_from(mean, sd, y_best):
    """Expected improvement below `y_best` for Gaussian predictions."""
    mean = np.asarray(mean, dtype=float)
    sd = np.asarray(sd, dtype=float)
    gain = y_best - mean
    with np.errstate(divide="ignore", invalid="ignore"):
        u = np.where(sd > 0, gain / np.where(sd > 0, sd, 1.0), 0.0)
    ei = np.where(sd > 0, gain * _norm_cdf(u) + sd * _norm_pdf(u), np.maximum(gain, 0.0))
    ei = np.maximum(ei, 0.0)
    return float(ei) if ei.ndim == 0 else ei


def expected_improvement(model: KrigingModel, xstar, y_best: float):
    xs, single = _as_points(model, xstar)
    mean = predict_mean(model, xs)
    sd = np.sqrt(predict_variance(model, xs))
    ei = expected_improvement_from(mean, sd, y_best)
    return float(ei[0]) if single else ei
