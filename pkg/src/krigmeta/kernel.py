"""Gaussian product correlation and correlation matrix assembly.

The correlation between two points is

    psi(x, x') = exp(-sum_j theta_j * |x_j - x'_j| ** p_j)

with one activity parameter ``theta_j`` per input dimension.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch

THETA_LO = 1e-4
THETA_HI = 1e2


@dataclass(frozen=True)
class KernelParams:
    """Per-dimension activity ``theta`` and exponent ``p``.

    ``p`` defaults to 2 in every dimension.
    """

    theta: np.ndarray
    p: np.ndarray = field(default=None)

    def __post_init__(self):
        theta = np.atleast_1d(np.asarray(self.theta, dtype=float)).copy()
        if self.p is None:
            p = np.full_like(theta, 2.0)
        else:
            p = np.atleast_1d(np.asarray(self.p, dtype=float)).copy()
            if p.size == 1 and theta.size > 1:
                p = np.full_like(theta, float(p[0]))
        if theta.ndim != 1 or p.shape != theta.shape:
            raise DimensionMismatch(f"theta {theta.shape} and p {p.shape} must be equal-length vectors")
        if np.any(theta <= 0) or not np.all(np.isfinite(theta)):
            raise ValueError("theta must be positive and finite")
        if np.any(p <= 0) or np.any(p > 2):
            raise ValueError("p must lie in (0, 2]")
        theta.setflags(write=False)
        p.setflags(write=False)
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "p", p)

    @property
    def k(self) -> int:
        return self.theta.size


@dataclass(frozen=True)
class CorrelationMatrix:
    psi: np.ndarray
    nugget: float = 0.0


def _powered_distance(h: np.ndarray, p: np.ndarray) -> np.ndarray:
    # h holds |differences| with the dimension on the last axis
    if np.all(p == 2.0):
        return h * h
    out = h * h
    other = p != 2.0
    hp = h[..., other]
    with np.errstate(divide="ignore"):
        out[..., other] = np.where(hp > 0, np.exp(p[other] * np.log(hp)), 0.0)
    return out


def _check_k(width: int, params: KernelParams) -> None:
    if width != params.k:
        raise DimensionMismatch(f"points have {width} dimensions, kernel has {params.k}")


def correlate(xi, xj, params: KernelParams) -> float:
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    xj = np.atleast_1d(np.asarray(xj, dtype=float))
    if xi.shape != xj.shape:
        raise DimensionMismatch(f"{xi.shape} vs {xj.shape}")
    _check_k(xi.size, params)
    d = _powered_distance(np.abs(xi - xj), params.p)
    return float(np.exp(-np.dot(params.theta, d)))


def build_vector(X, xstar, params: KernelParams) -> np.ndarray:
    """Correlations between every row of `X` and the point `xstar`."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    xstar = np.atleast_1d(np.asarray(xstar, dtype=float))
    _check_k(X.shape[1], params)
    _check_k(xstar.size, params)
    d = _powered_distance(np.abs(X - xstar), params.p)
    return np.exp(-(d @ params.theta))


def build_cross(X, Xstar, params: KernelParams) -> np.ndarray:
    """Correlations between rows of `X` (n) and rows of `Xstar` (m), shape (n, m)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Xstar = np.atleast_2d(np.asarray(Xstar, dtype=float))
    _check_k(X.shape[1], params)
    _check_k(Xstar.shape[1], params)
    d = _powered_distance(np.abs(X[:, None, :] - Xstar[None, :, :]), params.p)
    return np.exp(-(d @ params.theta))


def pairwise_distances(X, p) -> np.ndarray:
    """Powered per-dimension distances of the upper triangle pairs.

    Returns an array of shape (n*(n-1)/2, k) in ``np.triu_indices(n, 1)``
    order. Used by the fitter to avoid recomputing distances for every
    likelihood evaluation.
    """
    X = np.asarray(X, dtype=float)
    iu, ju = np.triu_indices(X.shape[0], 1)
    return _powered_distance(np.abs(X[iu] - X[ju]), np.asarray(p, dtype=float))


def matrix_from_distances(D: np.ndarray, n: int, theta, nugget: float) -> np.ndarray:
    iu, ju = np.triu_indices(n, 1)
    psi = np.empty((n, n))
    vals = np.exp(-(D @ np.asarray(theta, dtype=float)))
    psi[iu, ju] = vals
    psi[ju, iu] = vals
    np.fill_diagonal(psi, 1.0 + nugget)
    return psi


def build_matrix(X, params: KernelParams, nugget: float = 0.0) -> CorrelationMatrix:
    """Correlation matrix of the rows of `X` with `nugget` on the diagonal.

    The upper triangle is computed once and mirrored, so the result is
    exactly symmetric.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    _check_k(X.shape[1], params)
    if nugget < 0:
        raise ValueError("nugget must be non-negative")
    n = X.shape[0]
    D = pairwise_distances(X, params.p)
    return CorrelationMatrix(matrix_from_distances(D, n, params.theta, nugget), float(nugget))
