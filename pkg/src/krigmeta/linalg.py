"""Dense symmetric positive definite linear algebra.

The factorization goes through LAPACK ``potrf`` so that the index of the
first failing pivot is available; callers use it to escalate the nugget.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import lapack, solve_triangular

from .errors import DimensionMismatch, NotPositiveDefinite


@dataclass(frozen=True)
class CholeskyFactor:
    """Lower triangular factor ``L`` with ``L @ L.T == A``."""

    L: np.ndarray

    @property
    def n(self) -> int:
        return self.L.shape[0]


def cholesky(A) -> CholeskyFactor:
    """Factor a symmetric positive definite matrix.

    Only the lower triangle of `A` is read.

    Raises
    ------
    NotPositiveDefinite
        If a diagonal pivot is not strictly positive. ``pivot`` is the
        zero-based index of the offending column.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] < 1:
        raise DimensionMismatch(f"expected a non-empty square matrix, got shape {A.shape}")
    c, info = lapack.dpotrf(A, lower=1, clean=1, overwrite_a=0)
    if info > 0:
        raise NotPositiveDefinite(info - 1)
    if info < 0:
        raise ValueError(f"illegal argument {-info} to dpotrf")
    L = np.tril(c)
    L.setflags(write=False)
    return CholeskyFactor(L)


def solve_chol(F: CholeskyFactor, b) -> np.ndarray:
    """Solve ``(L L^T) x = b`` by two triangular solves."""
    b = np.asarray(b, dtype=float)
    if b.shape[0] != F.n:
        raise DimensionMismatch(f"rhs has {b.shape[0]} rows, factor is {F.n}x{F.n}")
    z = solve_triangular(F.L, b, lower=True, check_finite=False)
    return solve_triangular(F.L.T, z, lower=False, check_finite=False)


def log_det(F: CholeskyFactor) -> float:
    return 2.0 * float(np.sum(np.log(np.diag(F.L))))
