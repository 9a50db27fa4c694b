"""Small dense linear algebra for coupling and covariance matrices.

Matrices here are d x d with d in the single digits, so the Cholesky
factorization is written out directly; it doubles as the positive
definiteness test and reports which leading minor failed.
"""

from __future__ import annotations

import numpy as np

MAX_DIM = 16
PD_RTOL = 1e-12


class NotPositiveDefiniteError(np.linalg.LinAlgError):
    """Raised when a Cholesky pivot drops below tolerance.

    ``minor`` is the 1-based index of the first leading principal minor
    that is not positive.
    """

    def __init__(self, minor: int, pivot: float):
        super().__init__(f"leading minor {minor} not positive (pivot {pivot:.6g})")
        self.minor = minor
        self.pivot = pivot


def _as_square(M) -> np.ndarray:
    A = np.asarray(M, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    if A.shape[0] > MAX_DIM:
        raise ValueError(f"dimension {A.shape[0]} exceeds supported maximum {MAX_DIM}")
    return A


def pd_tolerance(M) -> float:
    """Pivot threshold used by :func:`cholesky`: ``1e-12 * max|M_ij|``."""
    A = np.asarray(M, dtype=float)
    return PD_RTOL * float(np.max(np.abs(A))) if A.size else 0.0


def cholesky(M) -> np.ndarray:
    """Lower-triangular L with L @ L.T == M.

    A pivot (before the square root) that is not strictly greater than
    :func:`pd_tolerance` raises :class:`NotPositiveDefiniteError`, so
    matrices within tolerance of singular are rejected.
    """
    A = _as_square(M)
    d = A.shape[0]
    tol = pd_tolerance(A)
    L = np.zeros_like(A)
    for j in range(d):
        pivot = A[j, j] - np.dot(L[j, :j], L[j, :j])
        if not pivot > tol:
            raise NotPositiveDefiniteError(j + 1, float(pivot))
        L[j, j] = np.sqrt(pivot)
        for i in range(j + 1, d):
            L[i, j] = (A[i, j] - np.dot(L[i, :j], L[j, :j])) / L[j, j]
    return L


def is_positive_definite(M) -> bool:
    try:
        cholesky(M)
    except NotPositiveDefiniteError:
        return False
    return True


def symmetrize(M) -> np.ndarray:
    A = np.asarray(M, dtype=float)
    # a + b == b + a in IEEE arithmetic, so the result is exactly symmetric
    return 0.5 * (A + A.T)


def inverse(M) -> np.ndarray:
    """Inverse of a symmetric matrix, returned exactly symmetric."""
    A = _as_square(M)
    if A.shape[0] and np.linalg.cond(A) > 1e14:
        raise np.linalg.LinAlgError("matrix is singular to working precision")
    return symmetrize(np.linalg.inv(A))


def quad_form_chol(L: np.ndarray, X: np.ndarray) -> np.ndarray:
    """Row-wise ``x^T (L L^T)^{-1} x`` for the rows of X, via a triangular solve."""
    from scipy.linalg import solve_triangular

    X = np.atleast_2d(np.asarray(X, dtype=float))
    Z = solve_triangular(L, X.T, lower=True)
    return np.einsum("ij,ij->j", Z, Z)
