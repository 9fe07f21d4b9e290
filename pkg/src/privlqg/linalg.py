"""Symmetric-matrix kernels with pinned numerical semantics.

All tolerance comparisons in the toolkit are relative to
``scale = 1 + spectral norm``, implemented here once.  Packed symmetric
storage uses the svec convention (diagonal entries as-is, off-diagonal
entries scaled by sqrt(2)) so that ``svec(X) . svec(Y) = trace(X Y)``.
"""

from __future__ import annotations

import functools

import numpy as np
from scipy import linalg as sla

from .errors import DimensionMismatch, NotPositiveDefinite

_SQRT2 = np.sqrt(2.0)


def spectral_scale(M):
    """Relative scale 1 + ||M||_2 used by every tolerance in the toolkit."""
    M = np.asarray(M, dtype=float)
    if M.size == 0:
        return 1.0
    return 1.0 + float(np.linalg.norm(M, 2))


def symmetrize(M):
    return 0.5 * (M + M.T)


def symmetry_residual(M):
    """max |M - M'| normalized by 1 + max |M|."""
    M = np.asarray(M, dtype=float)
    if M.size == 0:
        return 0.0
    return float(np.max(np.abs(M - M.T)) / (1.0 + np.max(np.abs(M))))


def min_eigenvalue(M):
    M = np.asarray(M, dtype=float)
    if M.size == 0:
        return np.inf
    return float(np.linalg.eigvalsh(symmetrize(M)).min())


def is_positive_definite(M, name="matrix", raise_on_fail=False):
    """Eigenvalue test: min eig > 1e-12 * (1 + ||M||_2)."""
    lo = min_eigenvalue(M)
    ok = lo > 1e-12 * spectral_scale(M)
    if not ok and raise_on_fail:
        raise NotPositiveDefinite(name, lo)
    return ok


def is_positive_semidefinite(M, name="matrix", raise_on_fail=False):
    lo = min_eigenvalue(M)
    ok = lo >= -1e-12 * spectral_scale(M)
    if not ok and raise_on_fail:
        raise NotPositiveDefinite(name, lo)
    return ok


def chol_pd(M, name="matrix"):
    """Cholesky factor of a PD matrix; NotPositiveDefinite on failure."""
    try:
        return np.linalg.cholesky(M)
    except np.linalg.LinAlgError:
        raise NotPositiveDefinite(name, min_eigenvalue(M)) from None


def logdet_pd(M, name="matrix"):
    """Natural-log determinant of a PD matrix via triangular factorization.

    Computed as 2 * sum(log diag(L)) for the Cholesky factor L; raises
    NotPositiveDefinite when a nonpositive pivot is encountered.
    """
    M = np.asarray(M, dtype=float)
    if M.size == 0:
        return 0.0
    L = chol_pd(M, name)
    return 2.0 * float(np.sum(np.log(np.diag(L))))


def solve_pd(M, B, name="matrix"):
    """Solve M X = B for symmetric positive definite M via Cholesky."""
    try:
        c, low = sla.cho_factor(M, lower=True)
    except np.linalg.LinAlgError:
        raise NotPositiveDefinite(name, min_eigenvalue(M)) from None
    return sla.cho_solve((c, low), B)


def inv_pd(M, name="matrix"):
    return solve_pd(M, np.eye(M.shape[0]), name)


def schur_psd_check(top_left, top_right, bottom_right, threshold_scale=1e-9):
    """Assemble [[TL, TR], [TR', BR]] and test it for positive semidefiniteness.

    Returns (verdict, min_eigenvalue); the verdict threshold is
    -threshold_scale * (1 + ||block||_2).
    """
    TL = np.atleast_2d(np.asarray(top_left, dtype=float))
    TR = np.atleast_2d(np.asarray(top_right, dtype=float))
    BR = np.atleast_2d(np.asarray(bottom_right, dtype=float))
    p, q = TR.shape
    if TL.shape != (p, p) or BR.shape != (q, q):
        raise DimensionMismatch(
            f"Schur blocks not conformable: {TL.shape}, {TR.shape}, {BR.shape}"
        )
    block = np.block([[TL, TR], [TR.T, BR]])
    lo = min_eigenvalue(block)
    return lo >= -threshold_scale * spectral_scale(block), lo


# ---------------------------------------------------------------------------
# Packed symmetric (svec) storage and quadratic-form assembly.
# ---------------------------------------------------------------------------


def svec_dim(n):
    return n * (n + 1) // 2


@functools.lru_cache(maxsize=None)
def _svec_index(n):
    # upper-triangle (i <= j) ordering, diagonal first convention not needed:
    # we use row-major upper triangle.
    rows, cols = np.triu_indices(n)
    return rows, cols


@functools.lru_cache(maxsize=None)
def svec_basis(n):
    """Orthonormal basis U (n^2 x q) with vec(S) = U svec(S) for symmetric S."""
    rows, cols = _svec_index(n)
    q = len(rows)
    U = np.zeros((n * n, q))
    for k, (i, j) in enumerate(zip(rows, cols)):
        E = np.zeros((n, n))
        if i == j:
            E[i, j] = 1.0
        else:
            E[i, j] = E[j, i] = 1.0 / _SQRT2
        U[:, k] = E.reshape(-1)
    return U


def svec(S):
    """Packed storage: diagonal entries, off-diagonal entries times sqrt(2)."""
    S = np.asarray(S, dtype=float)
    n = S.shape[0]
    rows, cols = _svec_index(n)
    v = S[rows, cols].copy()
    v[rows != cols] *= _SQRT2
    return v


def smat(v, n):
    rows, cols = _svec_index(n)
    S = np.zeros((n, n))
    vals = np.asarray(v, dtype=float).copy()
    off = rows != cols
    vals[off] /= _SQRT2
    S[rows, cols] = vals
    S[cols, rows] = vals
    return S


def svec_batch(S):
    """svec applied along the first axis of a stack (L, n, n) -> (L, q)."""
    S = np.asarray(S, dtype=float)
    n = S.shape[-1]
    rows, cols = _svec_index(n)
    v = S[:, rows, cols].copy()
    v[:, rows != cols] *= _SQRT2
    return v


def smat_batch(V, n):
    """Inverse of svec_batch: (L, q) -> (L, n, n)."""
    V = np.asarray(V, dtype=float)
    rows, cols = _svec_index(n)
    vals = V.copy()
    off = rows != cols
    vals[:, off] /= _SQRT2
    S = np.zeros((V.shape[0], n, n))
    S[:, rows, cols] = vals
    S[:, cols, rows] = vals
    return S


def _batched_kron(X, Y):
    """np.kron along the first axis: (L, n, n) x 2 -> (L, n^2, n^2)."""
    L, n, _ = X.shape
    out = np.einsum("tik,tjl->tijkl", X, Y)
    return out.reshape(L, n * n, n * n)


def kron_form(X, Y):
    """svec-coordinates Hessian of the quadratic form dP -> trace(X dP Y dP).

    X, Y symmetric.  Satisfies svec(D)' H svec(D) == trace(X D Y D) for every
    symmetric D.
    """
    n = X.shape[0]
    U = svec_basis(n)
    K = 0.5 * (np.kron(X, Y) + np.kron(Y, X))
    return U.T @ K @ U


def kron_form_batch(X, Y):
    """kron_form along the first axis: (L, n, n) x 2 -> (L, q, q)."""
    n = X.shape[-1]
    U = svec_basis(n)
    K = 0.5 * (_batched_kron(X, Y) + _batched_kron(Y, X))
    return U.T @ K @ U


def sandwich_form(M):
    """svec-coordinates matrix of the linear map dP -> M dP M'."""
    n = M.shape[0]
    U = svec_basis(n)
    return U.T @ np.kron(M, M) @ U


def sandwich_form_batch(M):
    """sandwich_form along the first axis: (L, n, n) -> (L, q, q)."""
    n = M.shape[-1]
    U = svec_basis(n)
    return U.T @ _batched_kron(M, M) @ U


def logdet_pd_batch(M, name="matrix"):
    """Batched logdet via batched Cholesky: (L, n, n) -> (L,)."""
    M = np.asarray(M, dtype=float)
    if M.shape[0] == 0:
        return np.zeros(0)
    try:
        L = np.linalg.cholesky(M)
    except np.linalg.LinAlgError:
        raise NotPositiveDefinite(name, float("nan")) from None
    idx = np.arange(M.shape[-1])
    return 2.0 * np.sum(np.log(L[:, idx, idx]), axis=1)
