"""Dense linear-algebra substrate.

Matrices are plain ``numpy.ndarray`` objects.  Vectorization is column
stacking throughout, so ``vec(A @ X @ B.T) == kron(B, A) @ vec(X)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import DimensionMismatch, ValidationError

RANK_RTOL = 1e-9
SYM_ATOL = 1e-10


def vectorize(M):
    """Column-stacking vectorization."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2:
        raise DimensionMismatch(f"expected a 2-D matrix, got shape {M.shape}")
    return M.reshape(-1, order="F")


def materialize(v, rows, cols=None):
    """Inverse of :func:`vectorize`.  ``cols`` defaults to ``rows``."""
    v = np.asarray(v, dtype=float).ravel()
    cols = rows if cols is None else cols
    if v.size != rows * cols:
        raise DimensionMismatch(f"cannot reshape {v.size} entries into {rows}x{cols}")
    return v.reshape(rows, cols, order="F")


def kron(A, B):
    """Kronecker product with ``vec(A X B^T) = kron(B, A) vec(X)``."""
    return np.kron(np.atleast_2d(A), np.atleast_2d(B))


def commutation_matrix(rows, cols):
    """Permutation K with ``K vec(Y) = vec(Y^T)`` for a rows x cols matrix Y."""
    K = np.zeros((rows * cols, rows * cols))
    i, j = np.meshgrid(np.arange(rows), np.arange(cols), indexing="ij")
    K[(j + cols * i).ravel(), (i + rows * j).ravel()] = 1.0
    return K


def sym_eigh(S, check=True):
    """Eigendecomposition of a symmetric matrix, eigenvalues ascending.

    This is the single spectral primitive used for symmetric inputs; the
    input is symmetrized before factorizing so results are deterministic.
    """
    S = np.asarray(S, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {S.shape}")
    if check:
        scale = max(1.0, np.abs(S).max(initial=0.0))
        if np.abs(S - S.T).max(initial=0.0) > SYM_ATOL * scale:
            raise ValidationError("matrix is not symmetric")
    return np.linalg.eigh(0.5 * (S + S.T))


def rank_threshold(singular_values):
    s = np.asarray(singular_values, dtype=float)
    if s.size == 0:
        return 0.0
    return RANK_RTOL * s.max()


def numerical_rank(A):
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.size == 0:
        return 0
    s = np.linalg.svd(A, compute_uv=False)
    if s.max() == 0.0:
        return 0
    return int(np.sum(s > rank_threshold(s)))


def pseudoinverse(A):
    """Moore-Penrose pseudoinverse; ``0^+ = 0``.

    Singular values at or below ``1e-9 * sigma_max`` count as zero.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.size == 0 or not np.any(A):
        return np.zeros(A.T.shape)
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    keep = s > rank_threshold(s)
    return (Vt[keep].T / s[keep]) @ U[:, keep].T


def column_projector(X):
    """Orthogonal projector ``X X^+`` onto the column span of X."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    n = X.shape[0]
    if not np.any(X):
        return np.zeros((n, n))
    U, s, _ = np.linalg.svd(X, full_matrices=False)
    Q = U[:, s > rank_threshold(s)]
    return Q @ Q.T


def psd_project(S):
    """Projection onto the PSD cone: clip eigenvalues at zero."""
    w, V = sym_eigh(S)
    return (V * np.maximum(w, 0.0)) @ V.T


def positive_part(x):
    return np.maximum(np.asarray(x, dtype=float), 0.0)


def symmetric_basis(n):
    """Orthonormal basis (n^2 x n(n+1)/2) of vectorized symmetric matrices.

    Columns are ordered by (i, j) with i <= j, column-major in j.
    """
    cols = []
    for j in range(n):
        for i in range(j + 1):
            c = np.zeros(n * n)
            if i == j:
                c[i + n * j] = 1.0
            else:
                c[i + n * j] = c[j + n * i] = np.sqrt(0.5)
            cols.append(c)
    return np.column_stack(cols) if cols else np.zeros((0, 0))


def _as_factor(M, name):
    M = np.asarray(M, dtype=float)
    if M.ndim == 1:
        M = M[:, None]
    if M.ndim != 2:
        raise DimensionMismatch(f"{name} must be a matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValidationError(f"{name} has non-finite entries")
    return M


@dataclass(frozen=True)
class FactorPair:
    """Candidate factor X (n x r) and ground-truth factor Z (n x r_star).

    ``rank(Z) == r_star`` is enforced with the package rank tolerance.
    """

    X: np.ndarray
    Z: np.ndarray
    check_rank: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        X = _as_factor(self.X, "X")
        Z = _as_factor(self.Z, "Z")
        if X.shape[0] != Z.shape[0]:
            raise DimensionMismatch(f"X has {X.shape[0]} rows but Z has {Z.shape[0]}")
        if Z.shape[1] < 1 or Z.shape[1] > X.shape[1]:
            raise ValidationError(
                f"need 1 <= r_star <= r, got r_star={Z.shape[1]}, r={X.shape[1]}"
            )
        if self.check_rank and numerical_rank(Z) != Z.shape[1]:
            raise ValidationError("Z must have full column rank r_star")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Z", Z)

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def r(self):
        return self.X.shape[1]

    @property
    def r_star(self):
        return self.Z.shape[1]

    @property
    def Z_padded(self):
        """Z with zero columns appended up to width r."""
        pad = np.zeros((self.n, self.r - self.r_star))
        return np.hstack([self.Z, pad])

    def error_matrix(self):
        return self.X @ self.X.T - self.Z @ self.Z.T


@dataclass(frozen=True)
class ErrorJacobian:
    e: np.ndarray
    J: np.ndarray
    e_norm: float


def jacobian(X):
    """Matrix J (n^2 x nr) with ``J vec(Y) = vec(X Y^T + Y X^T)``."""
    X = _as_factor(X, "X")
    n, r = X.shape
    return np.kron(X, np.eye(n)) + np.kron(np.eye(n), X) @ commutation_matrix(n, r)


def build_error_jacobian(fp: FactorPair) -> ErrorJacobian:
    E = fp.X @ fp.X.T - fp.Z_padded @ fp.Z_padded.T
    e = vectorize(E)
    return ErrorJacobian(e=e, J=jacobian(fp.X), e_norm=float(np.linalg.norm(E)))


def residual_projector(X):
    """``I - J J^+`` computed as ``kron(I - XX^+, I - XX^+)``."""
    X = _as_factor(X, "X")
    P = np.eye(X.shape[0]) - column_projector(X)
    return np.kron(P, P)
