"""Explicit spurious second-order points for overparameterized sensing.

``build_example_operator`` constructs a measurement operator whose
full-space RIP constant is ``1/(1 + 1/sqrt(q))`` with ``q = r - r_star + 1``,
and ``example_points`` gives an (X, Z) pair where X is a spurious
second-order critical point of ``f(X) = ||A(XX^T - ZZ^T)||^2``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DimensionMismatch, ValidationError
from .linalg import FactorPair, build_error_jacobian, materialize, numerical_rank, sym_eigh, vectorize


@dataclass(frozen=True)
class SensingOperator:
    """Linear map ``M -> stacked @ vec(M)`` on n x n matrices.

    Row k of ``stacked`` is ``vec(A_k)^T``.
    """

    n: int
    stacked: np.ndarray
    labels: tuple = ()
    nu: float | None = None

    def __post_init__(self):
        S = np.asarray(self.stacked, dtype=float)
        if S.ndim != 2 or S.shape[1] != self.n * self.n:
            raise DimensionMismatch(f"stacked must have n^2 = {self.n * self.n} columns")
        object.__setattr__(self, "stacked", S)

    @property
    def m(self):
        return self.stacked.shape[0]

    @property
    def kernel(self):
        """``H = A^T A`` as an n^2 x n^2 matrix."""
        return self.stacked.T @ self.stacked

    def apply(self, M):
        return self.stacked @ vectorize(M)

    def data_matrix(self, k):
        return materialize(self.stacked[k], self.n)

    @classmethod
    def from_matrices(cls, mats, nu=None):
        mats = [np.asarray(A, dtype=float) for A in mats]
        n = mats[0].shape[0]
        return cls(n, np.vstack([vectorize(A) for A in mats]), nu=nu)


@dataclass(frozen=True)
class RipCertificate:
    delta_opt: float
    kappa: float
    nu: float
    top_vector_rank: int
    bottom_vector_rank: int
    spectrum_min: float
    spectrum_max: float


def _check_dims(n, r, r_star):
    if not (1 <= r_star <= r < n):
        raise ValidationError(f"need 1 <= r_star <= r < n, got n={n}, r={r}, r_star={r_star}")


def example_constants(r, r_star):
    """Return ``(q, kappa, xi, delta, f_value)`` for the example family."""
    q = r - r_star + 1
    kappa = 1.0 + 2.0 * np.sqrt(q)
    xi = 1.0 / np.sqrt(1.0 + np.sqrt(q))
    delta = 1.0 / (1.0 + 1.0 / np.sqrt(q))
    f = (1.0 + 2.0 * np.sqrt(q)) / (1.0 + np.sqrt(q))
    return q, kappa, xi, delta, f


def build_example_operator(n, r, r_star) -> SensingOperator:
    """Operator with orthogonal rows of squared norm 1 or kappa.

    Row ``i + n*j`` holds the data matrix labelled (i, j).
    """
    _check_dims(n, r, r_star)
    q, kappa, *_ = example_constants(r, r_star)
    u = np.eye(n)

    def outer(i, j):
        return np.outer(u[i], u[j])

    def special(i):
        if i == 0:
            return np.sqrt(kappa / 2) * outer(0, 0) + np.sqrt(kappa / (2 * q)) * sum(
                outer(k, k) for k in range(1, q + 1)
            )
        if i == 1:
            return outer(0, 0) / np.sqrt(2) - sum(outer(k, k) for k in range(1, q + 1)) / np.sqrt(2 * q)
        p = q - i + 1
        return np.sqrt(p / (p + 1)) * outer(i - 1, i - 1) - sum(
            outer(i + k, i + k) for k in range(p)
        ) / np.sqrt(p * (p + 1))

    rows, labels = [], []
    for j in range(n):
        for i in range(n):
            A = special(i) if (i == j and i <= q) else np.sqrt(kappa) * outer(i, j)
            rows.append(vectorize(A))
            labels.append((i, j))
    stacked = np.vstack(rows)

    G = stacked @ stacked.T
    off = G - np.diag(np.diag(G))
    if np.abs(off).max() > 1e-12:
        raise AssertionError("example rows are not orthogonal")
    return SensingOperator(n, stacked, tuple(labels), nu=2.0 / (kappa + 1.0))


def example_points(n, r, r_star) -> FactorPair:
    _check_dims(n, r, r_star)
    q, _, xi, *_ = example_constants(r, r_star)
    u = np.eye(n)
    Z = np.column_stack([u[0]] + [u[i] for i in range(q + 1, r + 1)])
    X = np.column_stack([xi * u[i] for i in range(1, q + 1)] + [u[i] for i in range(q + 1, r + 1)])
    return FactorPair(X, Z)


def _residual(A: SensingOperator, fp: FactorPair):
    if A.n != fp.n:
        raise DimensionMismatch(f"operator acts on {A.n}x{A.n}, factors have {fp.n} rows")
    ej = build_error_jacobian(fp)
    return ej, A.kernel


def loss(A: SensingOperator, fp: FactorPair) -> float:
    r = A.apply(fp.error_matrix())
    return float(r @ r)


def gradient(A: SensingOperator, fp: FactorPair):
    ej, H = _residual(A, fp)
    return materialize(2.0 * ej.J.T @ (H @ ej.e), fp.n, fp.r)


def hessian_matrix(A: SensingOperator, fp: FactorPair):
    """Second derivative of f in vec coordinates, ``4 I_r (x) mat(He) + 2 J^T H J``."""
    ej, H = _residual(A, fp)
    G = materialize(H @ ej.e, fp.n)
    Hess = 4.0 * np.kron(np.eye(fp.r), G) + 2.0 * ej.J.T @ H @ ej.J
    return 0.5 * (Hess + Hess.T)


def verify_second_order_point(A: SensingOperator, fp: FactorPair, tol=1e-9) -> dict:
    g = gradient(A, fp)
    w = sym_eigh(hessian_matrix(A, fp))[0]
    f = loss(A, fp)
    grad_norm = float(np.linalg.norm(g))
    stationary = grad_norm <= tol
    return {
        "is_stationary": stationary,
        "is_sosp": bool(stationary and w[0] >= -tol and f > tol),
        "grad_norm": grad_norm,
        "hess_min_eig": float(w[0]),
        "f_value": f,
    }


def _min_rank_in_eigenspace(Q, n):
    """Smallest numerical rank among projections of coordinate matrices onto range(Q).

    Extremal eigenspaces are usually degenerate, so the eigenvector returned
    by the eigensolver is an arbitrary member; coordinate projections expose
    the sparse low-rank members when they exist.
    """
    best = min(numerical_rank(materialize(Q[:, k], n)) for k in range(Q.shape[1]))
    P = Q @ Q.T
    for k in range(n * n):
        v = P[:, k]
        if np.linalg.norm(v) > 1e-8:
            best = min(best, numerical_rank(materialize(v, n)))
    return best


def full_space_rip_certificate(A: SensingOperator, tol=1e-9) -> RipCertificate:
    w, V = sym_eigh(A.kernel)
    lo, hi = float(w[0]), float(w[-1])
    if lo <= 0:
        raise ValidationError("operator has a nontrivial kernel; no finite full-space RIP constant")
    band = tol * max(hi, 1.0)
    top = _min_rank_in_eigenspace(V[:, w >= hi - band], A.n)
    bottom = _min_rank_in_eigenspace(V[:, w <= lo + band], A.n)
    return RipCertificate(
        delta_opt=(hi - lo) / (hi + lo),
        kappa=hi / lo,
        nu=2.0 / (hi + lo),
        top_vector_rank=top,
        bottom_vector_rank=bottom,
        spectrum_min=lo,
        spectrum_max=hi,
    )
