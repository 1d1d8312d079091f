"""Regularized Eckart-Young problem.

    min_Y ||A - Y Y^T||_F^2 + 2 <B, Y^T Y>

for PSD A (n x n) and B (r x r).  With A = sum s_i u_i u_i^T (s descending)
and B = sum d_i v_i v_i^T (d ascending) the optimum is
``sum s_i^2 - sum_{i<=r} (s_i - d_i)_+^2``, attained at
``Y = sum u_i v_i^T sqrt((s_i - d_i)_+)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import null_space
from scipy.optimize import minimize

from .exceptions import DimensionMismatch, ValidationError
from .linalg import sym_eigh

ORDER_TOL = 1e-12
GROUP_TOL = 1e-6
STATIONARY_TOL = 1e-8


def _sign_fix(V):
    # make the largest-magnitude entry of each column positive
    idx = np.argmax(np.abs(V), axis=0)
    signs = np.sign(V[idx, np.arange(V.shape[1])])
    signs[signs == 0] = 1.0
    return V * signs


@dataclass(frozen=True)
class EyInstance:
    """Spectra ``s`` (descending, length n) and ``d`` (ascending, length r).

    ``U`` (n x n) and ``V`` (r x r) are the eigenbases; identity when the
    instance was given as spectra.
    """

    s: np.ndarray
    d: np.ndarray
    U: np.ndarray | None = None
    V: np.ndarray | None = None

    def __post_init__(self):
        s = np.asarray(self.s, dtype=float).ravel()
        d = np.asarray(self.d, dtype=float).ravel()
        if d.size > s.size:
            raise ValidationError("need r <= n")
        if d.size == 0:
            raise ValidationError("need r >= 1")
        if np.any(s < -ORDER_TOL) or np.any(d < -ORDER_TOL):
            raise ValidationError("spectra must be nonnegative")
        if np.any(np.diff(s) > ORDER_TOL) or np.any(np.diff(d) < -ORDER_TOL):
            raise ValidationError("s must be descending and d ascending")
        object.__setattr__(self, "s", np.maximum(s, 0.0))
        object.__setattr__(self, "d", np.maximum(d, 0.0))
        U = np.eye(s.size) if self.U is None else np.asarray(self.U, dtype=float)
        V = np.eye(d.size) if self.V is None else np.asarray(self.V, dtype=float)
        object.__setattr__(self, "U", U)
        object.__setattr__(self, "V", V)

    @property
    def n(self):
        return self.s.size

    @property
    def r(self):
        return self.d.size

    @property
    def A(self):
        return (self.U * self.s) @ self.U.T

    @property
    def B(self):
        return (self.V * self.d) @ self.V.T

    @classmethod
    def from_matrices(cls, A, B):
        """Eigendecompose PSD ``A`` and ``B`` with deterministic ordering and signs."""
        wa, Ua = sym_eigh(A)
        wb, Vb = sym_eigh(B)
        if wa[0] < -1e-10 * max(1.0, abs(wa[-1])) or wb[0] < -1e-10 * max(1.0, abs(wb[-1])):
            raise ValidationError("A and B must be positive semidefinite")
        order = np.argsort(-wa, kind="stable")
        return cls(wa[order], wb, _sign_fix(Ua[:, order]), _sign_fix(Vb))


@dataclass(frozen=True)
class EySolution:
    value: float
    Y_star: np.ndarray
    w: np.ndarray


def solve_regularized_ey(inst: EyInstance) -> EySolution:
    r = inst.r
    w = np.maximum(inst.s[:r] - inst.d, 0.0)
    value = float(np.sum(inst.s**2) - np.sum(w**2))
    Y = (inst.U[:, :r] * np.sqrt(w)) @ inst.V.T
    return EySolution(value, Y, w)


def ey_objective(A, B, Y) -> float:
    A, B, Y = (np.atleast_2d(np.asarray(M, dtype=float)) for M in (A, B, Y))
    n, r = Y.shape
    if A.shape != (n, n) or B.shape != (r, r):
        raise DimensionMismatch(f"need A {n}x{n} and B {r}x{r} for Y {n}x{r}")
    R = A - Y @ Y.T
    return float(np.sum(R * R) + 2.0 * np.sum(B * (Y.T @ Y)))


def _batched_objective(A, B, Y):
    R = A - Y @ Y.transpose(0, 2, 1)
    return np.sum(R * R, axis=(1, 2)) + 2.0 * np.sum(B * (Y.transpose(0, 2, 1) @ Y), axis=(1, 2))


def _polish(A, B, Y0, gtol):
    n, r = Y0.shape

    def fg(y):
        Y = y.reshape(n, r)
        R = Y @ Y.T - A
        f = np.sum(R * R) + 2.0 * np.sum(B * (Y.T @ Y))
        return f, (4.0 * (R @ Y + Y @ B)).ravel()

    res = minimize(fg, Y0.ravel(), jac=True, method="L-BFGS-B",
                   options={"maxiter": 20000, "gtol": gtol, "ftol": 1e-16, "maxcor": 20})
    return float(res.fun), res.x.reshape(n, r)


def ey_descent_oracle(A, B, seed=0, restarts=20, iters=500, return_point=False, gtol=1e-11,
                      polish=3):
    """Best objective over gradient-descent runs from random starts.

    Uses the gradient ``4 (Y Y^T - A) Y + 4 Y B`` with Armijo backtracking
    (constant 1e-4, halving) and Barzilai-Borwein trial steps.  All restarts
    advance together as a batch.  Escaping a flat direction with a small
    gap ``s_i - d_j`` can take plain descent tens of thousands of steps, so
    the ``polish`` best runs are finished with L-BFGS on the same gradient.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    n, r = A.shape[0], B.shape[0]
    if A.shape != (n, n) or B.shape != (r, r) or r > n:
        raise DimensionMismatch(f"need square A, B with r <= n, got {A.shape}, {B.shape}")
    rng = np.random.default_rng(seed)
    scale = np.sqrt(max(np.abs(A).max(initial=0.0), 1e-12))
    Y = rng.standard_normal((restarts, n, r)) * scale / np.sqrt(max(n, 1))
    f = _batched_objective(A, B, Y)
    alpha = np.full(restarts, 1.0 / (4.0 * max(np.linalg.norm(A, 2) + np.linalg.norm(B, 2), 1e-12)))
    active = np.ones(restarts, dtype=bool)
    gnorm_tol = gtol * max(1.0, np.linalg.norm(A) ** 1.5)
    G = 4.0 * ((Y @ Y.transpose(0, 2, 1) - A) @ Y + Y @ B)
    for _ in range(iters):
        g2 = np.sum(G * G, axis=(1, 2))
        active &= np.sqrt(g2) > gnorm_tol
        if not active.any():
            break
        pending = active.copy()
        for _ in range(60):
            if not pending.any():
                break
            Yc = Y - alpha[:, None, None] * G
            fc = _batched_objective(A, B, Yc)
            ok = pending & (fc <= f - 1e-4 * alpha * g2)
            Y[ok], f[ok] = Yc[ok], fc[ok]
            pending &= ~ok
            alpha[pending] *= 0.5
        active &= ~pending      # no acceptable step: treat as converged
        G_new = 4.0 * ((Y @ Y.transpose(0, 2, 1) - A) @ Y + Y @ B)
        dG = G_new - G
        step = alpha[:, None, None] * G
        sy = np.sum(step * dG, axis=(1, 2))
        ss = np.sum(step * step, axis=(1, 2))
        bb = np.where(sy > 0, ss / np.where(sy > 0, sy, 1.0), 2.0 * alpha)
        alpha = np.where(active, np.clip(bb, 1e-12, 1e6), alpha)
        G = G_new
    best_f, best_Y = np.inf, None
    for k in np.argsort(f, kind="stable")[: max(polish, 1)]:
        fk, Yk = (f[k], Y[k]) if polish == 0 else _polish(A, B, Y[k], gnorm_tol)
        if fk < best_f:
            best_f, best_Y = float(fk), np.array(Yk, copy=True)
    if return_point:
        return best_f, best_Y
    return best_f


def _groups(values, tol):
    """Index groups of (numerically) equal values, in order of first appearance."""
    values = np.asarray(values, dtype=float)
    scale = max(1.0, np.abs(values).max(initial=0.0))
    groups, assigned = [], np.zeros(values.size, dtype=bool)
    for i in range(values.size):
        if assigned[i]:
            continue
        members = np.flatnonzero(~assigned & (np.abs(values - values[i]) <= tol * scale))
        assigned[members] = True
        groups.append(members)
    return groups


def _diag_vector(D, size):
    D = np.asarray(D, dtype=float)
    if D.ndim == 2:
        if np.abs(D - np.diag(np.diag(D))).max(initial=0.0) > 1e-12:
            raise ValidationError("expected a diagonal matrix")
        D = np.diag(D)
    if D.shape != (size,):
        raise DimensionMismatch(f"expected {size} diagonal entries, got {D.shape}")
    return D


def _check_stationary(X, S, d, tol):
    res = (S - X @ X.T) @ X - X * d
    scale = max(1.0, np.linalg.norm(S) * np.linalg.norm(X) + np.linalg.norm(X) ** 3)
    if np.linalg.norm(res) > tol * scale:
        raise ValidationError(f"X is not stationary (residual {np.linalg.norm(res):.3e})")


def canonicalize_to_diagonal_gram(X, S, D, tol=STATIONARY_TOL, group_tol=GROUP_TOL):
    """Rotate columns within equal-d blocks so that ``Y^T Y`` is diagonal.

    Requires ``(S - X X^T) X = X D``.  Preserves ``Y Y^T`` and ``<D, Y^T Y>``.
    """
    X = np.asarray(X, dtype=float)
    S = np.asarray(S, dtype=float)
    d = _diag_vector(D, X.shape[1])
    _check_stationary(X, S, d, tol)
    Y = X.copy()
    for idx in _groups(d, group_tol):
        Xj = X[:, idx]
        Gj = Xj.T @ Xj
        if np.abs(Gj - np.diag(np.diag(Gj))).max(initial=0.0) <= 1e-14 * max(1.0, np.abs(Gj).max()):
            continue
        _, Vj = sym_eigh(Gj)
        Y[:, idx] = Xj @ Vj
    return Y


def canonicalize_to_scaled_permutation(X, S, D, tol=STATIONARY_TOL, group_tol=GROUP_TOL):
    """Left-rotate rows within equal-s blocks to reach a scaled permutation.

    Requires diagonal S, ``X^T X`` diagonal and ``S X = X (D + X^T X)``.
    Preserves ``Y^T Y`` and ``<S, Y Y^T>``.
    """
    X = np.asarray(X, dtype=float)
    n, r = X.shape
    s = _diag_vector(S, n)
    d = _diag_vector(D, r)
    gram = X.T @ X
    if np.abs(gram - np.diag(np.diag(gram))).max(initial=0.0) > tol * max(1.0, np.abs(gram).max()):
        raise ValidationError("X^T X must be diagonal")
    _check_stationary(X, np.diag(s), d, tol)
    g = d + np.diag(gram)
    scale = max(1.0, np.abs(s).max(), np.abs(g).max())
    Y = X.copy()
    for rows in _groups(s, group_tol):
        cols = np.flatnonzero(np.abs(g - s[rows[0]]) <= group_tol * scale)
        if rows.size == 1 or cols.size == 0:
            continue
        Xj = X[np.ix_(rows, cols)]
        norms = np.linalg.norm(Xj, axis=0)
        nz = norms > 1e-12 * max(1.0, norms.max())
        U1 = Xj[:, nz] / norms[nz]
        U2 = null_space(U1.T) if U1.shape[1] else np.eye(rows.size)
        Uj = np.hstack([U1, U2])
        Y[rows, :] = Uj.T @ X[rows, :]
    return Y


def is_scaled_permutation(Y, tol=1e-8):
    Y = np.asarray(Y, dtype=float)
    big = np.abs(Y) > tol * max(1.0, np.abs(Y).max(initial=0.0))
    return bool(np.all(big.sum(axis=0) <= 1) and np.all(big.sum(axis=1) <= 1))
