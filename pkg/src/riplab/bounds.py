"""Closed-form and numeric lower bounds on the threshold function.

The threshold delta(X, Z) is the smallest RIP constant of any measurement
operator for which X is a spurious second-order point with ground truth
ZZ^T.  This module evaluates cheap lower bounds on it:

* ``delta_lower_bound``: the closed form gamma(alpha, beta);
* ``tradeoff_bound``: max over t of (cos_theta(t) - t) / (1 + t), with
  cos_theta evaluated exactly through its one-dimensional reduction.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._search import maximize_scalar
from .exceptions import DegenerateBeta, ValidationError, ZeroErrorVector
from .linalg import RANK_RTOL, FactorPair, column_projector, sym_eigh


@dataclass(frozen=True)
class AlphaBetaSummary:
    """Scalar summaries of a factor pair.

    Attributes
    ----------
    alpha, beta : float
    e_norm : float
        ``||XX^T - ZZ^T||_F``.
    d : ndarray
        Eigenvalues of ``Z_perp^T Z_perp`` in ascending order, where
        ``Z_perp = (I - XX^+) Z`` and Z is zero-padded to width r.
    s_min_sq : float
        ``lambda_min(X^T X)``, zero when X is numerically rank deficient.
    degenerate_zperp : bool
        True when ``Z_perp`` vanishes.
    """

    alpha: float
    beta: float
    e_norm: float
    d: np.ndarray
    s_min_sq: float
    degenerate_zperp: bool

    @property
    def degenerate(self):
        return self.degenerate_zperp or self.beta == 0.0


@dataclass(frozen=True)
class TradeoffResult:
    delta_bound: float
    t_star: float
    cos_theta_at_t_star: float


def compute_alpha_beta(fp: FactorPair) -> AlphaBetaSummary:
    X, Z = fp.X, fp.Z_padded
    E = X @ X.T - Z @ Z.T
    e_norm = float(np.linalg.norm(E))
    scale = max(np.linalg.norm(X) ** 2, np.linalg.norm(Z) ** 2, np.finfo(float).tiny)
    if e_norm <= RANK_RTOL * scale:
        raise ZeroErrorVector("XX^T equals ZZ^T; the threshold is undefined")

    sx = np.linalg.svd(X, compute_uv=False)
    if sx.size < X.shape[1] or sx.min() <= RANK_RTOL * sx.max():
        s_min_sq = 0.0
    else:
        s_min_sq = float(max(sym_eigh(X.T @ X)[0][0], 0.0))

    Zp = Z - column_projector(X) @ Z
    if np.linalg.norm(Zp) <= RANK_RTOL * max(np.linalg.norm(Z), 1.0):
        d = np.zeros(fp.r)
        return AlphaBetaSummary(0.0, s_min_sq / e_norm, e_norm, d, s_min_sq, True)

    d = np.maximum(sym_eigh(Zp.T @ Zp)[0], 0.0)
    dn = float(np.linalg.norm(d))
    alpha = min(dn / e_norm, 1.0)
    beta = s_min_sq * float(d.sum()) / (e_norm * dn)
    return AlphaBetaSummary(alpha, beta, e_norm, d, s_min_sq, False)


def gamma_closed_form(alpha, beta):
    """Closed-form maximum of ``(psi(alpha, beta, t) - t) / (1 + t)`` over t >= 0."""
    alpha, beta = float(alpha), float(beta)
    if not 0.0 <= alpha <= 1.0 or beta < 0.0:
        raise ValidationError("need 0 <= alpha <= 1 and beta >= 0")
    c = np.sqrt(1.0 - alpha**2)
    if beta >= alpha / (1.0 + c):
        return float(c)
    val = (1.0 - 2.0 * alpha * beta + beta**2) / (1.0 - beta**2)
    return float(min(max(val, 0.0), 1.0))


def delta_lower_bound(fp: FactorPair) -> float:
    ab = compute_alpha_beta(fp)
    if ab.degenerate:
        return 1.0
    return gamma_closed_form(ab.alpha, ab.beta)


def psi(alpha, beta, t):
    """Rank-one value of cos_theta(t); also a lower bound for any rank.

    Vectorized over ``t``.
    """
    if beta <= 0:
        raise ValidationError("psi requires beta > 0")
    t = np.asarray(t, dtype=float)
    u = t / beta
    inside = u <= alpha
    uc = np.minimum(u, 1.0)
    val = uc * alpha + np.sqrt(1.0 - uc**2) * np.sqrt(1.0 - alpha**2)
    out = np.where(inside, val, 1.0)
    return float(out) if out.ndim == 0 else out


def max_tradeoff_psi(alpha, beta):
    """Numeric maximum of ``(psi - t) / (1 + t)``; cross-checks ``gamma_closed_form``."""
    if alpha == 0.0:
        return 1.0
    # psi saturates at 1 for t >= alpha * beta, after which the ratio decreases
    t_cap = alpha * beta
    _, val = maximize_scalar(
        lambda t: (psi(alpha, beta, t) - t) / (1.0 + t), 0.0, t_cap, vectorized=True
    )
    return val


def inner_value(d, a, b):
    """``max {d^T w : w >= 0, ||w|| <= a, 1^T w <= b}`` via its scalar dual.

    The dual ``min_{rho >= 0} a ||(d - rho)_+|| + b rho`` is convex and
    smooth between consecutive entries of d, so its minimum is among the
    breakpoints and one stationary point per interval.  Vectorized over
    ``a`` (``b`` scalar).
    """
    d = np.sort(np.asarray(d, dtype=float))[::-1]
    a = np.atleast_1d(np.asarray(a, dtype=float))
    k = np.arange(1, d.size + 1)
    s1 = np.cumsum(d)
    v = np.maximum(np.cumsum(d**2) - s1**2 / k, 0.0)
    upper = d
    lower = np.maximum(np.append(d[1:], 0.0), 0.0)

    A = a[:, None]
    denom = A**2 - b**2 / k
    with np.errstate(divide="ignore", invalid="ignore"):
        u = np.where(denom > 0, b * np.sqrt(v / np.where(denom > 0, denom, 1.0)), np.inf)
    rho_stat = np.clip((s1 - u) / k, lower, upper)
    rho_stat = np.where(np.isfinite(rho_stat), rho_stat, lower)
    cands = np.concatenate(
        [np.broadcast_to(np.append(d, 0.0).clip(0.0), (a.size, d.size + 1)), rho_stat], axis=1
    )
    excess = np.maximum(d[None, None, :] - cands[:, :, None], 0.0)
    phi = A * np.linalg.norm(excess, axis=2) + b * cands
    return phi.min(axis=1)


def _cos_theta_parts(ab: AlphaBetaSummary, t):
    if ab.degenerate_zperp:
        return 1.0, 0.0
    if ab.s_min_sq == 0.0:
        raise DegenerateBeta("sigma_min(X) = 0; the bound degenerates to 1")
    t = float(t)
    if t < 0:
        raise ValidationError("t must be nonnegative")
    c = np.sqrt(max(1.0 - ab.alpha**2, 0.0))
    b = t / ab.s_min_sq
    tau_max = min(1.0, ab.e_norm * b)

    def h(tau):
        tau = np.asarray(tau, dtype=float)
        return c * np.sqrt(np.maximum(1.0 - tau**2, 0.0)) + inner_value(ab.d, tau / ab.e_norm, b)

    tau, val = maximize_scalar(h, 0.0, tau_max, vectorized=True)
    return min(val, 1.0), tau


def cos_theta(fp: FactorPair, t) -> float:
    """Exact value of the reduced cos-theta problem at trade-off parameter t.

    ``max_{tau, w} sqrt(1-alpha^2) sqrt(1-tau^2) + d^T w`` over
    ``w >= 0``, ``||w|| <= tau/||e|| <= t/s_r``, ``1^T w <= t/s_r`` and
    ``tau <= 1``.
    """
    return _cos_theta_parts(compute_alpha_beta(fp), t)[0]


def tradeoff_bound(fp: FactorPair) -> TradeoffResult:
    ab = compute_alpha_beta(fp)
    if ab.degenerate:
        return TradeoffResult(1.0, 0.0, 1.0)
    # cos_theta <= 1 with equality once t >= alpha * beta, so larger t only
    # lowers (cos_theta - t) / (1 + t)
    t_cap = ab.alpha * ab.beta

    def objective(t):
        return (_cos_theta_parts(ab, t)[0] - t) / (1.0 + t)

    t_star, val = maximize_scalar(objective, 0.0, t_cap)
    return TradeoffResult(float(min(val, 1.0)), t_star, _cos_theta_parts(ab, t_star)[0])


def check_valid_inequalities(alpha, beta, r, r_star, tol=1e-9) -> bool:
    """Necessary conditions on (alpha, beta) for pairs with rank(Z) = r_star."""
    if not 1 <= r_star <= r:
        raise ValidationError("need 1 <= r_star <= r")
    ratio = r / r_star
    ok = True
    if beta <= alpha:
        ok &= alpha**2 + ratio * beta**2 <= 1.0 + tol
    if beta >= alpha:
        ok &= alpha <= 1.0 / np.sqrt(1.0 + ratio) + tol
    return bool(ok)


def numeric_cardinality_margin(x) -> float:
    """``1^T (I - xx^T/||x||^2) 1 - ||(1 - x)_+||^2`` for ``x >= 0`` with ``1^T x <= ||x||^2``.

    Nonnegative whenever the hypotheses hold.
    """
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValidationError("x must be nonnegative")
    nx2 = float(x @ x)
    if nx2 == 0.0 or x.sum() > nx2 * (1 + 1e-12):
        raise ValidationError("need 1^T x <= ||x||^2 with x != 0")
    lhs = x.size - x.sum() ** 2 / nx2
    return float(lhs - np.sum(np.maximum(1.0 - x, 0.0) ** 2))
