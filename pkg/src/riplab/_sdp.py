"""Small dense primal barrier method for linear matrix inequalities.

Solves ``max c^T y`` subject to ``F_b(y) = F_b0 + sum_i y_i F_bi >= 0`` for a
list of blocks b, starting from a strictly feasible ``y``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cholesky, solve_triangular

from .exceptions import SolverStall


@dataclass
class Block:
    F0: np.ndarray          # (p, p)
    Fs: np.ndarray          # (m, p, p)

    @property
    def size(self):
        return self.F0.shape[0]

    def at(self, y):
        return self.F0 + np.tensordot(y, self.Fs, axes=1)


@dataclass
class BarrierResult:
    y: np.ndarray
    gap: float
    newton_steps: int
    stopped_early: bool = False


def _chol(F):
    try:
        return cholesky(0.5 * (F + F.T), lower=True, check_finite=False)
    except (LinAlgError, ValueError):
        return None


def _barrier_value(blocks, y):
    total = 0.0
    for b in blocks:
        L = _chol(b.at(y))
        if L is None:
            return np.inf
        d = np.diag(L)
        if np.any(d <= 0) or not np.all(np.isfinite(d)):
            return np.inf
        total -= 2.0 * np.sum(np.log(d))
    return total


def _derivatives(blocks, y):
    m = y.size
    g = np.zeros(m)
    H = np.zeros((m, m))
    for b in blocks:
        L = _chol(b.at(y))
        Linv = solve_triangular(L, np.eye(b.size), lower=True, check_finite=False)
        # M_i = L^-1 F_i L^-T, flattened; tr(F^-1 F_i) = tr(M_i)
        M = (Linv @ b.Fs @ Linv.T).reshape(m, -1)
        g -= M[:, :: b.size + 1].sum(axis=1)
        H += M @ M.T
    return g, H


def barrier_maximize(c, blocks, y0, *, t0=1.0, mu=8.0, gap_tol=1e-6, max_newton=500,
                     stop=None, stop_centered=None, newton_tol=1e-7):
    """Path-following on ``t c^T y + sum log det F_b(y)``.

    ``stop(y)`` may end the run early (used for phase-one searches);
    ``stop_centered(y)`` is checked only after each centering.
    Raises :class:`SolverStall` carrying the last iterate when the Newton
    budget is exhausted or no feasible step can be found.
    """
    y = np.array(y0, dtype=float)
    total_size = sum(b.size for b in blocks)
    if not np.isfinite(_barrier_value(blocks, y)):
        raise SolverStall("starting point is not strictly feasible", BarrierResult(y, np.inf, 0))
    t = t0
    steps = 0
    while True:
        while True:
            if stop is not None and stop(y):
                return BarrierResult(y, total_size / t, steps, True)
            if steps >= max_newton:
                raise SolverStall("Newton budget exhausted", BarrierResult(y, total_size / t, steps))
            g, H = _derivatives(blocks, y)
            grad = -t * c + g
            H = 0.5 * (H + H.T)
            reg = 1e-14 * max(np.trace(H) / H.shape[0], 1.0)
            try:
                dy = -np.linalg.solve(H + reg * np.eye(H.shape[0]), grad)
            except np.linalg.LinAlgError:
                dy = -np.linalg.lstsq(H, grad, rcond=None)[0]
            dec = float(-grad @ dy)
            steps += 1
            if dec / 2.0 <= newton_tol:
                break
            phi0 = -t * c @ y + _barrier_value(blocks, y)
            step = 1.0
            while step > 1e-14:
                y_new = y + step * dy
                phi = -t * c @ y_new + _barrier_value(blocks, y_new)
                if np.isfinite(phi) and phi <= phi0 - 0.01 * step * dec:
                    break
                step *= 0.5
            else:
                raise SolverStall("line search failed", BarrierResult(y, total_size / t, steps))
            moved = np.linalg.norm(y_new - y) > 1e-15 * max(1.0, np.linalg.norm(y))
            y = y_new
            if not moved:
                break       # rounding floor reached: as centered as arithmetic allows
        gap = total_size / t
        if gap <= gap_tol:
            return BarrierResult(y, gap, steps)
        if stop_centered is not None and stop_centered(y):
            return BarrierResult(y, gap, steps, True)
        t *= mu
