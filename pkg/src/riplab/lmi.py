"""Exact threshold delta(X, Z) through its convex LMI reformulation.

We solve the eta-form

    max eta  s.t.  J^T H e = 0,
                   2 I_r (x) mat(He) + J^T H J >= 0,
                   eta I <= H <= I,

and report ``delta = (1 - eta) / (1 + eta)``.  H is parameterized on the
symmetric-matrix subspace, ``H = S Hs S^T + (I - S S^T)``, because e and
range(J) are vectorized symmetric matrices.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import null_space

from ._sdp import Block, barrier_maximize
from .bounds import compute_alpha_beta
from .exceptions import DimensionMismatch, SolverStall
from .linalg import FactorPair, build_error_jacobian, materialize, symmetric_basis, sym_eigh

EQ_TOL = 1e-8
PSD_TOL = 1e-8
GAP_TOL = 1e-6
MAX_NEWTON = 500


@dataclass
class LmiProblem:
    """Assembled data of the eta-form LMI for one factor pair.

    ``e`` and ``J`` are the unscaled error vector and Jacobian.  The solver
    works on a copy normalized to ``||e|| = 1``; delta is invariant under
    that rescaling.
    """

    n: int
    r: int
    e: np.ndarray
    J: np.ndarray
    symmetric_subspace_dim: int
    degenerate: bool = False
    fp: FactorPair | None = field(default=None, repr=False)

    @property
    def block_sizes(self):
        """Sizes of the (box, Hessian-term, equality) constraint groups."""
        return self.symmetric_subspace_dim, self.n * self.r, self.n * self.r


@dataclass
class LmiSolution:
    delta: float
    eta: float
    H: np.ndarray
    equality_residual: float
    psd_margins: tuple
    gap: float
    newton_steps: int = 0

    def to_dict(self, include_matrix=True):
        out = {
            "delta": self.delta,
            "eta": self.eta,
            "equality_residual": self.equality_residual,
            "psd_margins": {"hessian_term": self.psd_margins[0], "box": self.psd_margins[1]},
            "gap": self.gap,
            "newton_steps": self.newton_steps,
        }
        if include_matrix:
            out["H"] = self.H
        return out


def assemble_lmi(fp: FactorPair) -> LmiProblem:
    ab = compute_alpha_beta(fp)  # raises ZeroErrorVector when e = 0
    ej = build_error_jacobian(fp)
    n, r = fp.n, fp.r
    return LmiProblem(
        n=n,
        r=r,
        e=ej.e,
        J=ej.J,
        symmetric_subspace_dim=n * (n + 1) // 2,
        degenerate=ab.degenerate,
        fp=fp,
    )


def _hessian_term(J, e, H, r):
    n = int(round(np.sqrt(e.size)))
    G = materialize(H @ e, n)
    return 2.0 * np.kron(np.eye(r), G) + J.T @ H @ J


def _reduced_blocks(p: LmiProblem):
    """Build the LMI blocks over coordinates of the equality null space.

    Returns the box-basis matrices, the Hessian-term blocks restricted to
    range(J^T), and the null-space basis mapping reduced coordinates to the
    orthonormal coordinates of Hs.
    """
    n, r = p.n, p.r
    N = p.symmetric_subspace_dim
    scale = np.linalg.norm(p.e)
    e = p.e / scale
    J = p.J / np.sqrt(scale)
    S = symmetric_basis(n)
    Jh = S.T @ J                    # (N, nr)
    eh = S.T @ e                    # (N,)
    Bn = symmetric_basis(N)         # vec(Hs) = Bn x
    K = Bn.shape[1]
    E = Bn.T.reshape(K, N, N).transpose(0, 2, 1)   # E_k = mat(Bn[:, k])

    # equality J^T S Hs eh = 0, linear in x
    Eq = np.einsum("ai,kab,b->ik", Jh, E, eh)
    Nq = null_space(Eq, rcond=1e-10)             # (K, m)

    # Hessian-term basis restricted to range(J^T)
    U, sv, _ = np.linalg.svd(J.T, full_matrices=False)
    R = U[:, sv > 1e-9 * sv.max()]
    SEe = np.einsum("pa,kab,b->kp", S, E, eh)      # vec(S E_k eh), (K, n^2)
    G = SEe.reshape(K, n, n).transpose(0, 2, 1)     # column-major mat
    I_r = np.eye(r)
    F3 = 2.0 * np.einsum("ij,kab->kiajb", I_r, G).reshape(K, n * r, n * r)
    # kron(I_r, G_k) has entry (i*n + a, j*n + b) = [i == j] G_k[a, b]
    F3 = F3 + np.einsum("ai,kab,bj->kij", Jh, E, Jh)
    F3 = np.einsum("ia,kij,jb->kab", R, F3, R)

    Ebox = np.einsum("km,kab->mab", Nq, E)
    F3r = np.einsum("km,kab->mab", Nq, F3)
    return Ebox, F3r, Nq, E, S, e, J


def _assemble_H(Nq, E, S, x_red):
    Hs = np.einsum("k,kab->ab", Nq @ x_red, E)
    n2 = S.shape[0]
    return S @ Hs @ S.T + (np.eye(n2) - S @ S.T), Hs


def _phase_one(Ebox, F3r):
    """Find reduced coordinates with the Hessian term strictly positive definite."""
    m, N, _ = Ebox.shape
    q = F3r.shape[1]
    I_N, I_q = np.eye(N), np.eye(q)
    # y = (x, s): maximize s with -I < Hs < I and F3(x) - s I > 0
    zN = np.zeros((1, N, N))
    zq = np.zeros((1, q, q))
    blocks = [
        Block(I_N, np.concatenate([Ebox, zN])),
        Block(I_N, np.concatenate([-Ebox, zN])),
        Block(np.zeros((q, q)), np.concatenate([F3r, -I_q[None]])),
    ]
    c = np.zeros(m + 1)
    c[-1] = 1.0
    y0 = np.zeros(m + 1)
    y0[-1] = -1.0
    # any centered point with s > 0 is a strictly feasible phase-two start
    res = barrier_maximize(c, blocks, y0, gap_tol=1e-9, stop=lambda y: y[-1] > 1e-3,
                           stop_centered=lambda y: y[-1] > 0, max_newton=MAX_NEWTON)
    return res.y[:-1], res.y[-1], res.newton_steps


def _trivial_solution(p: LmiProblem):
    # H = 0 with delta = 1 satisfies every constraint
    n2 = p.n * p.n
    return LmiSolution(1.0, 0.0, np.zeros((n2, n2)), 0.0, (0.0, 0.0), 0.0, 0)


def solve_delta_exact(p: LmiProblem, tol: float = GAP_TOL) -> LmiSolution:
    """Maximize eta over the LMI and return the certified threshold.

    Raises
    ------
    SolverStall
        If the barrier iteration does not reach ``tol``; ``.solution``
        carries the last iterate converted to an :class:`LmiSolution`.
    """
    if p.degenerate:
        return _trivial_solution(p)
    Ebox, F3r, Nq, E, S, _, _ = _reduced_blocks(p)
    m, N, _ = Ebox.shape
    q = F3r.shape[1]

    x1, s1, steps1 = _phase_one(Ebox, F3r)
    if s1 <= 0:
        raise SolverStall("no strictly feasible point found", _trivial_solution(p))

    lam = sym_eigh(np.einsum("m,mab->ab", x1, Ebox))[0]
    eta0 = lam[0] - 0.5 * (1.0 + lam[0])
    I_N = np.eye(N)
    zN = np.zeros((1, N, N))
    blocks = [
        Block(np.zeros((N, N)), np.concatenate([Ebox, -I_N[None]])),
        Block(I_N, np.concatenate([-Ebox, zN])),
        Block(np.zeros((q, q)), np.concatenate([F3r, np.zeros((1, q, q))])),
    ]
    c = np.zeros(m + 1)
    c[-1] = 1.0
    y0 = np.concatenate([x1, [eta0]])
    try:
        res = barrier_maximize(c, blocks, y0, gap_tol=tol, max_newton=MAX_NEWTON - steps1)
    except SolverStall as exc:
        y = exc.solution.y
        raise SolverStall(str(exc), _package(p, Nq, E, S, y, exc.solution.gap, steps1)) from None
    return _package(p, Nq, E, S, res.y, res.gap, steps1 + res.newton_steps)


def _package(p, Nq, E, S, y, gap, steps):
    eta = float(y[-1])
    if eta <= 0.0:
        # H = 0, eta = 0 is feasible and no worse than the interior iterate
        sol = _trivial_solution(p)
        sol.gap, sol.newton_steps = float(gap), int(steps)
        return sol
    delta = (1.0 - eta) / (1.0 + eta)
    H_eta, _ = _assemble_H(Nq, E, S, y[:-1])
    H = (1.0 + delta) * H_eta
    rep = verify_feasible_point(p, H, delta)
    return LmiSolution(
        delta=float(delta),
        eta=eta,
        H=H,
        equality_residual=rep["equality_residual"],
        psd_margins=(rep["hessian_margin"], rep["box_margin"]),
        gap=float(gap),
        newton_steps=int(steps),
    )


def verify_feasible_point(p: LmiProblem, H, delta, tol: float = 1e-8) -> dict:
    """Check ``(delta, H)`` against the delta-form constraints.

    The equality residual is ``||J^T H e||`` relative to ``||J|| ||e||``;
    the Hessian-term margin is its minimum eigenvalue relative to
    ``||e|| + ||J||^2``; the box margin is absolute.
    """
    H = np.asarray(H, dtype=float)
    n2 = p.n * p.n
    if H.shape != (n2, n2):
        raise DimensionMismatch(f"H must be {n2}x{n2}, got {H.shape}")
    e, J = p.e, p.J
    Jn, en = np.linalg.norm(J, 2), np.linalg.norm(e)
    eq = float(np.linalg.norm(J.T @ H @ e) / max(Jn * en, 1e-300))
    hess = _hessian_term(J, e, H, p.r)
    hess_margin = float(sym_eigh(hess, check=False)[0][0] / max(en + Jn**2, 1e-300))
    w = sym_eigh(H, check=False)[0]
    box_margin = float(min(w[0] - (1.0 - delta), (1.0 + delta) - w[-1]))
    return {
        "feasible": bool(eq <= tol and hess_margin >= -tol and box_margin >= -tol),
        "equality_residual": eq,
        "hessian_margin": hess_margin,
        "box_margin": box_margin,
    }


def delta_exact(fp: FactorPair, tol: float = GAP_TOL) -> float:
    """Convenience wrapper returning only the threshold value."""
    return solve_delta_exact(assemble_lmi(fp), tol).delta
