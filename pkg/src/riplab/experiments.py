"""Stochastic-gradient landscape experiments for Burer-Monteiro sensing.

Trials are independent and vectorized as a batch: trial ``i`` draws its
initial point and its row indices from ``default_rng(seed + i)``, so a
single trial reproduces bit-for-bit whether it runs alone or in a batch.
"""
from __future__ import annotations

import csv
import io
from dataclasses import asdict, dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from .counterexamples import SensingOperator, build_example_operator
from .exceptions import DimensionMismatch, ValidationError
from .linalg import vectorize

CSV_COLUMNS = ("rank", "trial", "seed", "final_distance", "final_loss", "success")


@dataclass(frozen=True)
class SgdConfig:
    steps: int = 10_000
    learning_rate: float = 1e-3
    momentum: float = 0.9
    batch_size: int = 1
    init_std: float = 1.0
    success_threshold: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.steps < 1 or self.batch_size < 1:
            raise ValidationError("steps and batch_size must be positive")
        if not 0.0 <= self.momentum < 1.0:
            raise ValidationError("momentum must lie in [0, 1)")
        if not self.learning_rate > 0:
            raise ValidationError("learning_rate must be positive")
        if self.init_std < 0 or self.success_threshold < 0:
            raise ValidationError("init_std and success_threshold must be nonnegative")


@dataclass(frozen=True)
class TrialRecord:
    seed: int
    final_distance: float
    final_loss: float
    success: bool
    diverged: bool = False


@dataclass
class ExperimentSummary:
    per_trial: list = field(default_factory=list)

    @property
    def successes(self):
        return sum(t.success for t in self.per_trial)

    @property
    def failures(self):
        return len(self.per_trial) - self.successes

    def to_dict(self):
        return {
            "successes": self.successes,
            "failures": self.failures,
            "per_trial": [asdict(t) for t in self.per_trial],
        }


def _batched_loss(stacked, b, X):
    M = X @ X.transpose(0, 2, 1)
    T, n, _ = M.shape
    res = M.transpose(0, 2, 1).reshape(T, n * n) @ stacked.T - b
    return np.sum(res * res, axis=1)


def _initial_points(seeds, n, r, cfg, steps, m):
    X = np.empty((len(seeds), n, r))
    idx = np.empty((len(seeds), steps, cfg.batch_size), dtype=np.int64)
    for t, s in enumerate(seeds):
        rng = np.random.default_rng(int(s))
        X[t] = rng.normal(0.0, cfg.init_std, size=(n, r))
        idx[t] = rng.integers(0, m, size=(steps, cfg.batch_size))
    return X, idx


def _sgd_batch(A: SensingOperator, Z, r, cfg: SgdConfig, seeds, X0=None):
    n = A.n
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    if Z.shape[0] != n:
        raise DimensionMismatch(f"Z must have {n} rows")
    b = A.apply(Z @ Z.T)
    X, bad = _sgd_core(A, b, r, cfg, seeds, X0)
    return X, b, bad


def _sgd_core(A: SensingOperator, b, r, cfg: SgdConfig, seeds, X0=None):
    """Heavy-ball SGD on ``sum_k (<A_k, XX^T> - b_k)^2``, one trajectory per seed."""
    n = A.n
    if r < 1:
        raise ValidationError("search rank must be positive")
    mats = A.stacked.reshape(A.m, n, n).transpose(0, 2, 1)    # mats[k] = A_k
    sym = mats + mats.transpose(0, 2, 1)
    X, idx = _initial_points(seeds, n, r, cfg, cfg.steps, A.m)
    if X0 is not None:
        X[:] = np.asarray(X0, dtype=float)
    V = np.zeros_like(X)
    bad = np.zeros(len(seeds), dtype=bool)
    rows = np.arange(len(seeds))
    with np.errstate(over="ignore", invalid="ignore"):
        for step in range(cfg.steps):
            G = np.zeros_like(X)
            for j in range(cfg.batch_size):
                k = idx[rows, step, j]
                M = X @ X.transpose(0, 2, 1)
                inner = np.einsum("tab,tab->t", mats[k], M) - b[k]
                G += 2.0 * inner[:, None, None] * (sym[k] @ X)
            V = cfg.momentum * V + G / cfg.batch_size
            X = X - cfg.learning_rate * V
            if step % 256 == 255:
                fin = np.isfinite(X).all(axis=(1, 2))
                if not fin.all():
                    # freeze diverged trials so the rest of the batch stays finite
                    bad |= ~fin
                    X[~fin] = 0.0
                    V[~fin] = 0.0
        bad |= ~np.isfinite(X).all(axis=(1, 2))
    return X, bad


def _records(A, Z, X, b, bad, seeds, cfg):
    Mstar = Z @ Z.T
    out = []
    losses = _batched_loss(A.stacked, b, X)
    for t, s in enumerate(seeds):
        if bad[t]:
            out.append(TrialRecord(int(s), float("inf"), float("inf"), False, True))
            continue
        dist = float(np.linalg.norm(X[t] @ X[t].T - Mstar))
        out.append(TrialRecord(int(s), dist, float(losses[t]), dist <= cfg.success_threshold))
    return out


def run_sgd_trial(A: SensingOperator, Z, r, cfg: SgdConfig, X0=None) -> TrialRecord:
    """One SGD trial seeded by ``cfg.seed``; ``X0`` overrides the random start."""
    X, b, bad = _sgd_batch(A, Z, r, cfg, [cfg.seed], None if X0 is None else X0[None])
    return _records(A, np.atleast_2d(np.asarray(Z, dtype=float)), X, b, bad, [cfg.seed], cfg)[0]


def run_trials(A: SensingOperator, Z, r, cfg: SgdConfig, trials) -> ExperimentSummary:
    seeds = [cfg.seed + i for i in range(trials)]
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    X, b, bad = _sgd_batch(A, Z, r, cfg, seeds)
    return ExperimentSummary(_records(A, Z, X, b, bad, seeds, cfg))


def run_overparam_experiment(n=4, trials=100, ranks=(1, 2), cfg: SgdConfig | None = None):
    """SGD on the (n, 1, 1) example operator at each search rank.

    Returns ``{rank: ExperimentSummary}``.
    """
    cfg = cfg or SgdConfig()
    A = build_example_operator(n, 1, 1)
    Z = np.eye(n)[:, :1]
    return {int(r): run_trials(A, Z, int(r), cfg, trials) for r in ranks}


def summaries_to_csv(summaries) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for rank in sorted(summaries):
        for i, t in enumerate(sorted(summaries[rank].per_trial, key=lambda t: t.seed)):
            w.writerow([rank, i, t.seed, repr(t.final_distance), repr(t.final_loss), int(t.success)])
    return buf.getvalue()


def gaussian_operator(n, m, rng) -> SensingOperator:
    return SensingOperator(n, rng.standard_normal((m, n * n)))


def _gd_armijo(stacked, b, X, max_iter, ftol):
    n = X.shape[0]

    def fg(X):
        res = stacked @ vectorize(X @ X.T) - b
        R = (stacked.T @ res).reshape(n, n, order="F")
        return float(res @ res), 2.0 * (R + R.T) @ X

    f, g = fg(X)
    alpha = 1.0
    for it in range(max_iter):
        if f <= ftol:
            break
        g2 = float(np.sum(g * g))
        while True:
            Xc = X - alpha * g
            fc, gc = fg(Xc)
            if fc <= f - 1e-4 * alpha * g2 or alpha < 1e-20:
                break
            alpha *= 0.5
        # Barzilai-Borwein trial step for the next backtracking search
        dX, dG = Xc - X, gc - g
        sy = float(np.sum(dX * dG))
        alpha = float(np.sum(dX * dX)) / sy if sy > 0 else 2.0 * alpha
        alpha = min(max(alpha, 1e-12), 1e6)
        X, f, g = Xc, fc, gc
    return X, f, it


def trivial_regime_check(n=3, r=3, trials=20, cfg: SgdConfig | None = None, max_iter=20_000,
                         ftol=1e-10) -> ExperimentSummary:
    """Full-gradient descent with Armijo backtracking when ``r >= n``.

    Each trial draws a Gaussian operator with ``n^2`` rows, a full-rank
    ground truth ``Z`` (n x n) and a Gaussian start from its own seed.
    Success means final loss ``<= 1e-6``.
    """
    cfg = cfg or SgdConfig()
    if r < n:
        raise ValidationError("the trivial regime needs r >= n")
    out = []
    for i in range(trials):
        s = cfg.seed + i
        rng = np.random.default_rng(s)
        A = gaussian_operator(n, n * n, rng)
        Z = rng.standard_normal((n, n))
        X0 = rng.normal(0.0, cfg.init_std, size=(n, r))
        b = A.apply(Z @ Z.T)
        X, f, _ = _gd_armijo(A.stacked, b, X0, max_iter, ftol)
        dist = float(np.linalg.norm(X @ X.T - Z @ Z.T))
        out.append(TrialRecord(s, dist, f, bool(f <= 1e-6)))
    return ExperimentSummary(out)


class BurerMonteiroSGD(RegressorMixin, BaseEstimator):
    """Factored least-squares fit ``b ~ A vec(X X^T)`` by heavy-ball SGD.

    ``fit`` takes the stacked sensing matrix (rows ``vec(A_k)``) and the
    measurements; ``predict`` maps a stacked sensing matrix to predicted
    measurements of the learned ``X X^T``.
    """

    def __init__(self, rank=1, steps=10_000, learning_rate=1e-3, momentum=0.9, init_std=1.0,
                 random_state=0):
        self.rank = rank
        self.steps = steps
        self.learning_rate = learning_rate
        self.momentum = momentum
        self.init_std = init_std
        self.random_state = random_state

    def fit(self, X, y):
        stacked = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float).ravel()
        n = int(round(np.sqrt(stacked.shape[1])))
        if n * n != stacked.shape[1] or stacked.shape[0] != y.size:
            raise DimensionMismatch("X must be m x n^2 with m measurements in y")
        cfg = SgdConfig(steps=self.steps, learning_rate=self.learning_rate, momentum=self.momentum,
                        init_std=self.init_std, seed=int(self.random_state))
        Xf, bad = _sgd_core(SensingOperator(n, stacked), y, int(self.rank), cfg, [cfg.seed])
        self.factor_ = Xf[0]
        self.diverged_ = bool(bad[0])
        res = stacked @ vectorize(self.factor_ @ self.factor_.T) - y
        self.loss_ = float(res @ res)
        self.n_features_in_ = stacked.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "factor_")
        return np.asarray(X, dtype=float) @ vectorize(self.factor_ @ self.factor_.T)

