"""Zero-order coordinate pattern search for small threshold values."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bounds import delta_lower_bound, tradeoff_bound
from .exceptions import RiplabError, ValidationError
from .linalg import FactorPair

OBJECTIVES = ("lb", "tradeoff", "exact")
Z_RANK_TOL = 1e-6


@dataclass
class SearchConfig:
    n: int
    r: int
    r_star: int
    seed: int = 0
    budget: int = 10_000
    objective: str = "lb"
    initial_step: float = 0.5
    min_step: float = 1e-7
    start: FactorPair | None = field(default=None, repr=False)

    def __post_init__(self):
        if not (1 <= self.r_star <= self.r < self.n):
            raise ValidationError(f"need 1 <= r_star <= r < n, got {self.n}, {self.r}, {self.r_star}")
        if self.objective not in OBJECTIVES:
            raise ValidationError(f"objective must be one of {OBJECTIVES}")
        if self.budget < 1:
            raise ValidationError("budget must be positive")


@dataclass
class SearchResult:
    best_fp: FactorPair
    best_value: float
    trace: list          # (evaluation index, best value so far)
    evaluations: int


def objective_function(name):
    if name == "lb":
        return delta_lower_bound
    if name == "tradeoff":
        return lambda fp: tradeoff_bound(fp).delta_bound
    from .lmi import delta_exact

    return delta_exact


def _unpack(theta, n, r, rs):
    X = theta[: n * r].reshape(n, r, order="F")
    Z = theta[n * r:].reshape(n, rs, order="F")
    return X, Z


def pattern_search_min_delta(config: SearchConfig) -> SearchResult:
    """Coordinate pattern search over the entries of (X, Z).

    Each sweep tries ``+/- step`` along every coordinate, keeping the first
    improvement.  A sweep without improvement halves the step; once the step
    drops below ``min_step`` the search restarts from a fresh random point.
    Evaluations are counted against ``budget``.
    """
    n, r, rs = config.n, config.r, config.r_star
    rng = np.random.default_rng(config.seed)
    f = objective_function(config.objective)
    evals = 0

    def value(theta):
        nonlocal evals
        evals += 1
        X, Z = _unpack(theta, n, r, rs)
        s = np.linalg.svd(Z, compute_uv=False)
        if s[-1] <= Z_RANK_TOL * max(s[0], 1e-300):
            return np.inf
        try:
            return float(f(FactorPair(X, Z, check_rank=False)))
        except RiplabError:
            return np.inf

    def normalize(theta):
        # the threshold is invariant to a common scaling of X and Z
        zn = np.linalg.norm(theta[n * r:])
        return theta / zn if zn > 0 else theta

    if config.start is not None:
        theta = np.concatenate([config.start.X.ravel(order="F"), config.start.Z.ravel(order="F")])
    else:
        theta = rng.standard_normal(n * (r + rs))
    theta = normalize(theta)
    cur = value(theta)
    best_theta, best = theta.copy(), cur
    trace = [(evals, best)]
    step = config.initial_step
    dim = theta.size

    while evals < config.budget:
        improved = False
        for i in range(dim):
            for sgn in (1.0, -1.0):
                if evals >= config.budget:
                    break
                cand = theta.copy()
                cand[i] += sgn * step
                v = value(cand)
                if v < cur:
                    theta, cur, improved = normalize(cand), v, True
                    break
        if cur < best:
            best_theta, best = theta.copy(), cur
            trace.append((evals, best))
        if not improved:
            step *= 0.5
            if step < config.min_step and evals < config.budget:
                theta = normalize(rng.standard_normal(dim))
                cur = value(theta)
                step = config.initial_step
                if cur < best:
                    best_theta, best = theta.copy(), cur
                    trace.append((evals, best))

    X, Z = _unpack(best_theta, n, r, rs)
    return SearchResult(FactorPair(X, Z, check_rank=False), best, trace, evals)
