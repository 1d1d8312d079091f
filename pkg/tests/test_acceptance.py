"""Acceptance gate: ten end-to-end criteria at their stated tolerances.

Each test prints one ``PASS``/``FAIL`` line (visible with or without ``-s``)
before asserting, so a run doubles as a readable gate report.
"""
import json
import time

import numpy as np
import pytest

from riplab import cli
from riplab.bounds import (
    check_valid_inequalities,
    compute_alpha_beta,
    delta_lower_bound,
    gamma_closed_form,
    max_tradeoff_psi,
    numeric_cardinality_margin,
    tradeoff_bound,
)
from riplab.counterexamples import (
    build_example_operator,
    example_constants,
    example_points,
    full_space_rip_certificate,
    gradient,
    loss,
    verify_second_order_point,
)
from riplab.eckart_young import (
    EyInstance,
    canonicalize_to_diagonal_gram,
    canonicalize_to_scaled_permutation,
    ey_descent_oracle,
    ey_objective,
    is_scaled_permutation,
    solve_regularized_ey,
)
from riplab.experiments import SgdConfig, run_overparam_experiment, trivial_regime_check
from riplab.linalg import FactorPair, build_error_jacobian, residual_projector, symmetric_basis
from riplab.lmi import delta_exact
from riplab.search import SearchConfig, pattern_search_min_delta

HAND = FactorPair(np.array([[0.0], [1.0]]), np.array([[np.sqrt(2)], [0.0]]))


@pytest.fixture
def gate(capsys):
    def report(number, ok, detail):
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} [criterion {number:>2}] {detail}")
        assert ok, detail

    return report


def random_pair(rng, n, r, rs):
    return FactorPair(rng.standard_normal((n, r)), rng.standard_normal((n, rs)))


def test_criterion_01_sharp_equal_rank_threshold(gate, tmp_path, capsys):
    path = tmp_path / "hand.json"
    path.write_text(json.dumps({"X": {"rows": 2, "cols": 1, "entries": [0.0, 1.0]},
                                "Z": {"rows": 2, "cols": 1, "entries": [float(np.sqrt(2)), 0.0]}}))
    t0 = time.perf_counter()
    assert cli.main(["bounds", str(path)]) == 0
    lb = json.loads(capsys.readouterr().out)["delta_lb"]
    assert cli.main(["delta-exact", "--no-matrix", str(path)]) == 0
    ex = json.loads(capsys.readouterr().out)["delta"]
    elapsed = time.perf_counter() - t0
    ok = abs(lb - 0.5) <= 1e-5 and abs(ex - 0.5) <= 1e-5 and elapsed < 1.0
    gate(1, ok, f"delta_lb={lb:.8f} delta_exact={ex:.8f} time={elapsed:.2f}s")


def test_criterion_02_counterexample_sweep(gate):
    t0 = time.perf_counter()
    worst = {"grad": 0.0, "hess": np.inf, "f": 0.0, "delta": 0.0}
    ranks_ok = True
    for n, r, rs in [(2, 1, 1), (3, 2, 1), (4, 2, 1), (4, 3, 2), (5, 3, 1)]:
        A = build_example_operator(n, r, rs)
        rep = verify_second_order_point(A, example_points(n, r, rs))
        q, _, _, _, f = example_constants(r, rs)
        cert = full_space_rip_certificate(A)
        worst["grad"] = max(worst["grad"], rep["grad_norm"])
        worst["hess"] = min(worst["hess"], rep["hess_min_eig"])
        worst["f"] = max(worst["f"], abs(rep["f_value"] - f))
        worst["delta"] = max(worst["delta"], abs(cert.delta_opt - 1 / (1 + 1 / np.sqrt(q))))
        ranks_ok &= max(cert.top_vector_rank, cert.bottom_vector_rank) <= r + rs
    elapsed = time.perf_counter() - t0
    ok = (worst["grad"] <= 1e-9 and worst["hess"] >= -1e-9 and worst["f"] <= 1e-9
          and worst["delta"] <= 1e-12 and ranks_ok and elapsed < 5.0)
    gate(2, ok, f"max|grad|={worst['grad']:.1e} min eig={worst['hess']:.1e} f err={worst['f']:.1e} "
                f"delta err={worst['delta']:.1e} ranks_ok={ranks_ok} time={elapsed:.2f}s")


def test_criterion_03_bound_ordering(gate):
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    bad = []
    for k in range(500):
        n = int(rng.integers(2, 6))
        r = int(rng.integers(1, min(3, n - 1) + 1))
        rs = int(rng.integers(1, r + 1))
        fp = random_pair(rng, n, r, rs)
        lb, tr, ex = delta_lower_bound(fp), tradeoff_bound(fp).delta_bound, delta_exact(fp)
        if not (lb <= tr + 1e-6 and tr <= ex + 1e-5 and ex <= 1.0):
            bad.append((k, lb, tr, ex))
    elapsed = time.perf_counter() - t0
    gate(3, not bad and elapsed < 600, f"500 pairs, violations={len(bad)} {bad[:3]} time={elapsed:.1f}s")


def test_criterion_04_sufficiency_floor_and_upper_bound(gate):
    t0 = time.perf_counter()
    details, ok = [], True
    for r, rs in [(2, 1), (3, 1), (3, 2)]:
        rng = np.random.default_rng(100 * r + rs)
        floor = 1 / (1 + np.sqrt(rs / r))
        vals = []
        for _ in range(1000):
            n = int(rng.integers(r + 1, 6))
            vals.append(delta_lower_bound(random_pair(rng, n, r, rs)))
        for seed in range(3):
            vals.append(pattern_search_min_delta(SearchConfig(r + 1, r, rs, seed=seed, budget=4000)).best_value)
        lo = min(vals)
        ok &= lo >= floor - 1e-6
        details.append(f"({r},{rs}) min={lo:.7f} floor={floor:.7f}")
    res = pattern_search_min_delta(SearchConfig(4, 2, 1, seed=0, budget=800, objective="exact"))
    target = 1 / (1 + 1 / np.sqrt(2))
    ok &= res.best_value <= target + 1e-3
    details.append(f"exact search (4,2,1)={res.best_value:.7f} <= {target + 1e-3:.7f}")
    gate(4, ok, "; ".join(details) + f" time={time.perf_counter() - t0:.1f}s")


def test_criterion_05_valid_inequalities(gate):
    rng = np.random.default_rng(5)
    failures, total = 0, 0
    for r, rs in [(1, 1), (2, 1), (2, 2), (3, 1), (3, 2), (3, 3)]:
        for _ in range(10_000):
            n = int(rng.integers(r + 1, 7))
            ab = compute_alpha_beta(random_pair(rng, n, r, rs))
            total += 1
            failures += not check_valid_inequalities(ab.alpha, ab.beta, r, rs)
    worst = np.inf
    for _ in range(10_000):
        x = rng.random(int(rng.integers(1, 9))) * rng.choice([0.1, 1.0, 10.0])
        nx2 = float(x @ x)
        if x.sum() > nx2:
            x = x * (x.sum() / nx2) * (1 + rng.random())   # enforce 1^T x <= ||x||^2
        worst = min(worst, numeric_cardinality_margin(x))
    ok = failures == 0 and worst >= -1e-12
    gate(5, ok, f"{total} pairs, failures={failures}; min cardinality margin={worst:.2e}")


def test_criterion_06_regularized_eckart_young(gate):
    rng = np.random.default_rng(6)
    worst = 0.0
    for k in range(50):
        n = int(rng.integers(1, 7))
        r = int(rng.integers(1, n + 1))
        Ga, Gb = rng.standard_normal((n, n)), rng.standard_normal((r, r))
        A, B = Ga @ Ga.T, Gb @ Gb.T * rng.random()
        closed = solve_regularized_ey(EyInstance.from_matrices(A, B)).value
        worst = max(worst, abs(ey_descent_oracle(A, B, seed=k) - closed))
    s = np.array([5.0, 3.0, 3.0, 2.0, 0.5])
    b0_err = abs(solve_regularized_ey(EyInstance(s, np.zeros(2))).value - float(np.sum(s[2:] ** 2)))
    canon_ok, obj_err = True, 0.0
    for sv, dv in [((2, 2, 1), (0, 0)), ((3, 3, 1, 1), (0, 0.5, 1)), ((4, 4, 4, 1), (0, 0, 2))]:
        S, D = np.diag(np.array(sv, float)), np.diag(np.array(dv, float))
        val, X = ey_descent_oracle(S, D, seed=1, return_point=True)
        Y = canonicalize_to_scaled_permutation(canonicalize_to_diagonal_gram(X, S, D), S, D)
        canon_ok &= is_scaled_permutation(Y)
        obj_err = max(obj_err, abs(ey_objective(S, D, Y) - val))
    ok = worst <= 1e-6 and b0_err == 0.0 and canon_ok and obj_err <= 1e-8
    gate(6, ok, f"oracle gap={worst:.1e} B=0 err={b0_err:.1e} scaled_perm={canon_ok} "
                f"objective drift={obj_err:.1e}")


def test_criterion_07_closed_form_gamma(gate):
    worst = 0.0
    for a in np.linspace(0.0, 1.0, 21):
        for b in np.linspace(0.05, 2.0, 40):
            worst = max(worst, abs(gamma_closed_form(a, b) - max_tradeoff_psi(a, b)))
    gate(7, worst <= 1e-8, f"21x40 grid, max |gamma - numeric| = {worst:.1e}")


def test_criterion_08_overparameterized_sgd(gate):
    t0 = time.perf_counter()
    res = run_overparam_experiment(4, 100, (1, 2, 3), SgdConfig())
    elapsed = time.perf_counter() - t0
    fails = res[1].failures
    spurious = np.sqrt(5) / 2
    off = [abs(t.final_distance - spurious) for t in res[1].per_trial if not t.success]
    ok = (3 <= fails <= 25 and res[2].successes >= 98 and res[3].successes >= 98
          and all(d <= 0.2 for d in off) and elapsed < 120)
    gate(8, ok, f"rank1 failures={fails} rank2 successes={res[2].successes} "
                f"rank3 successes={res[3].successes} max |dist - sqrt5/2|={max(off, default=0):.3f} "
                f"time={elapsed:.1f}s")


def test_criterion_09_trivial_regime(gate):
    worst, fails = 0.0, 0
    for r in (3, 4):
        res = trivial_regime_check(3, r, 20, SgdConfig(seed=9))
        fails += res.failures
        worst = max(worst, max(t.final_loss for t in res.per_trial))
    gate(9, fails == 0 and worst <= 1e-6, f"40 trials, failures={fails}, max final f={worst:.1e}")


def test_criterion_10_structural_identities(gate, capsys):
    rng = np.random.default_rng(10)
    proj_err = 0.0
    for _ in range(100):
        n = int(rng.integers(2, 7))
        X = rng.standard_normal((n, int(rng.integers(1, n + 1))))
        J = build_error_jacobian(FactorPair(X, X[:, :1], check_rank=False)).J
        U, s, _ = np.linalg.svd(J, full_matrices=False)
        Q = U[:, s > 1e-9 * s.max()]
        S = symmetric_basis(n)
        # compare on symmetric matrices, where e and the Jacobian range live
        proj_err = max(proj_err, np.abs((residual_projector(X) - (np.eye(n * n) - Q @ Q.T)) @ S).max())

    A = build_example_operator(4, 2, 1)
    Z = rng.standard_normal((4, 1))
    fd_err, h = 0.0, 1e-5
    for _ in range(20):
        X, V = rng.standard_normal((4, 2)), rng.standard_normal((4, 2))
        fd = (loss(A, FactorPair(X + h * V, Z)) - loss(A, FactorPair(X - h * V, Z))) / (2 * h)
        fd_err = max(fd_err, abs(fd - np.sum(gradient(A, FactorPair(X, Z)) * V)) / max(1.0, abs(fd)))

    outputs = []
    for _ in range(2):
        run = []
        for argv in (["--seed", "7", "scan", "--n", "3", "--r", "2", "--rstar", "1", "--budget", "300"],
                     ["--seed", "7", "sgd-experiment", "--n", "3", "--trials", "3", "--steps", "500"],
                     ["--seed", "7", "ey", "--s", "3,2,2", "--d", "0,1", "--oracle"]):
            cli.main(argv)
            run.append(capsys.readouterr().out)
        outputs.append(run)
    same = outputs[0] == outputs[1]
    ok = proj_err <= 1e-10 and fd_err <= 1e-5 and same
    gate(10, ok, f"projector err={proj_err:.1e} grad FD err={fd_err:.1e} byte-identical={same}")
