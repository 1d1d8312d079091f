"""Command-line entry point: ``riplab <subcommand> ...``.

Every subcommand prints a JSON report (or writes it to ``--json-out``).
Exit status is 0 on success, 2 on invalid input and 3 when the
interior-point solver stalls.
"""
from __future__ import annotations

import argparse
import os
import sys
from contextlib import nullcontext

import numpy as np

from . import __version__
from .bounds import compute_alpha_beta, delta_lower_bound, tradeoff_bound
from .counterexamples import (
    build_example_operator,
    example_constants,
    example_points,
    full_space_rip_certificate,
    verify_second_order_point,
)
from .eckart_young import EyInstance, ey_descent_oracle, solve_regularized_ey
from .exceptions import RiplabError, SolverStall, ValidationError
from .experiments import SgdConfig, run_overparam_experiment, summaries_to_csv, trivial_regime_check
from .io import dumps, factor_pair_from_json, factor_pair_to_json, load_json, matrix_from_json, trace_to_csv
from .lmi import GAP_TOL, assemble_lmi, solve_delta_exact, verify_feasible_point
from .search import OBJECTIVES, SearchConfig, pattern_search_min_delta

EXIT_OK, EXIT_INVALID, EXIT_STALL = 0, 2, 3
SEED_MAX = 2**64

# component index used when splitting the global seed
COMPONENTS = {"scan": 0, "ey": 1, "sgd-experiment": 2, "trivial-check": 3}

PAPER_REF = {
    "bounds": "closed-form threshold lower bound and trade-off bound",
    "delta-exact": "convex LMI reformulation of the threshold function",
    "scan": "pattern search over factor pairs for small thresholds",
    "counterexample": "explicit spurious second-order point family",
    "ey": "regularized Eckart-Young theorem",
    "sgd-experiment": "overparameterized SGD experiment",
    "trivial-check": "no spurious second-order points when r >= n",
    "verify-h": "feasibility of a kernel for the threshold LMI",
}


def derive_seed(global_seed: int, component: str) -> int:
    """Fixed split of the global seed into a 64-bit per-component seed."""
    ss = np.random.SeedSequence(global_seed, spawn_key=(COMPONENTS[component],))
    return int(ss.generate_state(1, np.uint64)[0])


def _seed(value):
    try:
        s = int(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid seed {value!r}") from None
    if not 0 <= s < SEED_MAX:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return s


def _floats(text):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text):
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _component_seed(args, name):
    return args.sub_seed if args.sub_seed is not None else derive_seed(args.seed, name)


def _write(path, text):
    try:
        with open(path, "w") as fh:
            fh.write(text)
    except OSError as exc:
        raise ValidationError(f"{path}: {exc.strerror}") from None


def _load_pair(path, check_rank=True):
    obj = load_json(path) if path != "-" else _stdin_json()
    return factor_pair_from_json(obj, check_rank=check_rank)


def _stdin_json():
    import json

    try:
        return json.load(sys.stdin)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"stdin: invalid JSON ({exc})") from None


# ---------------------------------------------------------------- commands

def cmd_bounds(args):
    fp = _load_pair(args.input)
    ab = compute_alpha_beta(fp)
    tr = tradeoff_bound(fp)
    return {
        "alpha": ab.alpha,
        "beta": ab.beta,
        "e_norm": ab.e_norm,
        "degenerate": ab.degenerate,
        "delta_lb": delta_lower_bound(fp),
        "tradeoff": {"delta": tr.delta_bound, "t_star": tr.t_star},
    }


def cmd_delta_exact(args):
    p = assemble_lmi(_load_pair(args.input))
    sol = solve_delta_exact(p, args.tol)
    return {"degenerate": p.degenerate, **sol.to_dict(include_matrix=not args.no_matrix)}


def cmd_scan(args):
    cfg = SearchConfig(args.n, args.r, args.rstar, seed=_component_seed(args, "scan"),
                       budget=args.budget, objective=args.objective)
    res = pattern_search_min_delta(cfg)
    if args.trace:
        _write(args.trace, trace_to_csv(res.trace))
    return {
        "n": args.n, "r": args.r, "r_star": args.rstar, "seed": cfg.seed,
        "objective": args.objective, "budget": args.budget,
        "best_value": res.best_value,
        "evaluations": res.evaluations,
        "best_pair": factor_pair_to_json(res.best_fp),
    }


def cmd_counterexample(args):
    A = build_example_operator(args.n, args.r, args.rstar)
    fp = example_points(args.n, args.r, args.rstar)
    q, kappa, xi, delta, f = example_constants(args.r, args.rstar)
    cert = full_space_rip_certificate(A)
    out = {
        "n": args.n, "r": args.r, "r_star": args.rstar,
        "constants": {"q": q, "kappa": kappa, "xi": xi, "delta": delta, "f": f},
        "pair": factor_pair_to_json(fp),
        "second_order": verify_second_order_point(A, fp),
        "delta_opt": cert.delta_opt,
        "f": float(verify_second_order_point(A, fp)["f_value"]),
        "certificate": {
            "delta_opt": cert.delta_opt, "kappa": cert.kappa, "nu": cert.nu,
            "top_vector_rank": cert.top_vector_rank, "bottom_vector_rank": cert.bottom_vector_rank,
            "spectrum_min": cert.spectrum_min, "spectrum_max": cert.spectrum_max,
        },
    }
    if args.include_operator:
        out["operator"] = {"stacked": A.stacked, "labels": [list(lab) for lab in A.labels], "nu": A.nu}
    return out


def cmd_ey(args):
    if args.A or args.B:
        if not (args.A and args.B):
            raise ValidationError("--A and --B must be given together")
        A, B = matrix_from_json(load_json(args.A)), matrix_from_json(load_json(args.B))
        inst = EyInstance.from_matrices(A, B)
    else:
        if args.s is None or args.d is None:
            raise ValidationError("give --s and --d, or --A and --B")
        inst = EyInstance(args.s, args.d)
        A, B = inst.A, inst.B
    if args.r is not None and args.r != inst.r:
        raise ValidationError(f"--r {args.r} disagrees with len(d) = {inst.r}")
    sol = solve_regularized_ey(inst)
    out = {"n": inst.n, "r": inst.r, "value": sol.value, "w": sol.w, "Y_star": sol.Y_star}
    if args.oracle:
        seed = _component_seed(args, "ey")
        out["oracle_value"] = ey_descent_oracle(A, B, seed=seed, restarts=args.restarts, iters=args.iters)
        out["oracle_seed"] = seed
    return out


def cmd_sgd(args):
    cfg = SgdConfig(steps=args.steps, learning_rate=args.lr, momentum=args.momentum,
                    seed=_component_seed(args, "sgd-experiment"))
    res = run_overparam_experiment(args.n, args.trials, tuple(args.ranks), cfg)
    if args.out:
        _write(args.out, summaries_to_csv(res))
    return {
        "n": args.n, "trials": args.trials, "seed": cfg.seed,
        "config": {"steps": cfg.steps, "learning_rate": cfg.learning_rate, "momentum": cfg.momentum,
                   "batch_size": cfg.batch_size, "init_std": cfg.init_std,
                   "success_threshold": cfg.success_threshold},
        "ranks": {str(r): s.to_dict() for r, s in sorted(res.items())},
    }


def cmd_trivial(args):
    cfg = SgdConfig(seed=_component_seed(args, "trivial-check"))
    res = trivial_regime_check(args.n, args.r, args.trials, cfg)
    return {"n": args.n, "r": args.r, "seed": cfg.seed, "all_reached": res.failures == 0, **res.to_dict()}


def cmd_verify_h(args):
    p = assemble_lmi(_load_pair(args.pair))
    H = matrix_from_json(load_json(args.H))
    return verify_feasible_point(p, H, args.delta, tol=args.tol)


COMMANDS = {
    "bounds": cmd_bounds,
    "delta-exact": cmd_delta_exact,
    "scan": cmd_scan,
    "counterexample": cmd_counterexample,
    "ey": cmd_ey,
    "sgd-experiment": cmd_sgd,
    "trivial-check": cmd_trivial,
    "verify-h": cmd_verify_h,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="riplab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"riplab {__version__}")
    parser.add_argument("--seed", type=_seed, default=0, help="global seed (split per component)")
    sub = parser.add_subparsers(dest="command", metavar="subcommand")

    def add(name, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--json-out", help="write the JSON report here instead of stdout")
        return p

    def seeded(p):
        p.add_argument("--seed", dest="sub_seed", type=_seed, default=None,
                       help="seed for this command (default: derived from the global seed)")

    p = add("bounds", "alpha, beta and lower bounds for a factor pair")
    p.add_argument("input", help="factor pair JSON ('-' for stdin)")

    p = add("delta-exact", "exact threshold via the LMI")
    p.add_argument("input", help="factor pair JSON ('-' for stdin)")
    p.add_argument("--tol", type=float, default=GAP_TOL)
    p.add_argument("--no-matrix", action="store_true", help="omit H from the report")

    p = add("scan", "pattern search for small thresholds")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--r", type=int, required=True)
    p.add_argument("--rstar", type=int, required=True)
    p.add_argument("--budget", type=int, default=10_000)
    p.add_argument("--objective", choices=OBJECTIVES, default="lb")
    p.add_argument("--trace", help="CSV path for the (evaluation, best) trace")
    seeded(p)

    p = add("counterexample", "certified spurious second-order point")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--r", type=int, required=True)
    p.add_argument("--rstar", type=int, required=True)
    p.add_argument("--include-operator", action="store_true")

    p = add("ey", "regularized Eckart-Young solver")
    p.add_argument("--s", type=_floats, help="descending spectrum of A")
    p.add_argument("--d", type=_floats, help="ascending spectrum of B")
    p.add_argument("--r", type=int)
    p.add_argument("--A", help="matrix JSON for A")
    p.add_argument("--B", help="matrix JSON for B")
    p.add_argument("--oracle", action="store_true", help="also run the descent oracle")
    p.add_argument("--restarts", type=int, default=20)
    p.add_argument("--iters", type=int, default=500)
    seeded(p)

    p = add("sgd-experiment", "SGD on the example operator at several search ranks")
    p.add_argument("--n", type=int, default=4)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--ranks", type=_ints, default=[1, 2])
    p.add_argument("--steps", type=int, default=SgdConfig.steps)
    p.add_argument("--lr", type=float, default=SgdConfig.learning_rate)
    p.add_argument("--momentum", type=float, default=SgdConfig.momentum)
    p.add_argument("--out", help="CSV path for per-trial results")
    seeded(p)

    p = add("trivial-check", "gradient descent with r >= n on Gaussian operators")
    p.add_argument("--n", type=int, default=3)
    p.add_argument("--r", type=int, default=3)
    p.add_argument("--trials", type=int, default=20)
    seeded(p)

    p = add("verify-h", "check a kernel H against the LMI at a given delta")
    p.add_argument("--pair", required=True, help="factor pair JSON")
    p.add_argument("--H", required=True, help="matrix JSON for H (n^2 x n^2)")
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--tol", type=float, default=1e-8)
    return parser


def _thread_limit():
    raw = os.environ.get("RIPLAB_THREADS")
    if not raw:
        return nullcontext()
    try:
        n = int(raw)
    except ValueError:
        raise ValidationError(f"RIPLAB_THREADS must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise ValidationError("RIPLAB_THREADS must be a positive integer")
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=n)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)   # argparse exits with status 2 on bad flags
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_INVALID
    report = {"command": args.command, "paper_ref": PAPER_REF[args.command], "status": "ok"}
    code = EXIT_OK
    try:
        with _thread_limit():
            report.update(COMMANDS[args.command](args))
    except SolverStall as exc:
        report["status"] = "stalled"
        report["error"] = str(exc)
        if exc.solution is not None:
            report.update(exc.solution.to_dict(include_matrix=not getattr(args, "no_matrix", False)))
        code = EXIT_STALL
    except (RiplabError, ValueError) as exc:
        print(f"riplab {args.command}: {exc}", file=sys.stderr)
        return EXIT_INVALID
    text = dumps(report)
    try:
        if args.json_out:
            _write(args.json_out, text)
        else:
            sys.stdout.write(text)
    except ValidationError as exc:
        print(f"riplab {args.command}: {exc}", file=sys.stderr)
        return EXIT_INVALID
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
