"""Command-line interface.

Verbs:
  gen         emit a synthetic instance file
  select      run one algorithm on an instance file, print the selection
  metrics     evaluate a given selection against true attributes
  experiment  run a seeded sweep and write the results table

Exit codes: 0 success, 1 usage/parse errors, 2 infeasible constraints.
Machine-readable JSON goes to stdout; item indices in output are 1-based.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import selectors
from .core import (InfeasibleError, Instance, Selection, constraints_from_alpha,
                   load_instance, make_constraints, save_instance, validate_instance,
                   violation_report)
from .datagen import (KIND_DISPARATE_ERROR, KIND_DISPARATE_UTILITY, GeneratorSpec,
                      estimate_q_by_utility_bins, gen_disparate_error,
                      gen_disparate_utility, inject_flip_noise)
from .experiment import load_config, run_experiment, write_per_trial, write_results
from .metrics import compute_report
from .seeding import seed_sequence

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_INFEASIBLE = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2; we use 1
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        sys.exit(EXIT_ERROR)


def _build_parser() -> _Parser:
    parser = _Parser(prog="fairselect",
                     description="Fair subset selection under noisy protected attributes")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate a synthetic instance file")
    gen.add_argument("--kind", choices=["disparate-error", "disparate-utility"], required=True)
    gen.add_argument("--m", type=int, required=True)
    gen.add_argument("--n", type=int, required=True)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--tau", type=float, default=0.0, help="label flip probability")
    gen.add_argument("--bins", type=int, default=20, help="utility bins for the probability estimate")
    gen.add_argument("--out", required=True)

    sel = sub.add_parser("select", help="run one algorithm on an instance file")
    sel.add_argument("--instance", required=True)
    sel.add_argument("--algorithm", choices=list(selectors_by_name()), required=True)
    sel.add_argument("--alpha", type=float, default=0.0)
    sel.add_argument("--delta", type=float, default=0.0)
    sel.add_argument("--target", choices=["equal", "proportional"], default="equal")
    sel.add_argument("--lambda", dest="lambda_", type=float, default=0.0)
    sel.add_argument("--seed", type=int, default=0)
    sel.add_argument("--lower", default=None, help="comma-separated explicit lower bounds")
    sel.add_argument("--upper", default=None, help="comma-separated explicit upper bounds")
    sel.add_argument("--fw-iters", type=int, default=500)

    met = sub.add_parser("metrics", help="evaluate a selection on true attributes")
    met.add_argument("--instance", required=True)
    met.add_argument("--indices", required=True, help="comma-separated 1-based item indices")
    met.add_argument("--target", choices=["equal", "proportional"], default="equal")
    met.add_argument("--ndcg", action="store_true")

    exp = sub.add_parser("experiment", help="run a seeded sweep from a config file")
    exp.add_argument("--config", required=True)
    exp.add_argument("--out", required=True)
    exp.add_argument("--format", choices=["csv", "json"], default="csv")
    exp.add_argument("--per-trial", default=None, help="also dump per-trial metric values")
    exp.add_argument("--workers", type=int, default=None,
                     help="override the FAIRSELECT_WORKERS environment variable")
    return parser


def selectors_by_name():
    return ("Blind", "FairExpec", "FairExpecGrp", "Thrsh", "MultObj")


def _target_vector(name: str, inst: Instance) -> np.ndarray:
    p = inst.p[0]
    if name == "equal":
        return np.full(p, 1.0 / p)
    if inst.true_attrs is None:
        raise ValueError("a proportional target needs true attributes in the instance file")
    return np.bincount(inst.true_attrs[:, 0], minlength=p) / inst.m


def _load_checked_instance(path) -> Instance:
    inst = load_instance(path)
    check = validate_instance(inst)
    if not check.ok:
        raise ValueError("invalid instance: " + "; ".join(check.violations))
    return inst


def cmd_gen(args) -> int:
    spec = GeneratorSpec(
        kind=KIND_DISPARATE_ERROR if args.kind == "disparate-error" else KIND_DISPARATE_UTILITY,
        m=args.m, n=args.n, seed=args.seed, tau=args.tau, bins=args.bins)
    if spec.kind == KIND_DISPARATE_ERROR:
        inst = gen_disparate_error(spec)
    else:
        train_spec = GeneratorSpec(kind=spec.kind, m=args.m, n=args.n,
                                   seed=seed_sequence(args.seed, 1))
        inst = gen_disparate_utility(spec)
        if args.tau > 0:
            inst = inject_flip_noise(inst, args.tau, seed_sequence(args.seed, 2))
        else:
            inst = inst.with_noisy_attrs(inst.true_attrs.copy())
        q = estimate_q_by_utility_bins(inst, args.bins, train=gen_disparate_utility(train_spec))
        inst = inst.with_noise((q,))
    save_instance(inst, args.out)
    print(json.dumps({"written": args.out, "m": inst.m, "n": inst.n, "p": list(inst.p)}))
    return EXIT_OK


def cmd_select(args) -> int:
    inst = _load_checked_instance(args.instance)
    if inst.noise is None:
        raise ValueError("instance file carries no probability rows")
    t = _target_vector(args.target, inst)
    if args.lower is not None or args.upper is not None:
        if args.lower is None or args.upper is None:
            raise ValueError("--lower and --upper must be given together")
        lower = np.array([float(v) for v in args.lower.split(",")])
        upper = np.array([float(v) for v in args.upper.split(",")])
        cs = make_constraints([lower], [upper], delta=args.delta, n=inst.n)
    else:
        cs = constraints_from_alpha(inst.n, t, args.alpha, delta=args.delta)

    try:
        if args.algorithm == "Blind":
            sel = selectors.blind(inst)
        elif args.algorithm == "FairExpec":
            sel = selectors.fair_expec(inst, cs)
        elif args.algorithm == "FairExpecGrp":
            sel = selectors.fair_expec_grp(inst, cs)
        elif args.algorithm == "Thrsh":
            sel = selectors.thrsh(inst, cs, seed=seed_sequence(args.seed, 0))
        else:  # MultObj
            acfg = selectors.AlgorithmConfig(target=tuple(t), lambda_=args.lambda_,
                                             delta=args.delta, seed=args.seed,
                                             fw_iters=args.fw_iters)
            frac = selectors.mult_obj(inst, acfg)
            sel = selectors.dependent_round(frac, inst.n, seed_sequence(args.seed, 1),
                                            inst.utilities)
    except InfeasibleError as exc:
        print(json.dumps({"status": "infeasible", "detail": str(exc)}))
        return EXIT_INFEASIBLE

    expected = violation_report(sel, inst, cs, attrs="expected")
    payload = {
        "status": "ok",
        "algorithm": args.algorithm,
        "indices": [int(i) + 1 for i in sel.indices],
        "utility": sel.total_utility,
        "cardinality": sel.cardinality,
        "expected_violations": {
            "per_group": [list(map(float, v)) for v in expected.fairness],
            "cardinality_excess": expected.cardinality_excess,
            "max_violation": expected.max_violation,
        },
    }
    if inst.true_attrs is not None:
        true = violation_report(sel, inst, cs, attrs="true")
        payload["true_violations"] = {
            "per_group": [list(map(float, v)) for v in true.fairness],
            "cardinality_excess": true.cardinality_excess,
            "max_violation": true.max_violation,
        }
    print(json.dumps(payload))
    return EXIT_OK


def cmd_metrics(args) -> int:
    inst = _load_checked_instance(args.instance)
    indices = [int(v) - 1 for v in args.indices.split(",")]
    if any(i < 0 or i >= inst.m for i in indices):
        raise ValueError("indices out of range (they are 1-based)")
    mask = np.zeros(inst.m, dtype=int)
    mask[indices] = 1
    sel = Selection.from_mask(mask, inst.utilities)
    t = _target_vector(args.target, inst)
    blind_sel = selectors.blind(inst)
    report = compute_report(inst, sel, t, blind_sel.total_utility, with_ndcg=args.ndcg)
    payload = {
        "risk_difference": report.risk_difference,
        "selection_lift": report.selection_lift,
        "selection_rates": list(report.selection_rates),
        "utility_ratio": report.utility_ratio,
    }
    if report.ndcg is not None:
        payload["ndcg"] = report.ndcg
    print(json.dumps(payload))
    return EXIT_OK


def cmd_experiment(args) -> int:
    cfg = load_config(args.config)
    table = run_experiment(cfg, workers=args.workers)
    write_results(table, args.out, format=args.format)
    if args.per_trial:
        write_per_trial(table, args.per_trial)
    print(json.dumps({"written": args.out, "rows": len(table.rows)}))
    return EXIT_OK


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    handlers = {"gen": cmd_gen, "select": cmd_select,
                "metrics": cmd_metrics, "experiment": cmd_experiment}
    try:
        return handlers[args.command](args)
    except InfeasibleError as exc:
        print(json.dumps({"status": "infeasible", "detail": str(exc)}))
        return EXIT_INFEASIBLE
    except (ValueError, KeyError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
