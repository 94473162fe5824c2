"""Command line front end.

Subcommands: gen (instance files), solve (any method), verify (invariant
suites), bench (batch CSV, optionally with figures).  JSON reports go to
stdout, human summaries to stderr; identical flags and seed give identical
reports.  Exit codes: 0 success, 1 verification failure, 2 usage or input
error, 3 infeasible.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import time
from pathlib import Path

from .arith import Q, as_float, q_to_json, to_q
from .checks import run_verify
from .exact import (
    EnumerationCapError,
    brute_force_ftfl,
    brute_force_ftmed,
    solve_hst_exact,
    solve_line_exact,
)
from .ftfl import solve_ftfl
from .instances import (
    FTFLInstance,
    FTMedInstance,
    InfeasibleError,
    InstanceError,
    generate_instance,
    instance_to_dict,
    load_instance,
    save_instance,
)
from .lp import INFEASIBLE, LPError
from .relaxation import PipelineError
from .rounding import solve_ftmed_approx

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_USAGE = 2
EXIT_INFEASIBLE = 3

FTMED_METHODS = ("lp-round", "exact-line", "exact-hst", "brute")
FTFL_METHODS = ("ftfl-fixed", "ftfl-random", "brute")


def _default_arith() -> str:
    return os.environ.get("FTCLUST_ARITH", "rational")


def build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(prog="ftclust", description=__doc__)
    sub = top.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate a random or gap-family instance")
    gen.add_argument("--kind", choices=("ftmed", "ftfl"), required=True)
    gen.add_argument("--geometry", choices=("line", "plane", "hst", "explicit"), default="line")
    gen.add_argument("--n", type=int, required=True, help="facility count")
    gen.add_argument("--m", type=int, default=1, help="client count")
    gen.add_argument("--k", type=int, help="open-facility budget (ftmed)")
    gen.add_argument("--rmin", type=int, default=1)
    gen.add_argument("--rmax", type=int, default=1)
    gen.add_argument("--fmin", type=int, default=0, help="opening cost range (ftfl)")
    gen.add_argument("--fmax", type=int, default=20)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--gap-family", action="store_true",
                     help="the worst-case covering-LP family of size n")
    gen.add_argument("--out", help="output file (defaults to stdout)")

    slv = sub.add_parser("solve", help="solve an instance file")
    slv.add_argument("instance")
    slv.add_argument("--method", choices=sorted(set(FTMED_METHODS + FTFL_METHODS)), required=True)
    slv.add_argument("--alpha", default="1/4", help="threshold for ftfl-fixed")
    slv.add_argument("--trials", type=int, default=1000, help="draws for ftfl-random")
    slv.add_argument("--samples", type=int, default=200, help="vertex samples for lp-round")
    slv.add_argument("--seed", type=int, default=0)
    slv.add_argument("--arith", choices=("rational", "float"), default=None,
                     help="LP arithmetic (default: FTCLUST_ARITH or rational)")
    slv.add_argument("--out", help="also write the report JSON here")
    slv.add_argument("--dump-lp", help="write the base LP in text exchange format")

    ver = sub.add_parser("verify", help="run every invariant suite on an instance")
    ver.add_argument("instance")
    ver.add_argument("--samples", type=int, default=20000)
    ver.add_argument("--seed", type=int, default=0)

    ben = sub.add_parser("bench", help="batch-solve a directory into CSV")
    ben.add_argument("--dir", required=True, help="directory of instance JSON files")
    ben.add_argument("--methods", required=True, help="comma-separated method list")
    ben.add_argument("--out", help="CSV path (defaults to stdout)")
    ben.add_argument("--seed", type=int, default=0)
    ben.add_argument("--samples", type=int, default=200)
    ben.add_argument("--trials", type=int, default=200)
    ben.add_argument("--alpha", default="1/4")
    ben.add_argument("--plot", action="store_true",
                     help="render figures next to the CSV output")
    return top


def cmd_gen(args) -> int:
    kwargs = dict(
        k=args.k,
        r_range=(args.rmin, args.rmax),
        f_range=(args.fmin, args.fmax),
        seed=args.seed,
        gap_family=args.gap_family,
    )
    instance = generate_instance(args.kind, args.geometry, args.n, args.m, **kwargs)
    if args.out:
        save_instance(instance, args.out)
        print(f"wrote {args.out}", file=sys.stderr)
    else:
        json.dump(instance_to_dict(instance), sys.stdout, indent=1, sort_keys=True)
        print()
    return EXIT_OK


def _solve_report(instance, args) -> dict:
    method = args.method
    arith = args.arith or _default_arith()
    is_med = isinstance(instance, FTMedInstance)
    if method in ("lp-round", "exact-line", "exact-hst") and not is_med:
        raise InstanceError(f"method {method} needs an ftmed instance")
    if method.startswith("ftfl") and is_med:
        raise InstanceError(f"method {method} needs an ftfl instance")

    if method == "lp-round":
        report = solve_ftmed_approx(instance, seed=args.seed, samples=args.samples, arith=arith)
    elif method in ("exact-line", "exact-hst"):
        res = solve_line_exact(instance) if method == "exact-line" else solve_hst_exact(instance)
        report = {
            "method": res.method,
            "kind": "ftmed",
            "lp_value": as_float(res.lp_value),
            "lp_value_exact": q_to_json(res.lp_value),
            "samples": 1,
            "seed": args.seed,
            "mean_cost": as_float(res.value),
            "best_cost": as_float(res.value),
            "best_cost_exact": q_to_json(res.value),
            "best_open_set": list(res.open_set.facilities),
            "per_client_bounds": None,
            "marginal_check": None,
        }
    elif method == "brute":
        if is_med:
            value, S = brute_force_ftmed(instance)
        else:
            value, S = brute_force_ftfl(instance)
        report = {
            "method": "brute",
            "kind": "ftmed" if is_med else "ftfl",
            "lp_value": None,
            "samples": 1,
            "seed": args.seed,
            "mean_cost": as_float(value),
            "best_cost": as_float(value),
            "best_cost_exact": q_to_json(value),
            "best_open_set": list(S.facilities),
            "per_client_bounds": None,
            "marginal_check": None,
        }
    elif method == "ftfl-fixed":
        report = solve_ftfl(instance, mode="fixed", alpha=to_q(args.alpha), seed=args.seed)
    else:  # ftfl-random
        report = solve_ftfl(instance, mode="random", seed=args.seed, trials=args.trials)
    return report


def cmd_solve(args) -> int:
    instance = load_instance(args.instance)
    if args.dump_lp:
        from .lp import lp_to_text
        from .relaxation import build_ftmed_lp

        if isinstance(instance, FTMedInstance):
            Path(args.dump_lp).write_text(lp_to_text(build_ftmed_lp(instance)))
        else:
            from .ftfl import build_kc_lp, expand_weight_vectors

            lp, _oracle, _vm = build_kc_lp(expand_weight_vectors(instance))
            Path(args.dump_lp).write_text(lp_to_text(lp))
    t0 = time.perf_counter()
    report = _solve_report(instance, args)
    runtime = report.pop("runtime_s", time.perf_counter() - t0)
    text = json.dumps(report, indent=1, sort_keys=True)
    print(text)
    if args.out:
        Path(args.out).write_text(text + "\n")
    best = report.get("best_cost", report.get("best"))
    print(
        f"{report['method']}: cost {best} in {runtime:.2f}s "
        f"(open set {report.get('best_open_set')})",
        file=sys.stderr,
    )
    return EXIT_OK


def cmd_verify(args) -> int:
    instance = load_instance(args.instance, validate=False)
    checks = run_verify(instance, seed=args.seed, samples=args.samples)
    report = {
        "checks": [
            {"name": c.name, "ok": c.ok, "detail": c.detail} for c in checks
        ],
        "all_ok": all(c.ok for c in checks),
    }
    print(json.dumps(report, indent=1, sort_keys=True))
    for c in checks:
        print(str(c), file=sys.stderr)
    return EXIT_OK if report["all_ok"] else EXIT_FAIL


def _bench_row(path: Path, method: str, args) -> dict:
    instance = load_instance(path)
    ns = argparse.Namespace(
        method=method,
        alpha=args.alpha,
        trials=args.trials,
        samples=args.samples,
        seed=args.seed,
        arith=None,
    )
    t0 = time.perf_counter()
    report = _solve_report(instance, ns)
    runtime_ms = 1000 * (report.pop("runtime_s", time.perf_counter() - t0))
    cost = report.get("best_cost", report.get("best"))
    lp_value = report.get("lp_value", report.get("kc_value"))
    ratio_lp = "" if not lp_value else cost / lp_value
    try:
        if isinstance(instance, FTMedInstance):
            opt, _ = brute_force_ftmed(instance)
        else:
            opt, _ = brute_force_ftfl(instance)
        ratio_brute = cost / as_float(opt) if opt else (1.0 if not cost else "")
    except EnumerationCapError:
        ratio_brute = ""
    return {
        "instance": path.name,
        "method": method,
        "lp_value": lp_value if lp_value is not None else "",
        "cost": cost,
        "ratio_vs_lp": ratio_lp,
        "ratio_vs_brute": ratio_brute,
        "runtime_ms": f"{runtime_ms:.2f}",
        "seed": args.seed,
    }


BENCH_COLUMNS = [
    "instance", "method", "lp_value", "cost",
    "ratio_vs_lp", "ratio_vs_brute", "runtime_ms", "seed",
]


def cmd_bench(args) -> int:
    directory = Path(args.dir)
    files = sorted(p for p in directory.iterdir() if p.suffix == ".json")
    if not files:
        raise InstanceError(f"no instance files in {directory}")
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    rows = []
    for path in files:
        instance = load_instance(path)
        is_med = isinstance(instance, FTMedInstance)
        ok_methods = FTMED_METHODS if is_med else FTFL_METHODS
        for method in methods:
            if method not in ok_methods:
                continue
            if method == "exact-line" and instance.metric.mode != "line":
                continue
            if method == "exact-hst" and instance.metric.mode != "hst":
                continue
            rows.append(_bench_row(path, method, args))
            print(f"{path.name} {method}: done", file=sys.stderr)
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=BENCH_COLUMNS)
    writer.writeheader()
    writer.writerows(rows)
    if args.out:
        Path(args.out).write_text(buf.getvalue())
        print(f"wrote {args.out}", file=sys.stderr)
    else:
        sys.stdout.write(buf.getvalue())
    if args.plot:
        from .plots import render_bench_figures

        prefix = Path(args.out).with_suffix("") if args.out else directory / "bench"
        for fig_path in render_bench_figures(rows, prefix):
            print(f"wrote {fig_path}", file=sys.stderr)
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "gen":
            return cmd_gen(args)
        if args.command == "solve":
            return cmd_solve(args)
        if args.command == "verify":
            return cmd_verify(args)
        if args.command == "bench":
            return cmd_bench(args)
        parser.error(f"unknown command {args.command}")
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except LPError as exc:
        if INFEASIBLE in str(exc):
            print(f"infeasible: {exc}", file=sys.stderr)
            return EXIT_INFEASIBLE
        raise
    except (InstanceError, EnumerationCapError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
