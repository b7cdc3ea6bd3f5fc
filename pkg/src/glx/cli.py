"""Command-line interface: ``glx {estimate,check,bench,gen}``.

Exit codes: 0 success, 1 input/usage/runtime error, 2 closed-form
conditions failed under ``--method closed`` (the report is still written).
"""
from __future__ import annotations

import argparse
import contextlib
import hashlib
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .closed_form import (
    approx_solution,
    check_conditions,
    closed_form_solution,
    epsilon_certificate,
    exact_solution,
)
from .covariance import check_covariance, lambda_for_k, magnitude_ladder, residue, sample_covariance
from .datagen import cycle_covariance, random_precision, sample_gaussian, spanning_tree_covariance
from .exceptions import CertificateUnavailable, ConditionsFailed, DegenerateEntry, GlxError
from .graph import OVERFLOW, PATH_CAP, SupportGraph, decompose, girth, max_degree, max_simple_paths
from .io import read_matrix_market, read_samples_csv, write_json, write_matrix_market, write_samples_csv
from .metrics import accuracy_report, optimality_gap
from .solver import SolverConfig, glasso_solve, warm_start_solve

SCHEMA_VERSION = "1.0"
EXIT_OK, EXIT_ERROR, EXIT_CONDITIONS = 0, 1, 2


class _Timer:
    def __init__(self):
        self.ms = {}

    @contextlib.contextmanager
    def __call__(self, name):
        t0 = time.perf_counter()
        yield
        self.ms[name] = self.ms.get(name, 0.0) + 1e3 * (time.perf_counter() - t0)


def _digest(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _threads(args):
    n = args.threads if getattr(args, "threads", None) else os.environ.get("GLX_THREADS")
    if not n:
        return contextlib.nullcontext()
    from threadpoolctl import threadpool_limits

    return threadpool_limits(int(n))


def _load_sigma(args, timer):
    with timer("load"):
        if args.cov:
            sigma = check_covariance(read_matrix_market(args.cov))
            src = args.cov
        else:
            _, data = read_samples_csv(args.samples, missing=args.impute)
            sigma = sample_covariance(data)
            src = args.samples
    return sigma, {"path": str(src), "sha256": _digest(src), "dim": int(sigma.shape[0])}


def _resolve_lambda(args, sigma):
    if args.k is not None:
        return float(lambda_for_k(magnitude_ladder(sigma), args.k)), int(args.k)
    lam = float(args.lam)
    if lam < 0:
        raise ValueError("--lambda must be non-negative")
    k = int(np.count_nonzero(np.abs(sigma[np.triu_indices(sigma.shape[0], k=1)]) > lam))
    return lam, k


def _component_stats(res, report, cap=PATH_CAP):
    g = SupportGraph.from_matrix(res.residue)
    out = []
    for rec in report.components:
        sub = g.subgraph(rec.vertices)
        pmax = max_simple_paths(sub, cap=cap)
        c = girth(sub)
        row = rec.to_dict()
        row.update(girth=None if math.isinf(c) else int(c), max_degree=int(max_degree(sub)),
                   p_max="overflow" if pmax is OVERFLOW else int(pmax))
        out.append(row)
    return out


def _base_report(command, src, lam, k):
    return {"schema_version": SCHEMA_VERSION, "command": command, "input": src,
            "lambda": lam, "k": k, "components": [], "metrics": {}, "timings_ms": {}}


def _report_path(args):
    if args.report:
        return args.report
    out = Path(args.out)
    return str(out.with_name(out.stem + ".report.json"))


def cmd_estimate(args, argv):
    timer = _Timer()
    sigma, src = _load_sigma(args, timer)
    lam, k = _resolve_lambda(args, sigma)
    report = _base_report(argv, src, lam, k)
    cfg = SolverConfig(tol=args.tol, max_iter=args.max_iter)
    code = EXIT_OK
    sol = None
    with timer("estimate"):
        if args.method in ("closed", "approx"):
            res = residue(sigma, lam)
            cond = check_conditions(res)
            try:
                sol = exact_solution(res, cond) if args.method == "closed" else closed_form_solution(res, cond)
            except ConditionsFailed as exc:
                report["error"] = str(exc)
                code = EXIT_CONDITIONS
            report["conditions"] = cond.to_dict()
            methods = sol.component_methods if sol else {}
            for row in cond.to_dict()["components"]:
                row["method"] = methods.get(row["index"], "failed")
                report["components"].append(row)
        elif args.method == "glasso":
            sol = glasso_solve(sigma, lam, cfg)
        else:
            sol = warm_start_solve(sigma, lam, cfg)
            for rec in sol.report.components:
                row = rec.to_dict()
                row["method"] = sol.component_methods[rec.index]
                report["components"].append(row)
    if sol is not None:
        report["method"] = sol.method
        report["iterations"] = sol.iterations
        report["kkt_residual"] = sol.kkt_residual
        with timer("write"):
            write_matrix_market(args.out, sol.estimate)
        report["output"] = str(args.out)
        if args.truth:
            truth = read_matrix_market(args.truth)
            report["metrics"] = accuracy_report(sol.to_dense(), truth, zero_tol=10 * args.tol).to_dict()
    report["timings_ms"] = timer.ms
    write_json(_report_path(args), report)
    if code == EXIT_CONDITIONS:
        print(f"glx: closed-form conditions failed: {report['error']}", file=sys.stderr)
    return code


def cmd_check(args, argv):
    timer = _Timer()
    sigma, src = _load_sigma(args, timer)
    lam, k = _resolve_lambda(args, sigma)
    report = _base_report(argv, src, lam, k)
    with timer("check"):
        res = residue(sigma, lam)
        cond = check_conditions(res)
        report["conditions"] = cond.to_dict()
        report["components"] = _component_stats(res, cond, cap=args.path_cap)
        try:
            approx_solution(res)
        except DegenerateEntry as exc:
            report["degenerate_entry"] = {"i": exc.i, "j": exc.j, "value": exc.value}
        try:
            report["certificate"] = epsilon_certificate(res, report=cond, cap=args.path_cap).to_dict()
        except (CertificateUnavailable, DegenerateEntry) as exc:
            report["certificate"] = None
            report["certificate_unavailable"] = str(exc)
    report["timings_ms"] = timer.ms
    if args.report:
        write_json(args.report, report)
    else:
        import json

        from .io import _jsonable

        print(json.dumps(_jsonable(report), indent=2))
    return EXIT_OK


def _fit_exponent(sizes, times):
    x, y = np.log(np.asarray(sizes, float)), np.log(np.asarray(times, float))
    if len(set(sizes)) < 2:
        return None
    return float(np.polyfit(x, y, 1)[0])


def run_bench(sizes, seeds, nnz_factor=5.0, methods=("closed", "glasso", "warm"), tol=1e-7,
              max_iter=10_000):
    """Time the estimation pipelines on random sparse instances.

    Each instance draws ``d/2`` samples from ``random_precision`` with about
    ``nnz_factor * d`` off-diagonal nonzeros and picks ``lambda`` so that
    thresholding keeps as many pairs as the true precision has edges.
    Returns ``(rows, summary)``.
    """
    rows = []
    for d in sizes:
        for seed in seeds:
            inst = random_precision(d, int(round(nnz_factor * d)), seed)
            x = sample_gaussian(inst, max(1, d // 2), seed)
            sigma = sample_covariance(x)
            k = inst.true_precision.nnz_offdiag
            lam = float(lambda_for_k(magnitude_ladder(sigma), k))
            row = {"d": d, "seed": seed, "k": k, "lambda": lam}
            ests = {}
            if "closed" in methods:
                t0 = time.perf_counter()
                res = residue(sigma, lam)
                sol = closed_form_solution(res)
                row["closed_s"] = time.perf_counter() - t0
                ests["closed"] = sol.to_dense()
                row["closed_method"] = sol.method
            if "glasso" in methods:
                t0 = time.perf_counter()
                g = glasso_solve(sigma, lam, SolverConfig(tol, max_iter))
                row["glasso_s"] = time.perf_counter() - t0
                row["glasso_sweeps"] = g.iterations
                ests["glasso"] = g.to_dense()
            if "warm" in methods:
                t0 = time.perf_counter()
                w = warm_start_solve(sigma, lam, SolverConfig(tol, max_iter))
                row["warm_s"] = time.perf_counter() - t0
                ests["warm"] = w.to_dense()
            truth = inst.true_precision.to_dense()
            for name, est in ests.items():
                rep = accuracy_report(est, truth, zero_tol=10 * tol if name != "closed" else 0.0)
                row[f"{name}_tpr"], row[f"{name}_fpr"] = rep.tpr, rep.fpr
            if "closed" in ests and "glasso" in ests:
                try:
                    row["rel_gap"] = optimality_gap(ests["closed"], sigma, lam, ests["glasso"]).relative
                except GlxError:
                    row["rel_gap"] = math.inf
                row["speedup"] = row["glasso_s"] / row["closed_s"]
            rows.append(row)
    summary = {}
    if "closed" in methods:
        by_d = {}
        for r in rows:
            by_d.setdefault(r["d"], []).append(r["closed_s"])
        ds = sorted(by_d)
        summary["closed_exponent"] = _fit_exponent(ds, [float(np.median(by_d[d])) for d in ds])
    if any("speedup" in r for r in rows):
        summary["min_speedup"] = min(r["speedup"] for r in rows if "speedup" in r)
    return rows, summary


def cmd_bench(args, argv):
    sizes = [int(s) for s in args.sizes.split(",")]
    seeds = [int(s) for s in args.seeds.split(",")]
    methods = tuple(args.methods.split(","))
    t0 = time.perf_counter()
    rows, summary = run_bench(sizes, seeds, args.nnz_factor, methods, args.tol, args.max_iter)
    report = _base_report(argv, None, None, None)
    report.update(rows=rows, summary=summary)
    report["timings_ms"] = {"total": 1e3 * (time.perf_counter() - t0)}
    write_json(args.report, report)
    if args.csv:
        keys = sorted({k for r in rows for k in r})
        lines = [",".join(keys)] + [",".join(str(r.get(k, "")) for k in keys) for r in rows]
        from .io import atomic_write_text

        atomic_write_text(args.csv, "\n".join(lines) + "\n")
    return EXIT_OK


def cmd_gen(args, argv):
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    report = {"schema_version": SCHEMA_VERSION, "command": argv, "kind": args.kind,
              "seed": args.seed, "d": args.d, "files": {}}
    if args.kind == "random":
        nnz = args.nnz if args.nnz is not None else 5 * args.d
        inst = random_precision(args.d, nnz, args.seed)
        write_matrix_market(out / "precision.mtx", inst.true_precision)
        write_matrix_market(out / "covariance.mtx", inst.true_covariance)
        report["files"].update(precision="precision.mtx", covariance="covariance.mtx")
        achieved = 2 * inst.true_precision.nnz_offdiag
        report.update(target_nnz=nnz, achieved_nnz=achieved,
                      nnz_rel_error=(achieved - nnz) / nnz if nnz else 0.0)
        n = args.n if args.n is not None else max(1, args.d // 2)
        if n > 0:
            write_samples_csv(out / "samples.csv", sample_gaussian(inst, n, args.seed))
            report["files"]["samples"] = "samples.csv"
            report["n"] = n
    else:
        if args.kind == "tree":
            inst = spanning_tree_covariance(args.d, args.seed, omega=args.omega)
            report["omega"] = args.omega
        else:
            inst = cycle_covariance(args.d, args.seed)
        write_matrix_market(out / "covariance.mtx", inst.sigma)
        report["files"]["covariance"] = "covariance.mtx"
        report.update(lam=inst.lam, lam_interval=list(inst.lam_interval), edges=inst.edges)
    write_json(out / "gen.report.json", report)
    return EXIT_OK


def _add_input(p):
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--cov", help="covariance matrix (Matrix Market)")
    src.add_argument("--samples", help="observations as headered CSV")
    lam = p.add_mutually_exclusive_group(required=True)
    lam.add_argument("--lambda", dest="lam", type=float, help="regularization weight")
    lam.add_argument("--k", type=int, help="keep the k largest off-diagonal magnitudes")
    miss = p.add_mutually_exclusive_group()
    miss.add_argument("--impute", choices=["drop", "linear-time"], default="drop",
                      help="missing-value policy for CSV samples (default: drop)")
    miss.add_argument("--drop-rows", dest="impute", action="store_const", const="drop")
    p.add_argument("--threads", type=int, help="thread cap (falls back to GLX_THREADS)")


def build_parser():
    parser = argparse.ArgumentParser(prog="glx", description="Closed-form graphical lasso tools")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("estimate", help="estimate a sparse precision matrix")
    _add_input(p)
    p.add_argument("--method", choices=["closed", "approx", "glasso", "warm"], default="warm")
    p.add_argument("--tol", type=float, default=1e-7)
    p.add_argument("--max-iter", type=int, default=10_000)
    p.add_argument("--out", required=True, help="estimate output (Matrix Market)")
    p.add_argument("--report", help="JSON report path (default: <out>.report.json)")
    p.add_argument("--truth", help="true precision matrix for accuracy metrics")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("check", help="report closed-form conditions and the epsilon certificate")
    _add_input(p)
    p.add_argument("--report", help="JSON report path (default: stdout)")
    p.add_argument("--path-cap", type=int, default=PATH_CAP)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("bench", help="time closed form against the numerical solver")
    p.add_argument("--sizes", default="500,1000")
    p.add_argument("--seeds", default="0")
    p.add_argument("--nnz-factor", type=float, default=5.0)
    p.add_argument("--methods", default="closed,glasso,warm")
    p.add_argument("--tol", type=float, default=1e-7)
    p.add_argument("--max-iter", type=int, default=10_000)
    p.add_argument("--report", required=True)
    p.add_argument("--csv", help="also write the per-instance table as CSV")
    p.add_argument("--seed", type=int, help="shorthand for --seeds N")
    p.add_argument("--threads", type=int)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("gen", help="write a synthetic instance")
    p.add_argument("kind", choices=["random", "tree", "cycle"])
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--nnz", type=int, help="target off-diagonal nonzeros (random; default 5d)")
    p.add_argument("--n", type=int, help="number of samples (random; default d/2, 0 for none)")
    p.add_argument("--omega", type=float, default=0.02)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=cmd_gen)
    return parser


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_ERROR
    if getattr(args, "seed", None) is not None and args.command == "bench":
        args.seeds = str(args.seed)
    try:
        with _threads(args):
            return args.func(args, argv)
    except (OSError, ValueError, GlxError) as exc:
        print(f"glx: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
