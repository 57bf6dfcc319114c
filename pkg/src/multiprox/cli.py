"""Command-line front end: solve problem files, run the benchmark protocol,
and re-verify stored traces.

Exit codes: 0 success; 1 run ended on the iteration cap; 2 parse/validation
error; 3 infeasible initial point; 4 subproblem solver failure; 5
trace/problem hash mismatch; 6 violated invariant (named on stderr).
"""
from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import bench as bench_mod
from . import problem_io as pio
from .diagnostics import certificate_report
from .driver import SolverConfig, multiprox_backtracking_run, multiprox_run, pgnm_run
from .errors import (InfeasibleStart, InfeasibleSubproblem, NonConvergence,
                     UnboundedSubproblem, WhileLoopDivergence)
from .model import linearize, majorization_holds

EXIT_OK = 0
EXIT_MAXED = 1
EXIT_PARSE = 2
EXIT_INFEASIBLE = 3
EXIT_SUBSOLVER = 4
EXIT_MISMATCH = 5
EXIT_INVARIANT = 6

_SOLVER_ERRORS = (UnboundedSubproblem, InfeasibleSubproblem, NonConvergence,
                  WhileLoopDivergence)


def _parse_alpha0(text):
    if text is None:
        return None
    return np.array([float(v) for v in text.split(",")], dtype=float)


def _config_from_args(args) -> SolverConfig:
    cfg = SolverConfig(
        mode="backtracking" if args.mode == "backtracking" else "fixed",
        eta=args.eta,
        alpha0=_parse_alpha0(args.alpha0),
        step_tolerance=args.tol_step,
        max_outer=args.max_outer,
        inner_tolerance=args.tol_inner,
        max_inner=args.max_inner,
    )
    return cfg


def cmd_solve(args) -> int:
    try:
        spec = pio.load_problem(args.problem)
        problem = spec.build()
        cfg = _config_from_args(args)
    except (ValueError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_PARSE

    try:
        if args.mode == "pgnm":
            trace = pgnm_run(problem, spec.x0, cfg)
        elif args.mode == "backtracking":
            trace = multiprox_backtracking_run(problem, spec.x0, cfg)
        else:
            trace = multiprox_run(problem, spec.x0, cfg)
    except InfeasibleStart as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except _SOLVER_ERRORS as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_SUBSOLVER

    out = args.out or os.path.splitext(args.problem)[0] + ".trace"
    csv_path, sidecar_path = out + ".csv", out + ".json"
    report = certificate_report(problem, trace, xbar=spec.xbar)
    pio.write_trace_csv(csv_path, trace, solver=args.mode)
    pio.write_sidecar(sidecar_path, trace=trace,
                      problem_sha=pio.file_sha256(args.problem),
                      trace_sha=pio.file_sha256(csv_path),
                      report=report, solver=args.mode)
    print(f"{trace.termination}: {trace.num_steps} steps, final objective "
          f"{trace.objectives[-1]:.12g}; wrote {csv_path} and {sidecar_path}")
    if trace.termination in ("optimal", "step-tolerance"):
        return EXIT_OK
    return EXIT_MAXED


def _bench_cell_worker(task):
    """Run one benchmark cell in a worker process; returns plain data."""
    n, m, seed, k_marks, max_outer, reference_tol = task
    try:
        ref, runs = bench_mod.run_cell(n, m, seed, max_outer=max_outer,
                                       reference_tol=reference_tol)
    except Exception as err:
        return {"m": m, "seed": seed, "error": str(err)}
    return {"m": m, "seed": seed, "error": None, "ref": ref,
            "runs": {name: (trace, gaps) for name, (trace, gaps) in runs.items()}}


def _write_cell_files(out_dir, n, m, seed, ref, runs) -> None:
    inst = bench_mod.generate_instance(n, m, seed)
    spec = pio.ProblemSpec(
        kernel_structure="max", kernel_params={},
        components=[pio.ComponentSpec("quadratic", Q=np.asarray(Qi),
                                      b=np.asarray(bi), c=float(ci),
                                      lipschitz=float(Li))
                    for Qi, bi, ci, Li in zip(inst.Q, inst.b, inst.c, inst.L)],
        x0=np.zeros(n))
    problem_path = os.path.join(out_dir, f"m{m}_seed{seed}.problem.json")
    pio.save_problem(problem_path, spec)
    problem = spec.build()
    xstar, gstar = ref
    for name, (trace, gaps) in runs.items():
        stem = os.path.join(out_dir, f"m{m}_seed{seed}_{name}")
        pio.write_trace_csv(stem + ".csv", trace, solver=name, m=m, seed=seed,
                            gaps=gaps)
        report = certificate_report(problem, trace, xstar=xstar)
        pio.write_sidecar(stem + ".json", trace=trace,
                          problem_sha=pio.file_sha256(problem_path),
                          trace_sha=pio.file_sha256(stem + ".csv"),
                          report=report, solver=name, xstar=xstar)


def cmd_bench(args) -> int:
    if args.n < 2 or args.seeds < 1 or any(m < 2 for m in args.m):
        print("error: need n >= 2, every m >= 2, and at least one seed",
              file=sys.stderr)
        return EXIT_PARSE
    os.makedirs(args.out, exist_ok=True)
    k_marks = tuple(args.k_marks)
    tasks = [(args.n, m, seed, k_marks, args.max_outer, args.tol_reference)
             for m in args.m for seed in range(args.seeds)]
    if args.workers > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            results = list(pool.map(_bench_cell_worker, tasks))
    else:
        results = [_bench_cell_worker(t) for t in tasks]

    report = bench_mod.BenchReport(n=args.n, k_marks=k_marks)
    for task, res in zip(tasks, results):
        m, seed = res["m"], res["seed"]
        if res["error"] is not None:
            report.failures.append({"m": m, "seed": seed, "error": res["error"]})
            continue
        report.references[(m, seed)] = res["ref"]
        for name, (trace, gaps) in res["runs"].items():
            report.cells.append(bench_mod.BenchCell(
                m=m, seed=seed, solver=name,
                gaps={k: bench_mod.gap_at(gaps, k) for k in k_marks},
                online=float(np.max(trace.curvature_weights())),
                termination=trace.termination))
            report.traces[(m, seed, name)] = trace
        _write_cell_files(args.out, args.n, m, seed, res["ref"], res["runs"])

    bench_mod.write_csv(os.path.join(args.out, "cells.csv"), report.csv_rows())
    summary = {
        "n": args.n, "k_marks": list(k_marks),
        "aggregate": {f"m={m} {solver} k={k}": {"mean": mean, "std": std, "count": cnt}
                      for (m, solver, k), (mean, std, cnt)
                      in sorted(report.aggregate().items())},
        "failures": report.failures,
    }
    with open(os.path.join(args.out, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=1)
    for key, val in summary["aggregate"].items():
        print(f"{key}: mean={val['mean']:.4g} std={val['std']:.4g}")
    if report.failures:
        print(f"{len(report.failures)} cell(s) failed", file=sys.stderr)
    if report.cells:
        return EXIT_OK
    return EXIT_SUBSOLVER


def _verify_fail(name: str) -> int:
    print(f"violated invariant: {name}", file=sys.stderr)
    return EXIT_INVARIANT


def cmd_verify(args) -> int:
    sidecar_path = args.sidecar or os.path.splitext(args.trace)[0] + ".json"
    try:
        rows = pio.read_trace_csv(args.trace)
        side = pio.read_sidecar(sidecar_path)
        spec = pio.load_problem(args.problem)
    except (ValueError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_PARSE

    if pio.file_sha256(args.trace) != side.get("trace_sha256"):
        print("trace hash mismatch", file=sys.stderr)
        return EXIT_MISMATCH
    if pio.file_sha256(args.problem) != side.get("problem_sha256"):
        print("problem hash mismatch", file=sys.stderr)
        return EXIT_MISMATCH

    problem = spec.build()
    objectives = [float(r["objective"]) for r in rows]
    for k in range(1, len(objectives)):
        if objectives[k] > objectives[k - 1] + 1e-9 * (1.0 + abs(objectives[k - 1])):
            return _verify_fail("descent")

    replay = side["replay"]
    iterates = [np.asarray(x, dtype=float) for x in replay["iterates"]]
    alphas = [np.asarray(a, dtype=float) for a in replay["alphas"]]
    multipliers = [np.asarray(v, dtype=float) for v in replay["multipliers"]]
    for k, alpha in enumerate(alphas):
        mv = linearize(problem, iterates[k], alpha)
        if not bool(np.all(majorization_holds(mv, iterates[k + 1], 1e-8))):
            return _verify_fail("majorization")

    xstar = replay.get("xstar")
    if xstar is not None:
        xstar = np.asarray(xstar, dtype=float)
        dists = [float(np.linalg.norm(x - xstar)) for x in iterates]
        for k in range(1, len(dists)):
            if dists[k] > dists[k - 1] + 1e-9 * (1.0 + dists[k - 1]):
                return _verify_fail("fejer")
        weights = np.array([float(a @ nu) for a, nu in zip(alphas, multipliers)])
        running = np.maximum.accumulate(weights)
        from .model import objective as _objective
        gstar = min(_objective(problem, xstar), min(objectives))
        R2 = float(np.sum((iterates[0] - xstar) ** 2))
        for k in range(1, len(objectives)):
            gap = objectives[k] - gstar
            bound = running[min(k - 1, running.size - 1)] * R2 / (2.0 * k)
            if gap > bound * (1.0 + 1e-8) + 1e-10:
                return _verify_fail("online-certificate")

    print("all invariants hold")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="multiprox",
        description="Composite convex minimization by per-component proximal "
                    "linearization")
    sub = parser.add_subparsers(dest="command", required=True)

    ps = sub.add_parser("solve", help="solve a problem file")
    ps.add_argument("problem", help="problem JSON path")
    ps.add_argument("--mode", choices=("fixed", "backtracking", "pgnm"),
                    default="fixed")
    ps.add_argument("--eta", type=float, default=2.0)
    ps.add_argument("--alpha0", default=None,
                    help="comma-separated initial curvatures")
    ps.add_argument("--tol-step", type=float, default=1e-9)
    ps.add_argument("--tol-inner", type=float, default=1e-10)
    ps.add_argument("--max-outer", type=int, default=10_000)
    ps.add_argument("--max-inner", type=int, default=10_000)
    ps.add_argument("--out", default=None,
                    help="output stem for <stem>.csv and <stem>.json")
    ps.set_defaults(func=cmd_solve)

    pb = sub.add_parser("bench", help="run the synthetic min-max benchmark")
    pb.add_argument("--n", type=int, default=100)
    pb.add_argument("--m", type=int, nargs="+", default=[5, 10])
    pb.add_argument("--seeds", type=int, default=20,
                    help="number of seeds (0..seeds-1)")
    pb.add_argument("--k-marks", type=int, nargs="+", default=[10, 20])
    pb.add_argument("--max-outer", type=int, default=200)
    pb.add_argument("--tol-reference", type=float, default=1e-10)
    pb.add_argument("--workers", type=int, default=1)
    pb.add_argument("--out", required=True, help="output directory")
    pb.set_defaults(func=cmd_bench)

    pv = sub.add_parser("verify", help="re-check the invariants of a stored trace")
    pv.add_argument("trace", help="trace CSV path")
    pv.add_argument("problem", help="problem JSON path")
    pv.add_argument("--sidecar", default=None,
                    help="sidecar JSON path (default: trace stem + .json)")
    pv.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
