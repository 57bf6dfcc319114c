#!/usr/bin/env python3
"""Reproduce the synthetic min-max comparison table.

Runs the full protocol (n=100, m in {5,10}, 20 seeds, marks at k=10 and
k=20) through the library and prints the aggregate normalized-gap table;
pass --full for the wider m sweep or --fast for a quick small-scale sanity
run.  Writing per-cell artifacts to disk is the CLI's job
(``multiprox bench``); this script is the in-process variant used while
experimenting.
"""
import argparse
import time

from multiprox.bench import run_table1


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=100)
    ap.add_argument("--m", type=int, nargs="+", default=None)
    ap.add_argument("--seeds", type=int, default=20)
    ap.add_argument("--max-outer", type=int, default=200)
    ap.add_argument("--fast", action="store_true",
                    help="small profile: n=20, m=5, 5 seeds")
    ap.add_argument("--full", action="store_true",
                    help="wider m sweep 5..30")
    args = ap.parse_args()

    n, seeds = args.n, args.seeds
    m_list = args.m or [5, 10]
    if args.fast:
        n, m_list, seeds = 20, [5], 5
    if args.full:
        m_list = [5, 10, 15, 20, 25, 30]

    t0 = time.perf_counter()
    report = run_table1(n, m_list, range(seeds), k_marks=(10, 20),
                        max_outer=args.max_outer, keep_traces=False)
    elapsed = time.perf_counter() - t0

    print(f"\nnormalized suboptimality gap (percent), n={n}, "
          f"{seeds} seeds, {elapsed:.0f}s")
    print(f"{'m':>4} {'solver':>10} {'k':>4} {'mean':>12} {'std':>12}")
    for (m, solver, k), (mean, std, cnt) in sorted(report.aggregate().items()):
        print(f"{m:>4} {solver:>10} {k:>4} {mean:>12.4g} {std:>12.4g}")
    if report.failures:
        print(f"{len(report.failures)} failed cells: {report.failures}")


if __name__ == "__main__":
    main()
