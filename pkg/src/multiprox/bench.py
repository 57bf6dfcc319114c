"""Synthetic min-max benchmark: instance generation, reference solutions,
normalized suboptimality gaps, and the aggregate comparison table.

Instance family
---------------
Minimize max_i f_i(x) over R^n with f_i(x) = x'Q_i x + b_i' x + c_i:

* Q_i = Y_i D_i Y_i for i < m, with Y_i = I - 2 w w'/||w||^2 a Householder
  reflector (w standard normal) and D_i a diagonal matrix whose entries are
  a random shuffle of {i * 10^(j/(n-1)), j = 1..n}; Q_m = 0 so the last
  component is affine.
* b_i has independent centered Gaussian coordinates with standard deviation
  (1/3)^2; c_i = 10^(2i/m).  The b scale sets how far the optimum sits below
  the common initial value and thereby fixes the gap statistics the
  acceptance suite pins.
* The curvature constant of f_i is twice the largest eigenvalue of Q_i,
  known exactly from the spectrum set; the affine component carries zero.

Determinism: a counter-based 64-bit generator (Philox) keyed by the seed,
with a fixed draw order -- the Householder vectors for i = 1..m-1, then the
spectrum shuffles for i = 1..m-1, then the b vectors for i = 1..m.  The same
(n, m, seed) triple always produces bit-identical data.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .diagnostics import online_constant
from .driver import RunTrace, SolverConfig, multiprox_run, pgnm_run
from .errors import DegenerateGap, NonConvergence
from .model import CompositeProblem, minmax_problem, quadratic_component

CSV_COLUMNS = ("m", "seed", "solver", "k", "normalized_gap_percent",
               "objective", "step_norm", "online_constant")


@dataclass(frozen=True)
class MinMaxInstance:
    """One synthetic min-max problem with its derived curvature vector."""

    n: int
    m: int
    seed: int
    Q: tuple
    b: tuple
    c: np.ndarray
    L: np.ndarray


def generate_instance(n: int, m: int, seed: int) -> MinMaxInstance:
    """Deterministic instance for the triple (n, m, seed); see the module
    docstring for the data law and draw order."""
    if n < 2:
        raise ValueError("need n >= 2")
    if m < 2:
        raise ValueError("need m >= 2")
    rng = np.random.Generator(np.random.Philox(key=np.uint64(seed)))

    omegas = [rng.standard_normal(n) for _ in range(m - 1)]
    base = 10.0 ** (np.arange(1, n + 1) / (n - 1))
    spectra = [rng.permutation((i + 1) * base) for i in range(m - 1)]
    b = tuple(rng.normal(0.0, (1.0 / 3.0) ** 2, size=n) for _ in range(m))

    Q = []
    for w, spec in zip(omegas, spectra):
        Y = np.eye(n) - 2.0 * np.outer(w, w) / float(w @ w)
        Q.append(Y @ (spec[:, None] * Y))
    Q.append(np.zeros((n, n)))

    c = 10.0 ** (2.0 * np.arange(1, m + 1) / m)
    L = np.array([2.0 * (i + 1) * 10.0 ** (n / (n - 1)) for i in range(m - 1)]
                 + [0.0])
    return MinMaxInstance(n=n, m=m, seed=seed, Q=tuple(Q), b=b, c=c, L=L)


def instance_problem(inst: MinMaxInstance) -> CompositeProblem:
    comps = [quadratic_component(Qi, bi, ci, lipschitz=Li)
             for Qi, bi, ci, Li in zip(inst.Q, inst.b, inst.c, inst.L)]
    return minmax_problem(comps)


def reference_solution(inst: MinMaxInstance, tol: float = 1e-10, *,
                       max_outer: int = 200_000):
    """High-accuracy solution by a fixed-curvature run driven to a
    first-order residual below ``tol``.  Returns (xstar, gstar)."""
    problem = instance_problem(inst)
    cfg = SolverConfig(fermat_tolerance=tol, step_tolerance=None,
                       max_outer=max_outer, inner_tolerance=1e-13,
                       max_inner=50_000)
    trace = multiprox_run(problem, np.zeros(inst.n), cfg)
    if trace.termination != "optimal":
        raise NonConvergence(
            f"reference solve for (n={inst.n}, m={inst.m}, seed={inst.seed}) "
            f"stopped on {trace.termination!r}")
    return trace.final, trace.objectives[-1]


def normalized_gap(trace: RunTrace, gstar: float) -> np.ndarray:
    """100 * (g_k - g*) / (g_0 - g*) for every recorded iterate; exactly 100
    at k = 0.  Raises ``DegenerateGap`` when the run started optimal."""
    g = np.asarray(trace.objectives, dtype=float)
    denom = g[0] - gstar
    if denom <= 0.0:
        raise DegenerateGap("initial point already optimal; gap undefined")
    return 100.0 * (g - gstar) / denom


def gap_at(gaps: np.ndarray, k: int) -> float:
    """Gap at iteration k, extending a terminated trace by its last value
    (the iterate is pinned after an optimality certificate)."""
    k = min(k, gaps.size - 1)
    return float(gaps[k])


@dataclass
class BenchCell:
    m: int
    seed: int
    solver: str
    gaps: dict                  # mark -> percent
    online: float
    termination: str


@dataclass
class BenchReport:
    """Per-cell gaps plus aggregates over seeds."""

    n: int
    k_marks: tuple
    cells: list = field(default_factory=list)
    failures: list = field(default_factory=list)
    traces: dict = field(default_factory=dict)      # (m, seed, solver) -> trace
    references: dict = field(default_factory=dict)  # (m, seed) -> (xstar, gstar)

    def aggregate(self) -> dict:
        """(m, solver, k) -> (mean, std, count) over seeds."""
        table = {}
        for cell in self.cells:
            for k, gap in cell.gaps.items():
                table.setdefault((cell.m, cell.solver, k), []).append(gap)
        return {key: (float(np.mean(v)),
                      float(np.std(v, ddof=1)) if len(v) > 1 else 0.0,
                      len(v))
                for key, v in table.items()}

    def csv_rows(self) -> list:
        rows = []
        for cell in self.cells:
            trace = self.traces.get((cell.m, cell.seed, cell.solver))
            for k in sorted(cell.gaps):
                obj = step = ""
                if trace is not None:
                    idx = min(k, len(trace.objectives) - 1)
                    obj = trace.objectives[idx]
                    step = trace.step_norms[idx - 1] if idx >= 1 else ""
                rows.append({
                    "m": cell.m, "seed": cell.seed, "solver": cell.solver,
                    "k": k, "normalized_gap_percent": cell.gaps[k],
                    "objective": obj, "step_norm": step,
                    "online_constant": cell.online,
                })
        return rows


def run_cell(n: int, m: int, seed: int, *,
             max_outer: int = 200, reference_tol: float = 1e-10,
             inner_tolerance: float = 1e-11):
    """Reference solve plus one run per solver for a single (m, seed) cell.

    Returns (reference, {solver: (trace, gaps array)}).
    """
    inst = generate_instance(n, m, seed)
    problem = instance_problem(inst)
    xstar, gstar = reference_solution(inst, reference_tol)
    cfg = SolverConfig(max_outer=max_outer, step_tolerance=None,
                       fermat_tolerance=1e-9, inner_tolerance=inner_tolerance,
                       max_inner=50_000)
    x0 = np.zeros(n)
    runs = {
        "multiprox": multiprox_run(problem, x0, cfg),
        "pgnm": pgnm_run(problem, x0, cfg),
    }
    out = {name: (trace, normalized_gap(trace, gstar))
           for name, trace in runs.items()}
    return (xstar, gstar), out


def run_table1(n: int, m_list, seeds, *, k_marks=(10, 20),
               max_outer: int = 200, reference_tol: float = 1e-10,
               keep_traces: bool = True) -> BenchReport:
    """Full benchmark protocol: for each m and seed, generate the instance,
    compute the reference, run both solvers, and record normalized gaps at
    the requested iteration marks.  Per-cell failures are recorded, not
    fatal."""
    if isinstance(seeds, int):
        seeds = range(seeds)
    report = BenchReport(n=n, k_marks=tuple(k_marks))
    for m in m_list:
        for seed in seeds:
            try:
                ref, runs = run_cell(n, m, seed, max_outer=max_outer,
                                     reference_tol=reference_tol)
            except Exception as err:
                report.failures.append({"m": m, "seed": seed, "error": str(err)})
                continue
            report.references[(m, seed)] = ref
            for name, (trace, gaps) in runs.items():
                report.cells.append(BenchCell(
                    m=m, seed=seed, solver=name,
                    gaps={k: gap_at(gaps, k) for k in k_marks},
                    online=online_constant(trace),
                    termination=trace.termination,
                ))
                if keep_traces:
                    report.traces[(m, seed, name)] = trace
    return report


def write_csv(path, rows) -> None:
    import csv

    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        writer.writeheader()
        for row in rows:
            writer.writerow(row)
