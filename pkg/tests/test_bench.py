"""Benchmark harness: instance law, determinism, reference solutions, gaps."""
import numpy as np
import pytest

from multiprox.bench import (gap_at, generate_instance, instance_problem,
                             normalized_gap, reference_solution, run_table1,
                             write_csv, CSV_COLUMNS)
from multiprox.diagnostics import fermat_residual, online_constant
from multiprox.driver import SolverConfig, multiprox_run
from multiprox.errors import DegenerateGap
from multiprox.model import minmax_problem, quadratic_component, objective


def test_instance_dimensions_and_constants():
    inst = generate_instance(12, 5, seed=7)
    assert inst.c[-1] == pytest.approx(100.0)
    assert np.allclose(inst.c, 10.0 ** (2 * np.arange(1, 6) / 5))
    assert inst.L[-1] == 0.0
    assert np.allclose(inst.Q[-1], 0.0)
    # largest spectrum element of component i is (i+1) * 10^(n/(n-1))
    assert np.allclose(inst.L[:-1],
                       [2 * (i + 1) * 10 ** (12 / 11) for i in range(4)])


def test_instance_l1_formula_at_n100():
    inst = generate_instance(100, 5, seed=0)
    assert inst.L[0] == pytest.approx(2 * 10 ** (100 / 99))
    assert inst.L[0] == pytest.approx(20.4706, abs=1e-3)


def test_householder_orthogonality_and_spectrum():
    n, m = 10, 4
    inst = generate_instance(n, m, seed=11)
    base = 10.0 ** (np.arange(1, n + 1) / (n - 1))
    for i, Q in enumerate(inst.Q[:-1]):
        assert np.allclose(Q, Q.T, atol=1e-12)
        ev = np.sort(np.linalg.eigvalsh(Q))
        assert np.allclose(ev, np.sort((i + 1) * base), rtol=1e-10)


def test_instance_determinism_bit_identical():
    a = generate_instance(9, 3, seed=42)
    b = generate_instance(9, 3, seed=42)
    for Qa, Qb in zip(a.Q, b.Q):
        assert np.array_equal(Qa, Qb)
    for ba, bb in zip(a.b, b.b):
        assert np.array_equal(ba, bb)
    c = generate_instance(9, 3, seed=43)
    assert not np.array_equal(a.b[0], c.b[0])


def test_instance_dimension_validation():
    with pytest.raises(ValueError):
        generate_instance(1, 3, seed=0)
    with pytest.raises(ValueError):
        generate_instance(5, 1, seed=0)


def test_instance_objective_at_origin_is_cm():
    inst = generate_instance(8, 3, seed=5)
    p = instance_problem(inst)
    assert objective(p, np.zeros(8)) == pytest.approx(100.0)


def test_reference_solution_two_quadratic():
    # hand-built miniature: the reference machinery on a known optimum
    comps = [quadratic_component([[1.0]], [0.0], 0.0),
             quadratic_component([[1.0]], [-2.0], 1.0)]
    p = minmax_problem(comps)
    cfg = SolverConfig(fermat_tolerance=1e-10, step_tolerance=None,
                       max_outer=1000, inner_tolerance=1e-13)
    tr = multiprox_run(p, np.zeros(1), cfg)
    assert tr.termination == "optimal"
    assert tr.final[0] == pytest.approx(0.5, abs=1e-9)
    assert tr.objectives[-1] == pytest.approx(0.25, abs=1e-10)


def test_reference_solution_certified(tiny_instance):
    inst, (xstar, gstar) = tiny_instance
    p = instance_problem(inst)
    assert fermat_residual(p, xstar) <= 1e-10
    # determinism of the full pipeline
    x2, g2 = reference_solution(inst, 1e-10)
    assert np.array_equal(xstar, x2)
    assert gstar == g2


@pytest.fixture(scope="module")
def tiny_instance():
    inst = generate_instance(12, 3, seed=1)
    return inst, reference_solution(inst, 1e-10)


def test_normalized_gap_shape(tiny_instance):
    inst, (xstar, gstar) = tiny_instance
    p = instance_problem(inst)
    tr = multiprox_run(p, np.zeros(12),
                       SolverConfig(max_outer=40, step_tolerance=None,
                                    fermat_tolerance=1e-9))
    gaps = normalized_gap(tr, gstar)
    assert gaps[0] == 100.0
    assert np.all(np.diff(gaps) <= 1e-9)
    assert gap_at(gaps, 10_000) == gaps[-1]


def test_normalized_gap_one_step_exact():
    p = minmax_problem([quadratic_component([[1.0]], [0.0], 0.0)])
    tr = multiprox_run(p, np.array([3.0]))
    gaps = normalized_gap(tr, 0.0)
    assert gaps[0] == 100.0
    assert gaps[1] == pytest.approx(0.0, abs=1e-12)


def test_normalized_gap_degenerate_signal():
    p = minmax_problem([quadratic_component([[1.0]], [0.0], 0.0)])
    tr = multiprox_run(p, np.array([0.0]))
    with pytest.raises(DegenerateGap):
        normalized_gap(tr, 0.0)


def test_run_table1_small_profile(tmp_path):
    rep = run_table1(16, [3], range(2), k_marks=(5, 10), max_outer=40)
    assert not rep.failures
    agg = rep.aggregate()
    assert (3, "multiprox", 5) in agg and (3, "pgnm", 10) in agg
    for cell in rep.cells:
        assert 0.0 <= cell.gaps[5] <= 100.0 + 1e-9
        assert cell.gaps[10] <= cell.gaps[5] + 1e-9
    # every trace satisfies descent, and multiprox dominates its own later marks
    for key, tr in rep.traces.items():
        g = np.asarray(tr.objectives)
        assert np.all(np.diff(g) <= 1e-9 * (1 + np.abs(g[:-1])))
        assert online_constant(tr) > 0
    rows = rep.csv_rows()
    path = tmp_path / "cells.csv"
    write_csv(path, rows)
    header = path.read_text().splitlines()[0]
    assert header == ",".join(CSV_COLUMNS)
    assert len(rows) == len(rep.cells) * 2


def test_full_scale_single_cell_gap_profile():
    # one full-size instance: strictly decreasing objective and a
    # sub-percent normalized gap by iteration 10
    inst = generate_instance(100, 5, seed=0)
    p = instance_problem(inst)
    xstar, gstar = reference_solution(inst, 1e-10)
    cfg = SolverConfig(max_outer=25, step_tolerance=None,
                       fermat_tolerance=1e-9, inner_tolerance=1e-11)
    tr = multiprox_run(p, np.zeros(100), cfg)
    g = np.asarray(tr.objectives)
    assert np.all(np.diff(g) < 0)
    gaps = normalized_gap(tr, gstar)
    assert gaps[10] < 1.0


def test_run_table1_records_failures(monkeypatch):
    import multiprox.bench as bench_mod

    def boom(*a, **k):
        raise RuntimeError("synthetic failure")

    monkeypatch.setattr(bench_mod, "reference_solution", boom)
    rep = run_table1(8, [3], range(1), max_outer=5)
    assert rep.failures and rep.failures[0]["m"] == 3
    assert not rep.cells
