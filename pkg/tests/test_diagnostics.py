"""Certificates: online constants, closed-form bounds, boundary geometry,
optimality residuals."""
import numpy as np
import pytest

from conftest import random_nlp_problem
from multiprox.diagnostics import (certificate_report, explicit_bound,
                                   explicit_gamma, fermat_residual,
                                   lipschitz_condition_bound, multiplier_bound,
                                   online_constant, operator_norm, sdist,
                                   slater_combination)
from multiprox.driver import SolverConfig, multiprox_run
from multiprox.errors import BoundaryFree, SlaterViolation
from multiprox.kernels import (BoxProx, L1Prox, MaxKernel, NlpKernel,
                               SeparableKernel)
from multiprox.model import (affine_component, eval_model, eval_smooth,
                             linearize, minmax_problem, nlp_problem,
                             quadratic_component, separable_problem)
from multiprox.subsolve import solve_nlp_subproblem


def square():
    return quadratic_component([[1.0]], [0.0], 0.0)


def toy_constrained():
    """minimize y subject to y^2 - 1 <= 0."""
    return nlp_problem(affine_component([1.0], 0.0),
                       [quadratic_component([[1.0]], [0.0], -1.0)], dim=1)


# ---------------------------------------------------------------- online

def test_online_constant_forward_backward():
    obj = quadratic_component([[0.5]], [-4.0], 8.0)   # L = 1
    p = separable_problem(obj, 1, L1Prox(1.0))
    tr = multiprox_run(p, [0.0], SolverConfig(max_outer=30))
    w = tr.curvature_weights()
    assert np.allclose(w, 1.0, atol=1e-12)
    assert online_constant(tr) == pytest.approx(1.0)


def test_online_constant_uniform_max():
    comps = [quadratic_component([[1.5]], [0.0], 0.0),
             quadratic_component([[1.5]], [-3.0], 1.0)]
    p = minmax_problem(comps)                          # L = (3, 3)
    tr = multiprox_run(p, [2.0], SolverConfig(max_outer=30))
    assert online_constant(tr) == pytest.approx(3.0, abs=1e-9)


def test_online_constant_single_step():
    p = minmax_problem([square()])
    tr = multiprox_run(p, [5.0])
    assert online_constant(tr) == pytest.approx(2.0)


def test_online_constant_needs_steps():
    from multiprox.driver import RunTrace
    with pytest.raises(ValueError):
        online_constant(RunTrace(iterates=[np.zeros(1)], objectives=[0.0]))


# ---------------------------------------------------------------- bounds

def test_lipschitz_condition_bound_values():
    comps = [quadratic_component([[1.5]], [0.0], 0.0),
             quadratic_component([[2.0]], [0.0], 0.0)]   # L = (3, 4)
    p = minmax_problem(comps)
    assert lipschitz_condition_bound(p) == pytest.approx(5.0)

    p_nlp = toy_constrained()
    L = p_nlp.smooth.curvature_vector
    assert lipschitz_condition_bound(p_nlp) == pytest.approx(np.linalg.norm(L))

    obj = quadratic_component([[0.5]], [0.0], 0.0)
    p_box = separable_problem(obj, 1, BoxProx(-1, 1))
    assert lipschitz_condition_bound(p_box) == np.inf


def test_operator_norm_matches_svd(rng):
    for _ in range(10):
        A = rng.normal(size=(4, 6))
        assert operator_norm(A) == pytest.approx(np.linalg.svd(A)[1][0],
                                                 rel=1e-6)


def test_explicit_gamma_full_domain_signals():
    p = minmax_problem([square()])
    with pytest.raises(BoundaryFree):
        explicit_gamma(p, np.zeros(1), np.zeros(1), np.zeros(1))


def test_explicit_gamma_toy_matches_hand_formula():
    p = toy_constrained()
    xbar = np.array([0.0])
    x0 = np.array([0.0])
    xstar = np.array([-1.0])
    # boundary distance at the interior point: constraint value -1
    assert sdist(eval_smooth(p, xbar), p.kernel) == pytest.approx(1.0)
    gamma = explicit_gamma(p, x0, xstar, xbar)
    # independent re-evaluation
    L = p.smooth.curvature_vector
    normL = np.linalg.norm(L)
    jop = np.linalg.svd(p.smooth.jacobian(x0))[1][0]
    d = 1.0
    r0 = np.linalg.norm(x0 - xstar)
    rbar = np.linalg.norm(xbar - xstar)
    expect = 8.0 * (jop + 0.5 * normL * (11 * r0 + rbar)) ** 2 \
        * (d + 0.5 * normL * (rbar + r0) ** 2) / d ** 2
    assert gamma == pytest.approx(expect, rel=1e-9)
    bound = explicit_bound(p, x0, xstar, xbar)
    lg = 1.0   # zero proximable term
    assert bound == pytest.approx(max(normL, gamma) * lg * r0 ** 2 / 2, rel=1e-9)


def test_explicit_gamma_requires_interior_point():
    p = toy_constrained()
    with pytest.raises(SlaterViolation):
        explicit_gamma(p, np.zeros(1), np.zeros(1), np.array([1.0]))


# ---------------------------------------------------------------- sdist

def test_sdist_halfline_block():
    k = NlpKernel(n_constraints=2)
    assert sdist([0.0, -3.0, -4.0], k) == pytest.approx(3.0)
    assert sdist([0.0, 1.0, -4.0], k) == pytest.approx(-1.0)
    assert sdist([0.0, 0.0, -4.0], k) == pytest.approx(0.0)


def test_sdist_combines_violations():
    k = NlpKernel(n_constraints=2)
    assert sdist([0.0, 3.0, 4.0], k) == pytest.approx(-5.0)


def test_sdist_box_tail():
    k = SeparableKernel(dim=2, prox=BoxProx(-1.0, 1.0))
    assert sdist([7.0, 0.0, 0.5], k) == pytest.approx(0.5)
    assert sdist([7.0, 0.0, 2.0], k) == pytest.approx(-1.0)


def test_sdist_boundary_free_signal():
    with pytest.raises(BoundaryFree):
        sdist([1.0, 2.0], MaxKernel(2))
    with pytest.raises(BoundaryFree):
        sdist([1.0, 2.0], SeparableKernel(dim=1, prox=L1Prox(1.0)))


def test_sdist_monotone_under_curved_shifts(rng):
    # pushing mass up the monotone coordinates can only shrink the margin
    p = random_nlp_problem(rng, dim=2, n_constraints=2)
    k = p.kernel
    L = p.smooth.curvature_vector
    for _ in range(120):
        z = np.concatenate([rng.normal(size=1), -rng.uniform(0, 2, 2)])
        d = np.where(L > 0, rng.uniform(0, 1.5, k.arity), 0.0)
        assert sdist(z, k) >= sdist(z + d, k) - 1e-12


# ---------------------------------------------------------------- slater

def test_slater_combination_at_interior_point():
    p = toy_constrained()
    xbar = np.array([0.0])
    w, margin = slater_combination(xbar, xbar, p)
    d = 1.0
    assert np.allclose(w, xbar)
    assert margin == pytest.approx(d / 4.0)
    mv = linearize(p, xbar)
    actual = sdist(eval_model(mv, w), p.kernel)
    assert actual == pytest.approx(d)
    assert actual >= margin


def test_slater_combination_1d_numeric():
    p = toy_constrained()
    xbar = np.array([0.0])
    for xv in (0.9, -0.5, 0.3):
        x = np.array([xv])
        w, margin = slater_combination(x, xbar, p)
        mv = linearize(p, x)
        actual = sdist(eval_model(mv, w), p.kernel)
        assert actual >= margin * (1 - 1e-12) - 1e-14


def test_slater_combination_boundary_free():
    p = minmax_problem([square()])
    with pytest.raises(BoundaryFree):
        slater_combination(np.zeros(1), np.zeros(1), p)


def test_slater_violation_detected():
    p = toy_constrained()
    with pytest.raises(SlaterViolation):
        slater_combination(np.zeros(1), np.array([1.0]), p)


# ---------------------------------------------------------------- fermat

def test_fermat_residual_values():
    p1 = minmax_problem([square()])
    assert fermat_residual(p1, np.array([0.0])) <= 1e-12
    assert fermat_residual(p1, np.array([5.0])) == pytest.approx(10.0)
    p2 = minmax_problem([square(), quadratic_component([[1.0]], [-2.0], 1.0)])
    assert fermat_residual(p2, np.array([0.5])) <= 1e-9


# ------------------------------------------------------- multiplier bounds

def test_multiplier_bound_interior_max():
    comps = [quadratic_component([[1.5]], [0.0], 0.0),
             quadratic_component([[2.0]], [0.0], 0.0)]   # L = (3, 4)
    p = minmax_problem(comps)
    b = multiplier_bound(np.zeros(1), np.zeros(1), np.array([0.5, 0.5]),
                         None, p, boundary_case=False)
    assert b == pytest.approx(5.0)
    # any simplex multiplier satisfies it
    assert np.array([3.0, 4.0]) @ np.array([0.0, 1.0]) <= b


def test_multiplier_bound_boundary_toy():
    p = toy_constrained()
    x = np.array([0.0])
    sub = solve_nlp_subproblem(x, linearize(p, x), p.kernel, tol=1e-12)
    L = p.smooth.curvature_vector
    xbar = np.array([0.0])
    bound = multiplier_bound(x, sub.y, sub.multiplier, xbar, p,
                             boundary_case=True)
    observed = float(L @ sub.multiplier)
    assert observed <= bound
    # independent re-evaluation of the boundary expression
    lg = 1.0
    normL = np.linalg.norm(L)
    jop = np.linalg.svd(p.smooth.jacobian(x))[1][0]
    move = np.linalg.norm(x - sub.y)
    toint = np.linalg.norm(xbar - x)
    d = 1.0
    expect = 8 * lg * (jop + 0.5 * normL * (3 * move + toint)) ** 2 \
        * (d + 0.5 * normL * toint ** 2) / d ** 2
    assert bound == pytest.approx(expect, rel=1e-9)


def test_multiplier_bound_inactive_constraints(rng):
    p = random_nlp_problem(rng, dim=2, n_constraints=2)
    x = np.zeros(2)
    sub = solve_nlp_subproblem(x, linearize(p, x), p.kernel, tol=1e-12)
    L = p.smooth.curvature_vector
    interior = multiplier_bound(x, sub.y, sub.multiplier, None, p,
                                boundary_case=False)
    if np.all(sub.multiplier[1:] <= 1e-12):
        assert float(L @ sub.multiplier) == pytest.approx(L[0])
        assert float(L @ sub.multiplier) <= interior


# ---------------------------------------------------------------- report

def test_certificate_report_assembly():
    p = toy_constrained()
    tr = multiprox_run(p, np.array([0.0]), SolverConfig(max_outer=50))
    rep = certificate_report(p, tr, xstar=np.array([-1.0]),
                             xbar=np.array([0.0]))
    assert rep.online_constant > 0
    assert rep.lipschitz_bound == pytest.approx(
        np.linalg.norm(p.smooth.curvature_vector))
    assert rep.explicit_gamma is not None and rep.explicit_gamma > 0
    assert rep.slater_margin is not None and rep.slater_margin > 0
    assert rep.fermat_residual <= 1e-7
    assert len(rep.per_iteration_bound) == tr.num_steps
    doc = rep.to_dict()
    assert set(doc) == {"online_constant", "lipschitz_bound", "explicit_gamma",
                        "per_iteration_bound", "fermat_residual",
                        "slater_margin"}


def test_certificate_report_full_domain():
    p = minmax_problem([square()])
    tr = multiprox_run(p, np.array([3.0]))
    rep = certificate_report(p, tr, xstar=np.zeros(1), xbar=np.zeros(1))
    assert rep.explicit_gamma is None
    assert rep.slater_margin is None
    assert rep.lipschitz_bound == pytest.approx(2.0)
    assert rep.online_constant <= rep.lipschitz_bound + 1e-12


def test_online_constant_below_lipschitz_bound_on_full_domain(rng):
    # subgradients of a full-domain kernel have norm at most its Lipschitz
    # constant, so the run constant sits under L_g * ||L||
    from conftest import random_minmax_problem
    for _ in range(10):
        p = random_minmax_problem(rng, dim=2, m=3, affine_share=0.3)
        tr = multiprox_run(p, rng.uniform(-1, 1, 2), SolverConfig(max_outer=30))
        assert online_constant(tr) <= lipschitz_condition_bound(p) * (1 + 1e-12)
