"""Certificates and bounds: run-specific complexity constants, closed-form
condition-number estimates, multiplier bounds, interior-point margins, and
the first-order optimality residual.

Two families of certificate coexist.  The online constant max_j alpha_j' nu_j
is read off a finished trace and bounds the suboptimality gap at step k by
online * ||x0 - x*||^2 / (2k).  The closed-form constants need only problem
data: L_g * ||L|| when the kernel is Lipschitz with full domain, and an
explicit expression built from an interior (Slater) point when the domain
has a boundary.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import BoundaryFree, SlaterViolation
from .kernels import kernel_lipschitz
from .model import CompositeProblem, eval_smooth, linearize
from .subsolve import solve_subproblem


@dataclass
class CertificateReport:
    """Everything the diagnostics layer can say about one run."""

    online_constant: float
    lipschitz_bound: float
    explicit_gamma: float | None
    per_iteration_bound: list = field(default_factory=list)
    fermat_residual: float = np.nan
    slater_margin: float | None = None

    def to_dict(self) -> dict:
        return {
            "online_constant": self.online_constant,
            "lipschitz_bound": self.lipschitz_bound,
            "explicit_gamma": self.explicit_gamma,
            "per_iteration_bound": list(self.per_iteration_bound),
            "fermat_residual": self.fermat_residual,
            "slater_margin": self.slater_margin,
        }


def online_constant(trace) -> float:
    """max over executed steps of alpha_j' nu_j (the run-specific constant)."""
    weights = trace.curvature_weights()
    if weights.size == 0:
        raise ValueError("trace contains no executed subproblem solves")
    return float(np.max(weights))


def lipschitz_condition_bound(problem: CompositeProblem) -> float:
    """L_g * ||L||; +inf when the kernel has no finite Lipschitz constant."""
    lg = kernel_lipschitz(problem.kernel)
    if not np.isfinite(lg):
        return np.inf
    curv = problem.smooth.curvature_vector
    return lg * float(np.linalg.norm(curv))


def operator_norm(A, iterations: int = 100, rtol: float = 1e-10) -> float:
    """Largest singular value by power iteration on A'A."""
    A = np.asarray(A, dtype=float)
    n = A.shape[1]
    v = np.ones(n) + 1e-3 * np.arange(n)
    v /= np.linalg.norm(v)
    prev = 0.0
    for _ in range(iterations):
        w = A.T @ (A @ v)
        norm = float(np.linalg.norm(w))
        if norm == 0.0:
            return 0.0
        v = w / norm
        est = float(np.sqrt(norm))
        if abs(est - prev) <= rtol * max(1.0, est):
            return est
        prev = est
    return prev


def sdist(z, kernel) -> float:
    """Signed distance from z to the boundary of the kernel domain: positive
    inside, negative outside, zero on the boundary.

    The domain is a product of intervals, so both branches come in closed
    form.  Raises ``BoundaryFree`` when every coordinate is unbounded.
    """
    z = np.asarray(z, dtype=float)
    lo, hi = kernel.domain_bounds()
    if not (np.any(np.isfinite(lo)) or np.any(np.isfinite(hi))):
        raise BoundaryFree("kernel domain has no boundary")
    below = np.maximum(lo - z, 0.0)
    above = np.maximum(z - hi, 0.0)
    outside = float(np.sqrt(np.sum(below ** 2 + above ** 2)))
    if outside > 0.0:
        return -outside
    margins = np.concatenate([(z - lo)[np.isfinite(lo)], (hi - z)[np.isfinite(hi)]])
    return float(np.min(margins))


def _interior_gap(problem: CompositeProblem, xbar) -> float:
    d = sdist(eval_smooth(problem, xbar), problem.kernel)
    if d <= 0.0:
        raise SlaterViolation(
            f"designated point has boundary distance {d:.3e}; a strictly "
            "interior point is required")
    return d


def explicit_gamma(problem: CompositeProblem, x0, xstar, xbar) -> float:
    """The closed-form condition-number estimate built from an interior
    point: 8 (||J(x0)||_op + (||L||/2)(11 r0 + rbar))^2
    (d + (||L||/2)(||x*-xbar|| + ||x*-x0||)^2) / d^2 with d the boundary
    distance at the interior point."""
    x0 = np.asarray(x0, dtype=float)
    xstar = np.asarray(xstar, dtype=float)
    xbar = np.asarray(xbar, dtype=float)
    d = _interior_gap(problem, xbar)
    curv = problem.smooth.curvature_vector
    normL = float(np.linalg.norm(curv))
    jop = operator_norm(problem.smooth.jacobian(x0))
    r0 = float(np.linalg.norm(x0 - xstar))
    rbar = float(np.linalg.norm(xbar - xstar))
    front = 8.0 * (jop + 0.5 * normL * (11.0 * r0 + rbar)) ** 2
    tail = (d + 0.5 * normL * (rbar + r0) ** 2) / d ** 2
    return front * tail


def explicit_bound(problem: CompositeProblem, x0, xstar, xbar) -> float:
    """max(||L||, gamma) * L_g * ||x0 - x*||^2 / 2; divide by k for the gap
    bound at step k.  Raises ``BoundaryFree`` for full-domain kernels, where
    the plain L_g * ||L|| constant applies instead."""
    x0 = np.asarray(x0, dtype=float)
    xstar = np.asarray(xstar, dtype=float)
    gamma = explicit_gamma(problem, x0, xstar, xbar)   # raises BoundaryFree
    curv = problem.smooth.curvature_vector
    normL = float(np.linalg.norm(curv))
    lg = kernel_lipschitz(problem.kernel)
    r0 = float(np.linalg.norm(x0 - xstar))
    return max(normL, gamma) * lg * r0 ** 2 / 2.0


def multiplier_bound(x, y, nu, xbar, problem: CompositeProblem,
                     boundary_case: bool) -> float:
    """Upper bound on L' nu for a subproblem multiplier.

    Interior case: L_g * ||L||.  Boundary case (the surrogate optimum sits on
    the domain boundary): the product built from the Jacobian norm, the step
    length, the distance to the interior point, and its boundary margin.
    """
    lg = kernel_lipschitz(problem.kernel)
    curv = problem.smooth.curvature_vector
    normL = float(np.linalg.norm(curv))
    if not boundary_case:
        return lg * normL
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    xbar = np.asarray(xbar, dtype=float)
    d = _interior_gap(problem, xbar)
    jop = operator_norm(problem.smooth.jacobian(x))
    move = float(np.linalg.norm(x - y))
    toint = float(np.linalg.norm(xbar - x))
    front = 8.0 * lg * (jop + 0.5 * normL * (3.0 * move + toint)) ** 2
    return front * (d + 0.5 * normL * toint ** 2) / d ** 2


def slater_combination(x, xbar, problem: CompositeProblem):
    """Interior point for the subproblem at x, with a certified margin.

    Returns (w, margin): w lies on the segment [x, xbar] and the surrogate
    value H(x, w) is guaranteed to sit at least ``margin`` inside the kernel
    domain.  The certified margin is a lower bound; the realized distance is
    typically larger.
    """
    x = np.asarray(x, dtype=float)
    xbar = np.asarray(xbar, dtype=float)
    kernel = problem.kernel
    fbar = eval_smooth(problem, xbar)
    s_bar = sdist(fbar, kernel)
    if s_bar <= 0.0:
        raise SlaterViolation("designated point is not strictly interior")
    curv = problem.smooth.curvature_vector
    normL = float(np.linalg.norm(curv))
    dist2 = float(np.sum((x - xbar) ** 2))
    s_shift = sdist(fbar + 0.5 * curv * dist2, kernel)
    denom = 2.0 * (s_bar - s_shift)
    ratio = np.inf if denom <= 0.0 else s_bar / denom
    gamma = min(1.0, ratio)
    w = x + gamma * (xbar - x)
    margin = s_bar ** 2 / (4.0 * (s_bar + 0.5 * normL * dist2))
    return w, float(margin)


def fermat_residual(problem: CompositeProblem, x, *, alpha=None,
                    tol: float = 1e-12, max_inner: int = 20_000) -> float:
    """First-order optimality residual ||J(x)' nu|| for the multiplier
    recovered by solving the subproblem at x with the declared curvatures
    (or an explicit ``alpha``); vanishes exactly at minimizers."""
    x = np.asarray(x, dtype=float)
    mv = linearize(problem, x, alpha)
    sub = solve_subproblem(problem, x, mv, tol=tol, max_inner=max_inner)
    step = float(np.linalg.norm(sub.y - x))
    return float(mv.alpha @ sub.multiplier) * step


def certificate_report(problem: CompositeProblem, trace, *, xstar=None,
                       xbar=None) -> CertificateReport:
    """Assemble the full certificate set for a finished trace.

    ``per_iteration_bound`` lists the online gap bound at each step; it is
    scaled by ||x0 - x*||^2 when a reference solution is supplied and left
    per unit squared initial distance otherwise.
    """
    online = online_constant(trace)
    weights = trace.curvature_weights()
    running = np.maximum.accumulate(weights)
    ks = np.arange(1, weights.size + 1)
    scale = 1.0
    if xstar is not None:
        scale = float(np.sum((np.asarray(trace.iterates[0]) - np.asarray(xstar)) ** 2))
    per_iter = list(running * scale / (2.0 * ks))

    gamma = None
    margin = None
    if xbar is not None:
        try:
            if xstar is not None:
                gamma = explicit_gamma(problem, trace.iterates[0], xstar, xbar)
            _, margin = slater_combination(trace.final, np.asarray(xbar, float),
                                           problem)
        except BoundaryFree:
            gamma = None
            margin = None

    return CertificateReport(
        online_constant=online,
        lipschitz_bound=lipschitz_condition_bound(problem),
        explicit_gamma=gamma,
        per_iteration_bound=per_iter,
        fermat_residual=fermat_residual(problem, trace.final),
        slater_margin=margin,
    )
