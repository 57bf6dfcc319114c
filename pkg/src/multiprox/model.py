"""Composite model g(F(x)) and its per-component quadratic surrogate.

The smooth map F = (f_1, ..., f_m) collects convex differentiable components,
each with a curvature constant bounding the Lipschitz modulus of its
gradient.  Around a base point x the surrogate replaces every component by

    H_i(x, y) = f_i(x) + <grad f_i(x), y - x> + (alpha_i / 2) ||y - x||^2,

an upper model whenever alpha_i is at least the component's constant.
Composing the outer kernel with H gives the structured subproblems the
solvers in :mod:`multiprox.subsolve` handle.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import EvaluationError
from .kernels import MaxKernel, NlpKernel, SeparableKernel, ZeroProx


@dataclass(frozen=True)
class SmoothComponent:
    """One smooth coordinate of the map F.

    ``lipschitz`` is the gradient-Lipschitz constant (curvature units:
    objective per squared distance).  Zero is reserved for affine components;
    ``inf`` declares the constant unknown (backtracking territory).
    """

    value: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray]
    lipschitz: float

    def __post_init__(self):
        if self.lipschitz < 0:
            raise ValueError("curvature constant must be nonnegative")


def quadratic_component(Q, b, c, lipschitz=None) -> SmoothComponent:
    """f(x) = x'Qx + b'x + c with Q symmetric positive semidefinite.

    The curvature constant is 2*lambda_max(Q) unless supplied by the caller
    (who may know the spectrum exactly).
    """
    Q = np.asarray(Q, dtype=float)
    b = np.asarray(b, dtype=float)
    c = float(c)
    Qs = 0.5 * (Q + Q.T)
    if lipschitz is None:
        lipschitz = 2.0 * max(0.0, float(np.linalg.eigvalsh(Qs)[-1]))
    return SmoothComponent(
        value=lambda x: float(x @ Qs @ x + b @ x + c),
        gradient=lambda x: 2.0 * (Qs @ x) + b,
        lipschitz=float(lipschitz),
    )


def affine_component(b, c) -> SmoothComponent:
    """f(x) = b'x + c; curvature zero."""
    b = np.asarray(b, dtype=float)
    c = float(c)
    return SmoothComponent(
        value=lambda x: float(b @ x + c),
        gradient=lambda x: b.copy(),
        lipschitz=0.0,
    )


def identity_components(n: int) -> list[SmoothComponent]:
    """The n coordinate projections x -> x_j, each affine with curvature 0."""

    def make(j):
        e = np.zeros(n)
        e[j] = 1.0
        return SmoothComponent(
            value=lambda x, j=j: float(x[j]),
            gradient=lambda x, e=e: e.copy(),
            lipschitz=0.0,
        )

    return [make(j) for j in range(n)]


@dataclass(frozen=True)
class SmoothMap:
    """Ordered collection of smooth components."""

    components: tuple

    def __init__(self, components: Sequence[SmoothComponent]):
        object.__setattr__(self, "components", tuple(components))
        if not self.components:
            raise ValueError("a smooth map needs at least one component")

    @property
    def m(self) -> int:
        return len(self.components)

    @property
    def curvature_vector(self) -> np.ndarray:
        return np.array([c.lipschitz for c in self.components])

    def values(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.array([c.value(x) for c in self.components], dtype=float)

    def jacobian(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.stack([np.asarray(c.gradient(x), dtype=float)
                         for c in self.components])


@dataclass(frozen=True)
class CompositeProblem:
    """The pairing of a smooth map with an outer kernel."""

    smooth: SmoothMap
    kernel: object

    def __post_init__(self):
        if self.kernel.arity != self.smooth.m:
            raise ValueError(
                f"kernel arity {self.kernel.arity} != number of components "
                f"{self.smooth.m}")
        mask = self.kernel.monotone_mask()
        curved = self.smooth.curvature_vector > 0
        if np.any(curved & ~mask):
            raise ValueError(
                "kernel must be nondecreasing in every coordinate with "
                "positive curvature")


@dataclass(frozen=True)
class ModelVector:
    """Linearization data of the smooth map at a base point.

    ``alpha`` holds the curvature parameters of the quadratic surrogate;
    zeros are only allowed where the component itself is affine or declared
    curvature-free.
    """

    smooth: SmoothMap
    base: np.ndarray
    values: np.ndarray
    jacobian: np.ndarray
    alpha: np.ndarray


def linearize(problem: CompositeProblem, x, alpha=None) -> ModelVector:
    """Build the surrogate data of ``problem`` at ``x``."""
    x = np.asarray(x, dtype=float)
    vals = eval_smooth(problem, x)
    jac = problem.smooth.jacobian(x)
    if not np.all(np.isfinite(jac)):
        raise EvaluationError("non-finite gradient in smooth map")
    if alpha is None:
        alpha = problem.smooth.curvature_vector
    alpha = np.asarray(alpha, dtype=float)
    if alpha.shape != vals.shape:
        raise ValueError("alpha must have one entry per component")
    if np.any(alpha < 0) or not np.all(np.isfinite(alpha)):
        raise ValueError("alpha entries must be finite and nonnegative")
    return ModelVector(problem.smooth, x, vals, jac, alpha)


def eval_smooth(problem: CompositeProblem, x) -> np.ndarray:
    """(f_1(x), ..., f_m(x)); raises on non-finite component values."""
    vals = problem.smooth.values(x)
    if not np.all(np.isfinite(vals)):
        raise EvaluationError(f"non-finite smooth value at x={x!r}")
    return vals


def eval_model(mv: ModelVector, y) -> np.ndarray:
    """Componentwise surrogate values F(x) + J(x)(y - x) + alpha/2 ||y-x||^2."""
    y = np.asarray(y, dtype=float)
    d = y - mv.base
    return mv.values + mv.jacobian @ d + 0.5 * mv.alpha * float(d @ d)


def majorization_holds(mv: ModelVector, y, tol: float = 1e-8) -> np.ndarray:
    """Per-component test f_i(y) <= H_i(x, y) + tol * (1 + |f_i(y)|).

    The relative slack keeps the test meaningful across components whose
    magnitudes differ by orders of magnitude.
    """
    fy = mv.smooth.values(y)
    hy = eval_model(mv, y)
    return fy <= hy + tol * (1.0 + np.abs(fy))


def objective(problem: CompositeProblem, x) -> float:
    """g(F(x)); returns +inf to signal a domain violation (never raises for
    feasibility, only for broken evaluations)."""
    vals = eval_smooth(problem, x)
    return problem.kernel.value(vals)


# --------------------------------------------------------------------------
# composite-problem builders for the supported kernel structures
# --------------------------------------------------------------------------

def minmax_problem(components: Sequence[SmoothComponent]) -> CompositeProblem:
    """min over x of max_i f_i(x)."""
    smooth = SmoothMap(components)
    return CompositeProblem(smooth, MaxKernel(arity=smooth.m))


def nlp_problem(objective_component: SmoothComponent,
                constraints: Sequence[SmoothComponent],
                dim: int,
                prox=None) -> CompositeProblem:
    """min f(x) + h(x) subject to f_i(x) <= 0.

    The identity block feeding h is appended only when h is nonzero, so the
    plain constrained program keeps arity 1 + m.
    """
    prox = prox if prox is not None else ZeroProx()
    tail = [] if isinstance(prox, ZeroProx) else identity_components(dim)
    smooth = SmoothMap([objective_component, *constraints, *tail])
    kernel = NlpKernel(n_constraints=len(constraints), prox=prox,
                       tail_dim=len(tail))
    return CompositeProblem(smooth, kernel)


def separable_problem(objective_component: SmoothComponent,
                      dim: int,
                      prox=None) -> CompositeProblem:
    """min f(x) + h(x) in the additive-composite formulation F = (f, x)."""
    prox = prox if prox is not None else ZeroProx()
    smooth = SmoothMap([objective_component, *identity_components(dim)])
    return CompositeProblem(smooth, SeparableKernel(dim=dim, prox=prox))
