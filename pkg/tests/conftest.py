"""Shared oracles and problem builders for the test suite.

The grid oracle is deliberately independent of the solver stack: it
evaluates the surrogate model (or the original objective) on a dense mesh
and refines around the incumbent, so its only shared ingredient with the
code under test is the model formula itself.
"""
import numpy as np
import pytest

from multiprox.model import (affine_component, minmax_problem, nlp_problem,
                             quadratic_component)


def grid_minimize(fun, lo, hi, dim, *, steps=(0.05, 1e-3, 2e-5, 4e-7),
                  feasible=None):
    """Coarse-to-fine grid minimization of ``fun`` over [lo, hi]^dim.

    ``fun`` maps an (P, dim) array to (P,) values; ``feasible`` (optional)
    maps the same to a boolean mask.  Returns (argmin, value).
    """
    center = np.full(dim, 0.5 * (lo + hi))
    half = 0.5 * (hi - lo)
    best_y, best_v = None, np.inf
    for step in steps:
        axes = [np.arange(c - half, c + half + step / 2, step) for c in center]
        if dim == 1:
            pts = axes[0][:, None]
        else:
            mesh = np.meshgrid(*axes, indexing="ij")
            pts = np.stack([m.ravel() for m in mesh], axis=1)
        np.clip(pts, lo, hi, out=pts)
        vals = fun(pts)
        if feasible is not None:
            mask = feasible(pts)
            if not np.any(mask):
                half = half * 2          # widen and retry at this resolution
                continue
            vals = np.where(mask, vals, np.inf)
        j = int(np.argmin(vals))
        if vals[j] < best_v:
            best_v = float(vals[j])
            best_y = pts[j].copy()
        center = pts[j]
        half = 3.0 * step
    return best_y, best_v


def model_max_fun(mv):
    """max_i H_i(x, .) as a vectorized function of query points."""
    x, F, J, alpha = mv.base, mv.values, mv.jacobian, mv.alpha

    def fun(pts):
        D = pts - x[None, :]
        quad = 0.5 * np.sum(D * D, axis=1)
        H = F[None, :] + D @ J.T + np.outer(quad, alpha)
        return np.max(H, axis=1)

    return fun


def model_components_fun(mv, idx):
    """Rows ``idx`` of the surrogate as a vectorized map (P, dim) -> (P, k)."""
    x, F, J, alpha = mv.base, mv.values, mv.jacobian, mv.alpha

    def fun(pts):
        D = pts - x[None, :]
        quad = 0.5 * np.sum(D * D, axis=1)
        H = F[None, :] + D @ J.T + np.outer(quad, alpha)
        return H[:, idx]

    return fun


def random_psd(rng, dim, scale=1.0):
    A = rng.normal(size=(dim, dim))
    Q = A @ A.T / dim
    return scale * Q


def random_minmax_problem(rng, dim, m, affine_share=0.25):
    """Small random min-max problem whose optimum stays well inside the
    grid-oracle box."""
    comps = []
    for i in range(m):
        if i > 0 and rng.uniform() < affine_share:
            comps.append(affine_component(rng.normal(scale=0.5, size=dim),
                                          rng.normal()))
        else:
            Q = random_psd(rng, dim, scale=rng.uniform(0.3, 2.0)) + 0.2 * np.eye(dim)
            comps.append(quadratic_component(Q, rng.normal(scale=0.5, size=dim),
                                             rng.normal()))
    return minmax_problem(comps)


def random_nlp_problem(rng, dim, n_constraints, prox=None):
    """Random constrained problem with a guaranteed interior point at a
    random center: constraints are balls f_i(x) = ||x - z_i||^2 - r_i^2 with
    the origin strictly inside each."""
    Q = random_psd(rng, dim, scale=rng.uniform(0.3, 1.5)) + 0.3 * np.eye(dim)
    obj = quadratic_component(Q, rng.normal(scale=0.5, size=dim), rng.normal())
    cons = []
    for _ in range(n_constraints):
        z = rng.normal(scale=0.4, size=dim)
        r = float(np.linalg.norm(z)) + rng.uniform(0.5, 1.5)
        cons.append(quadratic_component(np.eye(dim), -2.0 * z,
                                        float(z @ z) - r * r))
    return nlp_problem(obj, cons, dim=dim, prox=prox)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
