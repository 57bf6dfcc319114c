"""Structured subproblem solvers with Lagrange multiplier recovery.

Each outer-kernel structure gets a dedicated solver for

    minimize over y:   g(H_alpha(x, y)),

returning the minimizer, the optimal value, a multiplier vector nu in the
subdifferential of g at the surrogate optimum, and a stationarity residual.
The multiplier is the quantity the complexity certificates consume, so the
solvers work on the dual side:

* max kernel        -- concave dual over the unit simplex: projected
                       gradient ascent with a sufficient-increase linesearch
                       does the global work, and an active-set Newton
                       refinement finishes near the optimum; the primal point
                       is recovered in closed form from the dual iterate.
* constrained (nlp) -- dual ascent over the nonnegative constraint
                       multipliers (one proximal map of h per evaluation)
                       with a semismooth-Newton refinement on the active set.
* separable         -- one proximal gradient step in closed form.

All solvers are stateless; workspaces are per call.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (ArityError, InfeasibleSubproblem, NonConvergence,
                     UnboundedSubproblem)
from .kernels import MaxKernel, NlpKernel, SeparableKernel, kernel_value
from .model import ModelVector, eval_model

# Weight used to push a dual iterate off the zero-curvature face, where
# primal recovery is ill-posed.  Far below every solver tolerance.
FACE_EPS = 1e-12

# A solve that exhausts its budget is still accepted when its relative
# duality gap is below this floor (double precision leaves little more).
GAP_ACCEPT = 1e-9

_SIGMA = 0.1        # sufficient-increase fraction in the ascent linesearch
_GROW = 2.0         # step growth after a first-try acceptance
_SHRINK = 0.5


@dataclass
class SubSolution:
    """Answer to one structured subproblem."""

    y: np.ndarray
    value: float
    multiplier: np.ndarray
    kkt_residual: float
    inner_iterations: int
    dual_values: np.ndarray = field(default_factory=lambda: np.zeros(0))


def project_simplex(v) -> np.ndarray:
    """Euclidean projection onto {nu >= 0, sum nu = 1} (sort-based, exact)."""
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or v.size == 0:
        raise ValueError("expected a nonempty vector")
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    idx = np.arange(1, v.size + 1)
    rho = idx[u - css / idx > 0][-1]
    tau = css[rho - 1] / rho
    return np.maximum(v - tau, 0.0)


def kkt_residual(x, y, nu, mv: ModelVector, kernel=None) -> float:
    """Stationarity norm ||J(x)' nu + (alpha' nu)(y - x)||, plus, for the
    constrained kernel, complementarity slack and dual-sign violations on the
    constraint block.  Zero at exact solutions."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    nu = np.asarray(nu, dtype=float)
    if nu.size != mv.values.size:
        raise ArityError("multiplier length does not match the model")
    d = y - x
    res = float(np.linalg.norm(mv.jacobian.T @ nu + (mv.alpha @ nu) * d))
    if isinstance(kernel, NlpKernel):
        m = kernel.n_constraints
        c = eval_model(mv, y)[1:1 + m]
        mu = nu[1:1 + m]
        res += float(mu @ np.abs(np.minimum(c, 0.0)))   # complementarity
        res += float(np.sum(np.maximum(c, 0.0)))        # primal feasibility
        res += float(np.sum(np.maximum(-mu, 0.0)))      # dual feasibility
    return res


# --------------------------------------------------------------------------
# max kernel
# --------------------------------------------------------------------------

def _off_zero_curvature_face(nu, alpha):
    """Mix a trace of the positive-curvature vertices into nu when the
    curvature-weighted sum vanishes, keeping primal recovery well posed."""
    if float(alpha @ nu) > 0.0:
        return nu
    curved = alpha > 0
    probe = np.zeros_like(nu)
    probe[curved] = 1.0 / int(np.count_nonzero(curved))
    return (1.0 - FACE_EPS) * nu + FACE_EPS * probe


def _max_dual_state(F, J, alpha, nu):
    """Dual objective, gradient and recovered primal displacement at nu."""
    a = float(alpha @ nu)
    G = J.T @ nu
    d = -G / a
    grad = F + J @ d + 0.5 * alpha * float(d @ d)   # = H(x, x + d)
    q = float(nu @ grad)
    return q, grad, d


class _MaxDual:
    """Mutable state of the simplex-dual ascent for the max kernel."""

    def __init__(self, F, J, alpha, nu):
        self.F, self.J, self.alpha = F, J, alpha
        self.dual_values = []
        self.iterations = 0
        self.t = 1.0
        self.set(nu, *_max_dual_state(F, J, alpha, nu))

    def set(self, nu, q, grad, d):
        self.nu, self.q, self.grad, self.d = nu, q, grad, d
        self.dual_values.append(q)

    @property
    def gap(self) -> float:
        return float(np.max(self.grad)) - self.q

    def ascend(self, budget: int, tol: float) -> None:
        """Projected gradient ascent with a sufficient-increase linesearch."""
        for _ in range(budget):
            if self.gap <= tol:
                return
            self.iterations += 1
            # The projection is invariant to constant gradient shifts;
            # centering removes the large common offset that would otherwise
            # swamp the informative differences in floating point.
            ascent = self.grad - float(np.mean(self.grad))
            accepted = False
            first_try = True
            while self.t > 1e-18:
                cand = _off_zero_curvature_face(
                    project_simplex(self.nu + self.t * ascent), self.alpha)
                step = cand - self.nu
                if float(step @ step) == 0.0:
                    break
                state = _max_dual_state(self.F, self.J, self.alpha, cand)
                if state[0] >= self.q + _SIGMA * float(ascent @ step):
                    self.set(cand, *state)
                    if first_try:
                        self.t *= _GROW
                    accepted = True
                    break
                self.t *= _SHRINK
                first_try = False
            if not accepted:
                return   # projection fixed point or linesearch floor

    def polish(self, budget: int, tol: float) -> None:
        """Active-set refinement: a damped Newton step equalizes the model
        values carried by the support of nu, which converges quadratically
        once the support is identified.  Only ascent steps are accepted, so
        the recorded dual values stay nondecreasing."""
        active = (self.nu > 1e-15)
        for _ in range(budget):
            if self.gap <= tol:
                return
            self.iterations += 1
            active = active | (self.nu > 1e-15)
            active[int(np.argmax(self.grad))] = True
            idx = np.flatnonzero(active)
            a = float(self.alpha @ self.nu)
            # model gradients at the recovered point, one row per component
            U = self.J[idx] + self.alpha[idx, None] * self.d[None, :]
            k = idx.size
            sys = np.zeros((k + 1, k + 1))
            sys[:k, :k] = -U @ U.T
            sys[:k, k] = -a
            sys[k, :k] = 1.0
            rhs = np.concatenate([-a * self.grad[idx], [0.0]])
            sol, *_ = np.linalg.lstsq(sys, rhs, rcond=None)
            dnu = sol[:k]
            # largest feasible fraction of the Newton step
            theta = 1.0
            neg = dnu < 0
            if np.any(neg):
                theta = min(1.0, float(np.min(-self.nu[idx][neg] / dnu[neg])))
            gap_now = self.gap
            noise = 5e-14 * (1.0 + abs(self.q))
            improved = False
            for _ in range(4):
                cand = self.nu.copy()
                cand[idx] = np.maximum(self.nu[idx] + theta * dnu, 0.0)
                total = float(np.sum(cand))
                if total <= 0.0:
                    break
                cand /= total
                cand = _off_zero_curvature_face(cand, self.alpha)
                state = _max_dual_state(self.F, self.J, self.alpha, cand)
                gap_cand = float(np.max(state[1])) - state[0]
                # Near the optimum the true increase sits below the rounding
                # floor of q; a strictly contracted gap is the reliable
                # acceptance signal there.
                if state[0] >= self.q or (state[0] >= self.q - noise
                                          and gap_cand <= 0.25 * gap_now):
                    self.set(cand, *state)
                    active = cand > 1e-15
                    improved = True
                    break
                theta *= 0.5
            if not improved:
                return


def solve_max_subproblem(x, mv: ModelVector, *, tol: float = 1e-10,
                         max_inner: int = 10_000, nu0=None) -> SubSolution:
    """Minimize max_i H_i(x, y) over y via its simplex dual.

    Projected gradient ascent does the global work; an active-set Newton
    refinement finishes the job when the dual optimum sits near the
    zero-curvature face, where plain ascent crawls.  Requires at least one
    positive curvature entry; the all-affine case is delegated to a
    linear-programming fallback (which raises ``UnboundedSubproblem`` when it
    certifies unboundedness).
    """
    x = np.asarray(x, dtype=float)
    F, J, alpha = mv.values, mv.jacobian, mv.alpha
    m = F.size
    if not np.any(alpha > 0):
        return _solve_max_affine(x, mv)
    if m == 1:
        d = -J[0] / alpha[0]
        y = x + d
        nu = np.ones(1)
        val = float(eval_model(mv, y)[0])
        return SubSolution(y, val, nu, kkt_residual(x, y, nu, mv), 0,
                           np.array([val]))

    if nu0 is None:
        nu = np.full(m, 1.0 / m)
    else:
        nu = project_simplex(nu0)
    nu = _off_zero_curvature_face(nu, alpha)

    dual = _MaxDual(F, J, alpha, nu)
    gap_tol = tol * (1.0 + abs(dual.q))
    block = max(20, 5 * m)
    while dual.iterations < max_inner and dual.gap > gap_tol:
        q_before = dual.q
        dual.ascend(min(block, max_inner - dual.iterations), gap_tol)
        if dual.gap <= gap_tol or dual.iterations >= max_inner:
            break
        dual.polish(min(block, max_inner - dual.iterations), gap_tol)
        if dual.q <= q_before:   # neither phase moved: numerical floor
            break

    gap = dual.gap
    if gap > gap_tol and gap > GAP_ACCEPT * (1.0 + abs(dual.q)):
        raise NonConvergence(
            f"max-subproblem dual stalled with gap {gap:.3e} after "
            f"{dual.iterations} iterations")

    y = x + dual.d
    nu = dual.nu
    value = float(np.max(dual.grad))
    return SubSolution(y, value, nu, kkt_residual(x, y, nu, mv),
                       dual.iterations, np.asarray(dual.dual_values))


def _solve_max_affine(x, mv: ModelVector) -> SubSolution:
    """All-affine max model: a linear program in (y, s)."""
    from scipy.optimize import linprog

    F, J = mv.values, mv.jacobian
    m, n = J.shape
    c = np.zeros(n + 1)
    c[-1] = 1.0
    A = np.hstack([J, -np.ones((m, 1))])
    res = linprog(c, A_ub=A, b_ub=-F, bounds=[(None, None)] * (n + 1),
                  method="highs")
    if res.status == 3:
        raise UnboundedSubproblem("affine max model is unbounded below")
    if not res.success:
        raise NonConvergence(f"LP fallback failed: {res.message}")
    d = res.x[:n]
    y = x + d
    nu = project_simplex(np.maximum(-res.ineqlin.marginals, 0.0))
    value = float(np.max(eval_model(mv, y)))
    return SubSolution(y, value, nu, kkt_residual(x, y, nu, mv), 0,
                       np.array([value]))


# --------------------------------------------------------------------------
# constrained (nlp) kernel
# --------------------------------------------------------------------------

def _nlp_dual_state(x, F0, g0, a0, Fc, Jc, ac, prox, mu):
    """Lagrangian minimum at multipliers mu; one prox call per evaluation."""
    a = a0 + float(ac @ mu)
    if a <= 0.0:
        raise UnboundedSubproblem(
            "subproblem carries no quadratic curvature; the dual method "
            "cannot recover a minimizer")
    G = g0 + Jc.T @ mu
    v = x - G / a
    y = prox.prox(v, 1.0 / a)
    d = y - x
    dd = float(d @ d)
    obj = F0 + float(g0 @ d) + 0.5 * a0 * dd + prox.value(y)
    cvals = Fc + Jc @ d + 0.5 * ac * dd
    q = obj + float(mu @ cvals)
    return q, cvals, y, d, obj


def _bracket_curved_scale(x, F0, g0, a0, Fc, Jc, ac, prox, mu):
    """Scale-adaptive start when the bare Lagrangian has no curvature: put a
    common weight on the curved constraints and tune it by doubling/halving
    until the dual value stops improving."""
    direction = (ac > 0).astype(float)
    base = np.where(mu > 0, mu, 0.0)

    def value(s):
        try:
            q, *_ = _nlp_dual_state(x, F0, g0, a0, Fc, Jc, ac, prox,
                                    base + s * direction)
        except UnboundedSubproblem:
            return -np.inf
        return q

    s = 1.0
    q = value(s)
    for factor in (2.0, 0.5):
        while True:
            q_next = value(s * factor)
            if q_next > q:
                s *= factor
                q = q_next
                if s > 1e30 or s < 1e-30:
                    break
            else:
                break
    return base + s * direction


def _feasibility_polish(F0, g0, a0, Fc, Jc, ac, prox, x, d):
    """Shrink the displacement minimally so that every constraint model value
    is no worse than at the base point.  Bisection on t in [0, 1]."""
    def worst(t):
        dt = t * d
        c = Fc + Jc @ dt + 0.5 * ac * float(dt @ dt)
        return float(np.max(c - np.maximum(Fc, 0.0)))

    if worst(1.0) <= 0.0:
        return 1.0
    lo_t, hi_t = 0.0, 1.0
    for _ in range(80):
        mid = 0.5 * (lo_t + hi_t)
        if worst(mid) <= 0.0:
            lo_t = mid
        else:
            hi_t = mid
    return lo_t


class _NlpDual:
    """Mutable state of the dual ascent over the constraint multipliers."""

    def __init__(self, x, F0, g0, a0, Fc, Jc, ac, prox, mu):
        self.x, self.F0, self.g0, self.a0 = x, F0, g0, a0
        self.Fc, self.Jc, self.ac, self.prox = Fc, Jc, ac, prox
        self.dual_values = []
        self.iterations = 0
        self.t = 1.0
        self.set(mu, *self._state(mu))

    def _state(self, mu):
        return _nlp_dual_state(self.x, self.F0, self.g0, self.a0, self.Fc,
                               self.Jc, self.ac, self.prox, mu)

    def set(self, mu, q, cvals, y, d, obj):
        self.mu, self.q, self.cvals, self.y, self.d = mu, q, cvals, y, d
        self.dual_values.append(q)

    def lift(self, mu):
        # keep the Lagrangian strongly convex in y
        if self.a0 + float(self.ac @ mu) > 0.0:
            return mu
        out = mu.copy()
        out[self.ac > 0] += FACE_EPS
        return out

    def residual(self) -> tuple:
        feas = float(np.max(np.maximum(self.cvals, 0.0))) if self.mu.size else 0.0
        compl = abs(float(self.mu @ self.cvals)) if self.mu.size else 0.0
        return feas, compl

    def done(self, tol, feas_scale) -> bool:
        feas, compl = self.residual()
        return feas <= tol * feas_scale and compl <= tol * (1.0 + abs(self.q))

    def ascend(self, budget, tol, feas_scale, q_cap) -> None:
        for _ in range(budget):
            if self.done(tol, feas_scale):
                return
            if self.q > q_cap or float(np.max(self.mu, initial=0.0)) > 1e14:
                raise InfeasibleSubproblem(
                    "dual ascent diverges: the model constraint set appears "
                    "empty (qualification failure at this base point)")
            self.iterations += 1
            accepted = False
            first_try = True
            while self.t > 1e-18:
                cand = self.lift(np.maximum(self.mu + self.t * self.cvals, 0.0))
                step = cand - self.mu
                if float(step @ step) == 0.0:
                    break
                state = self._state(cand)
                if state[0] >= self.q + _SIGMA * float(self.cvals @ step):
                    self.set(cand, *state)
                    if first_try:
                        self.t *= _GROW
                    accepted = True
                    break
                self.t *= _SHRINK
                first_try = False
            if not accepted:
                return

    def polish(self, budget, tol, feas_scale) -> None:
        """Semismooth Newton on the active constraint block: drive the active
        model values to zero through the prox-differentiated dual map."""
        m = self.mu.size
        if m == 0:
            return
        for _ in range(budget):
            if self.done(tol, feas_scale):
                return
            self.iterations += 1
            a = self.a0 + float(self.ac @ self.mu)
            G = self.g0 + self.Jc.T @ self.mu
            v = self.x - G / a
            mask = self.prox.prox_derivative_mask(v, 1.0 / a)
            active = (self.mu > 1e-14) | (self.cvals >= -tol * feas_scale)
            idx = np.flatnonzero(active)
            if idx.size == 0:
                return
            U = self.Jc[idx] + self.ac[idx, None] * self.d[None, :]
            Uv = self.Jc[idx] + self.ac[idx, None] * (v - self.x)[None, :]
            M = -(U * mask[None, :]) @ Uv.T / a
            rhs = -self.cvals[idx]
            try:
                dmu = np.linalg.solve(M, rhs)
            except np.linalg.LinAlgError:
                dmu, *_ = np.linalg.lstsq(M, rhs, rcond=None)
            theta = 1.0
            neg = dmu < 0
            if np.any(neg):
                theta = min(1.0, float(np.min(-self.mu[idx][neg] / dmu[neg])))
            feas, compl = self.residual()
            res_now = max(feas, compl)
            noise = 5e-14 * (1.0 + abs(self.q))
            improved = False
            for _ in range(4):
                cand = self.mu.copy()
                cand[idx] = np.maximum(self.mu[idx] + theta * dmu, 0.0)
                cand = self.lift(cand)
                state = self._state(cand)
                c_c = state[1]
                feas_c = float(np.max(np.maximum(c_c, 0.0)))
                compl_c = abs(float(cand @ c_c))
                res_c = max(feas_c, compl_c)
                if state[0] >= self.q or (state[0] >= self.q - noise
                                          and res_c <= 0.5 * res_now):
                    self.set(cand, *state)
                    improved = True
                    break
                theta *= 0.5
            if not improved:
                return


def solve_nlp_subproblem(x, mv: ModelVector, kernel: NlpKernel, *,
                         tol: float = 1e-10, max_inner: int = 10_000,
                         nu0=None) -> SubSolution:
    """Minimize the linearized objective plus h(y) subject to the quadratic
    constraint models, by dual ascent on the constraint multipliers with a
    semismooth-Newton refinement on the detected active set.

    Returns the full multiplier (1, mu_1..mu_m, nu_h) matching the kernel
    arity, with nu_h a subgradient selection for h at the minimizer.
    """
    x = np.asarray(x, dtype=float)
    m = kernel.n_constraints
    F0 = float(mv.values[0])
    g0 = mv.jacobian[0]
    a0 = float(mv.alpha[0])
    Fc = mv.values[1:1 + m]
    Jc = mv.jacobian[1:1 + m]
    ac = mv.alpha[1:1 + m]
    prox = kernel.prox

    if a0 <= 0.0 and not np.any(ac > 0):
        raise UnboundedSubproblem(
            "neither the objective nor any constraint model is quadratic")

    mu = np.zeros(m) if nu0 is None else np.maximum(np.asarray(nu0, float), 0.0)
    if mu.size != m:
        raise ArityError("warm-start multiplier has the wrong length")
    if a0 + float(ac @ mu) <= 0.0:
        # A curvature-free Lagrangian start would be unbounded in y; bracket a
        # sane scale on the curved constraints before ascending.
        mu = _bracket_curved_scale(x, F0, g0, a0, Fc, Jc, ac, prox, mu)

    dual = _NlpDual(x, F0, g0, a0, Fc, Jc, ac, prox, mu)
    feas_scale = 1.0 + float(np.max(np.abs(Fc))) if m else 1.0
    q_cap = 1e14 * (1.0 + abs(F0))
    block = max(20, 5 * m)
    while dual.iterations < max_inner and not dual.done(tol, feas_scale):
        q_before = dual.q
        res_before = max(dual.residual())
        dual.ascend(min(block, max_inner - dual.iterations), tol, feas_scale,
                    q_cap)
        if dual.done(tol, feas_scale) or dual.iterations >= max_inner:
            break
        dual.polish(min(block, max_inner - dual.iterations), tol, feas_scale)
        if dual.q <= q_before and max(dual.residual()) >= res_before:
            break   # numerical floor in both phases

    mu, q, cvals, y, d = dual.mu, dual.q, dual.cvals, dual.y, dual.d
    feas, compl = dual.residual()
    if not dual.done(tol, feas_scale) and (
            feas > GAP_ACCEPT * feas_scale
            or compl > GAP_ACCEPT * (1.0 + abs(q))):
        raise NonConvergence(
            f"nlp-subproblem dual stalled (feasibility {feas:.3e}, "
            f"complementarity {compl:.3e}) after {dual.iterations} iterations")

    # Exact feasibility of the model constraints (hence of the original
    # constraints whenever alpha majorizes the true curvatures).
    a = a0 + float(ac @ mu)
    if m:
        t_shave = _feasibility_polish(F0, g0, a0, Fc, Jc, ac, prox, x, d)
        if t_shave < 1.0:
            d = t_shave * d
            y = x + d
    G = g0 + Jc.T @ mu
    nu_h = -G - a * d if kernel.tail_dim else np.zeros(0)
    nu = np.concatenate(([1.0], mu, nu_h))
    value = kernel_value(kernel, eval_model(mv, y))
    return SubSolution(y, value, nu, kkt_residual(x, y, nu, mv, kernel),
                       dual.iterations, np.asarray(dual.dual_values))


# --------------------------------------------------------------------------
# separable kernel
# --------------------------------------------------------------------------

def solve_fb_subproblem(x, mv: ModelVector, kernel: SeparableKernel) -> SubSolution:
    """Closed-form proximal gradient step y = prox_{h/L}(x - grad f(x)/L)."""
    x = np.asarray(x, dtype=float)
    L = float(mv.alpha[0])
    if L <= 0.0:
        raise UnboundedSubproblem("separable subproblem needs positive "
                                  "curvature on the smooth part")
    g0 = mv.jacobian[0]
    v = x - g0 / L
    y = kernel.prox.prox(v, 1.0 / L)
    nu_h = L * (v - y)
    nu = np.concatenate(([1.0], nu_h))
    value = kernel_value(kernel, eval_model(mv, y))
    return SubSolution(y, value, nu, kkt_residual(x, y, nu, mv), 0,
                       np.array([value]))


# --------------------------------------------------------------------------
# dispatch
# --------------------------------------------------------------------------

def solve_subproblem(problem, x, mv: ModelVector, *, tol: float = 1e-10,
                     max_inner: int = 10_000, nu0=None) -> SubSolution:
    """Kernel-dispatched subproblem solve."""
    kernel = problem.kernel
    if isinstance(kernel, MaxKernel):
        return solve_max_subproblem(x, mv, tol=tol, max_inner=max_inner,
                                    nu0=nu0)
    if isinstance(kernel, NlpKernel):
        warm = None
        if nu0 is not None:
            nu0 = np.asarray(nu0, dtype=float)
            warm = nu0 if nu0.size == kernel.n_constraints \
                else nu0[1:1 + kernel.n_constraints]
        return solve_nlp_subproblem(x, mv, kernel, tol=tol,
                                    max_inner=max_inner, nu0=warm)
    if isinstance(kernel, SeparableKernel):
        return solve_fb_subproblem(x, mv, kernel)
    raise TypeError(f"no subproblem solver for kernel {type(kernel).__name__}")
