"""Outer aggregation kernels and the proximable terms they can embed.

A kernel g aggregates the smooth component values into a single extended-real
objective.  Every kernel here is convex, lower semicontinuous, and
nondecreasing in each coordinate that is allowed to carry positive curvature;
constraints are encoded by letting g take the value +inf outside its domain.

Three structures are supported:

* ``MaxKernel``        -- g(z) = max(z_1, ..., z_m), full domain.
* ``NlpKernel``        -- g(z0, z1..zm, w) = z0 + h(w) + indicator(z_i <= 0),
                          the constrained-programming aggregator.
* ``SeparableKernel``  -- g(a, w) = a + h(w), the additive-composite
                          aggregator behind proximal gradient iterations.

``h`` ranges over the small registry of proximable terms below (zero,
weighted l1, box indicator), each with an exact proximal map.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ArityError, DomainViolation

# Relative tolerance for detecting ties in the max-kernel subgradient.
TIE_RTOL = 1e-12

# Absolute slack used when testing indicator-domain membership.  Purely a
# floating-point guard: accepted iterates satisfy the exact inequalities up to
# rounding in the model evaluation.
INDICATOR_SLACK = 1e-10


# --------------------------------------------------------------------------
# proximable terms
# --------------------------------------------------------------------------

class ZeroProx:
    """h = 0.  The proximal map is the identity."""

    tag = "zero"

    def value(self, z) -> float:
        return 0.0

    def prox(self, v, step):
        return np.array(v, dtype=float)

    def prox_derivative_mask(self, v, step):
        return np.ones(np.shape(v))

    def subgradient(self, z):
        return np.zeros(np.shape(z))

    def lipschitz(self, dim: int) -> float:
        return 0.0

    def in_domain(self, z) -> bool:
        return True

    def bounds(self, dim: int):
        return np.full(dim, -np.inf), np.full(dim, np.inf)

    def params(self) -> dict:
        return {}

    def __eq__(self, other):
        return isinstance(other, ZeroProx)

    def __repr__(self):
        return "ZeroProx()"


@dataclass(frozen=True)
class L1Prox:
    """h(z) = weight * ||z||_1 with the soft-threshold proximal map."""

    weight: float = 1.0

    tag = "l1"

    def value(self, z) -> float:
        return self.weight * float(np.sum(np.abs(z)))

    def prox(self, v, step):
        v = np.asarray(v, dtype=float)
        shift = step * self.weight
        return np.sign(v) * np.maximum(np.abs(v) - shift, 0.0)

    def prox_derivative_mask(self, v, step):
        v = np.asarray(v, dtype=float)
        return (np.abs(v) > step * self.weight).astype(float)

    def subgradient(self, z):
        return self.weight * np.sign(np.asarray(z, dtype=float))

    def lipschitz(self, dim: int) -> float:
        # l1 is weight*sqrt(dim)-Lipschitz for the Euclidean norm.
        return self.weight * float(np.sqrt(dim))

    def in_domain(self, z) -> bool:
        return True

    def bounds(self, dim: int):
        return np.full(dim, -np.inf), np.full(dim, np.inf)

    def params(self) -> dict:
        return {"weight": self.weight}


@dataclass(frozen=True)
class BoxProx:
    """Indicator of the box [lo, hi]^d; the proximal map is the clamp."""

    lo: float = -1.0
    hi: float = 1.0

    tag = "box"

    def value(self, z) -> float:
        if self.in_domain(z):
            return 0.0
        return np.inf

    def prox(self, v, step):
        return np.clip(np.asarray(v, dtype=float), self.lo, self.hi)

    def prox_derivative_mask(self, v, step):
        v = np.asarray(v, dtype=float)
        return ((v > self.lo) & (v < self.hi)).astype(float)

    def subgradient(self, z):
        # Zero is a valid normal element everywhere on the domain.
        if not self.in_domain(z):
            raise DomainViolation("point outside the box")
        return np.zeros(np.shape(z))

    def lipschitz(self, dim: int) -> float:
        return np.inf

    def in_domain(self, z) -> bool:
        z = np.asarray(z, dtype=float)
        return bool(
            np.all(z >= self.lo - INDICATOR_SLACK)
            and np.all(z <= self.hi + INDICATOR_SLACK)
        )

    def bounds(self, dim: int):
        return np.full(dim, self.lo), np.full(dim, self.hi)

    def params(self) -> dict:
        return {"lo": self.lo, "hi": self.hi}


PROX_REGISTRY = {"zero": ZeroProx, "l1": L1Prox, "box": BoxProx}


# --------------------------------------------------------------------------
# kernels
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class MaxKernel:
    """Coordinatewise maximum over m arguments; domain is all of R^m."""

    arity: int

    structure = "max"

    def value(self, z) -> float:
        z = _check_arity(z, self.arity)
        return float(np.max(z))

    def in_domain(self, z) -> bool:
        return True

    def subgradient(self, z):
        """One element of the subdifferential: uniform weights on the argmax
        set, ties detected at relative tolerance ``TIE_RTOL``."""
        z = _check_arity(z, self.arity)
        top = float(np.max(z))
        ties = z >= top - TIE_RTOL * max(1.0, abs(top))
        lam = np.zeros(self.arity)
        lam[ties] = 1.0 / int(np.count_nonzero(ties))
        return lam

    def lipschitz(self) -> float:
        # Subgradients live in the unit simplex, hence Euclidean norm <= 1.
        return 1.0

    def monotone_mask(self):
        return np.ones(self.arity, dtype=bool)

    def domain_bounds(self):
        return np.full(self.arity, -np.inf), np.full(self.arity, np.inf)

    def params(self) -> dict:
        return {"arity": self.arity}


@dataclass(frozen=True)
class NlpKernel:
    """Aggregator for inequality-constrained programs.

    g(z0, z1, ..., zm, w) = z0 + h(w) + sum_i indicator(z_i <= 0), where the
    first coordinate is the objective component, the next ``n_constraints``
    coordinates are constraint components, and the trailing ``tail_dim``
    coordinates feed the proximable term h (the identity block of the smooth
    map).  With h = 0 the tail may be empty.
    """

    n_constraints: int
    prox: object = field(default_factory=ZeroProx)
    tail_dim: int = 0

    structure = "nlp"

    @property
    def arity(self) -> int:
        return 1 + self.n_constraints + self.tail_dim

    def split(self, z):
        z = _check_arity(z, self.arity)
        m = self.n_constraints
        return float(z[0]), z[1:1 + m], z[1 + m:]

    def value(self, z) -> float:
        z0, zc, zt = self.split(z)
        if zc.size and float(np.max(zc)) > INDICATOR_SLACK:
            return np.inf
        h = self.prox.value(zt) if zt.size else 0.0
        if not np.isfinite(h):
            return np.inf
        return z0 + h

    def in_domain(self, z) -> bool:
        return np.isfinite(self.value(z))

    def subgradient(self, z):
        """Selector (1, 0, ..., 0, dh): the zero normal element is chosen on
        the constraint block even at the boundary.  Multiplier recovery for
        active constraints is the subproblem solver's job, not this one's."""
        if not self.in_domain(z):
            raise DomainViolation("point outside the kernel domain")
        _, _, zt = self.split(z)
        lam = np.zeros(self.arity)
        lam[0] = 1.0
        if zt.size:
            lam[1 + self.n_constraints:] = self.prox.subgradient(zt)
        return lam

    def lipschitz(self) -> float:
        # (1 + L_h) on the domain; +inf when h itself is an indicator.
        lh = self.prox.lipschitz(self.tail_dim) if self.tail_dim else 0.0
        if not np.isfinite(lh):
            return np.inf
        return 1.0 + lh

    def monotone_mask(self):
        mask = np.zeros(self.arity, dtype=bool)
        mask[:1 + self.n_constraints] = True
        return mask

    def domain_bounds(self):
        lo = np.full(self.arity, -np.inf)
        hi = np.full(self.arity, np.inf)
        hi[1:1 + self.n_constraints] = 0.0
        if self.tail_dim:
            tlo, thi = self.prox.bounds(self.tail_dim)
            lo[1 + self.n_constraints:] = tlo
            hi[1 + self.n_constraints:] = thi
        return lo, hi

    def params(self) -> dict:
        return {
            "n_constraints": self.n_constraints,
            "tail_dim": self.tail_dim,
            "prox": {"kind": self.prox.tag, **self.prox.params()},
        }


@dataclass(frozen=True)
class SeparableKernel:
    """Additive aggregator g(a, w) = a + h(w) over arity 1 + dim."""

    dim: int
    prox: object = field(default_factory=ZeroProx)

    structure = "separable"

    @property
    def arity(self) -> int:
        return 1 + self.dim

    def value(self, z) -> float:
        z = _check_arity(z, self.arity)
        h = self.prox.value(z[1:])
        if not np.isfinite(h):
            return np.inf
        return float(z[0]) + h

    def in_domain(self, z) -> bool:
        return np.isfinite(self.value(z))

    def subgradient(self, z):
        if not self.in_domain(z):
            raise DomainViolation("point outside the kernel domain")
        z = np.asarray(z, dtype=float)
        return np.concatenate(([1.0], self.prox.subgradient(z[1:])))

    def lipschitz(self) -> float:
        lh = self.prox.lipschitz(self.dim)
        if not np.isfinite(lh):
            return np.inf
        return float(np.sqrt(1.0 + lh * lh))

    def monotone_mask(self):
        mask = np.zeros(self.arity, dtype=bool)
        mask[0] = True
        return mask

    def domain_bounds(self):
        lo = np.full(self.arity, -np.inf)
        hi = np.full(self.arity, np.inf)
        tlo, thi = self.prox.bounds(self.dim)
        lo[1:] = tlo
        hi[1:] = thi
        return lo, hi

    def params(self) -> dict:
        return {
            "dim": self.dim,
            "prox": {"kind": self.prox.tag, **self.prox.params()},
        }


# --------------------------------------------------------------------------
# free-function facade
# --------------------------------------------------------------------------

def _check_arity(z, arity):
    z = np.asarray(z, dtype=float)
    if z.ndim != 1 or z.size != arity:
        raise ArityError(f"expected a vector of length {arity}, got shape {z.shape}")
    return z


def kernel_value(kernel, z) -> float:
    """g(z); +inf outside the domain."""
    return kernel.value(z)


def kernel_subgradient(kernel, z):
    """One selected element of the subdifferential of g at z."""
    return kernel.subgradient(z)


def kernel_lipschitz(kernel) -> float:
    """Lipschitz constant of g on its domain; +inf when no finite constant
    exists (an indicator proximable term)."""
    return kernel.lipschitz()


def prox_from_dict(spec: dict):
    kind = spec.get("kind", "zero")
    if kind not in PROX_REGISTRY:
        raise ValueError(f"unknown proximable term {kind!r}")
    kwargs = {k: v for k, v in spec.items() if k != "kind"}
    return PROX_REGISTRY[kind](**kwargs)
