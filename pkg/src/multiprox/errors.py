"""Exception types shared across the solver stack."""


class EvaluationError(RuntimeError):
    """A smooth component returned a non-finite value or gradient."""


class ArityError(ValueError):
    """Vector length does not match the kernel arity."""


class DomainViolation(RuntimeError):
    """A kernel operation was requested outside the kernel domain."""


class UnboundedSubproblem(RuntimeError):
    """The linearized subproblem has no minimizer."""


class InfeasibleSubproblem(RuntimeError):
    """The model constraint set of a subproblem is empty."""


class NonConvergence(RuntimeError):
    """An iterative solve exhausted its iteration budget."""


class InfeasibleStart(RuntimeError):
    """The initial point is outside the domain of the objective."""


class WhileLoopDivergence(RuntimeError):
    """The curvature inflation loop exceeded its cap; some component has no
    usable Lipschitz constant at the current scale."""


class SlaterViolation(RuntimeError):
    """The designated interior point is not strictly inside the domain."""


class BoundaryFree(RuntimeError):
    """Signal: the kernel domain has no boundary, so boundary-geometry
    quantities are not defined for it."""


class DegenerateGap(RuntimeError):
    """Signal: the initial point is already optimal, so the normalized
    suboptimality gap is undefined."""
