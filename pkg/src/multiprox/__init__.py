"""Composite convex minimization by per-component proximal linearization.

The solver family minimizes g(F(x)) where F collects smooth convex components
and g is a monotone nonsmooth aggregator (max, constrained-programming, or
additive-composite).  Each outer step linearizes every component at the
current iterate, adds a per-component quadratic matched to that component's
curvature, and minimizes the aggregated surrogate, recovering a Lagrange
multiplier that feeds run-specific complexity certificates.
"""

from .bench import (MinMaxInstance, generate_instance, instance_problem,
                    normalized_gap, reference_solution, run_table1)
from .diagnostics import (CertificateReport, certificate_report,
                          explicit_bound, explicit_gamma, fermat_residual,
                          lipschitz_condition_bound, multiplier_bound,
                          online_constant, sdist, slater_combination)
from .driver import (RunTrace, SolverConfig, fixed_point_check,
                     multiprox_backtracking_run, multiprox_run, pgnm_run, run)
from .errors import (ArityError, BoundaryFree, DegenerateGap, DomainViolation,
                     EvaluationError, InfeasibleStart, InfeasibleSubproblem,
                     NonConvergence, SlaterViolation, UnboundedSubproblem,
                     WhileLoopDivergence)
from .kernels import (BoxProx, L1Prox, MaxKernel, NlpKernel, SeparableKernel,
                      ZeroProx, kernel_lipschitz, kernel_subgradient,
                      kernel_value)
from .model import (CompositeProblem, ModelVector, SmoothComponent, SmoothMap,
                    affine_component, eval_model, eval_smooth,
                    identity_components, linearize, majorization_holds,
                    minmax_problem, nlp_problem, objective,
                    quadratic_component, separable_problem)
from .subsolve import (SubSolution, kkt_residual, project_simplex,
                       solve_fb_subproblem, solve_max_subproblem,
                       solve_nlp_subproblem, solve_subproblem)

__version__ = "0.1.0"
