"""BPS vortex equations on connected finite weighted graphs.

Two systems are covered: the l-component Abelian system and the
U(1)×SU(N) non-Abelian system. Each comes with its exact solvability test,
a convex-energy solver, and an independent verifier.
"""

from .abelian import (
    AbelianProblem,
    AbelianSolution,
    AbelianStructure,
    build_structure,
    check_solvable_abelian,
    energy_I,
    grad_hess_I,
    solve_abelian,
)
from .diagnostics import VerificationReport, uniqueness_probe, verify_abelian, verify_nonabelian
from .energy import SolverOptions, ThresholdReport
from .graph_core import (
    GraphData,
    build_graph,
    grad_norm,
    gradient_form,
    integrate,
    laplacian,
    laplacian_matrix,
    poincare_constant,
)
from .nonabelian import (
    NonabelianProblem,
    NonabelianSolution,
    NonabelianStructure,
    build_structure_nonabelian,
    check_solvable_nonabelian,
    constraint_values,
    energy_J,
    grad_hess_J,
    solve_nonabelian,
    solve_nonabelian_constrained,
)
from .optimizer import MinimizeOptions, MinimizerResult, ObjectiveOracle, detect_divergence, minimize
from .poisson import VortexSet, background_rhs, dirac_function, solve_poisson

__version__ = "0.1.0"
