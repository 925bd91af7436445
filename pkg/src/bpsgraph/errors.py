"""Exception hierarchy.

Every error carries a short machine-readable ``code`` that the CLI echoes in
its JSON output.
"""


class BPSError(Exception):
    code = "error"


class GraphError(BPSError, ValueError):
    code = "graph_error"


class NonPositiveMeasure(GraphError):
    code = "non_positive_measure"


class NonPositiveWeight(GraphError):
    code = "non_positive_weight"


class Disconnected(GraphError):
    code = "disconnected"


class DuplicateVertex(GraphError):
    code = "duplicate_vertex"


class SelfLoop(GraphError):
    code = "self_loop"


class UnknownVertex(GraphError, KeyError):
    code = "unknown_vertex"

    def __str__(self):
        return Exception.__str__(self)


class DomainMismatch(BPSError, ValueError):
    code = "domain_mismatch"


class SingleVertex(BPSError, ValueError):
    code = "single_vertex"


class NonZeroMean(BPSError, ValueError):
    code = "non_zero_mean"


class SingularSolve(BPSError, ArithmeticError):
    code = "singular_solve"


class Overflow(BPSError, ArithmeticError):
    code = "overflow"


class InvalidCouplings(BPSError, ValueError):
    code = "invalid_couplings"


class DegenerateParameters(InvalidCouplings):
    code = "degenerate_parameters"


class OracleInconsistent(BPSError, ValueError):
    code = "oracle_inconsistent"


class NumericalBreakdown(BPSError, ArithmeticError):
    code = "numerical_breakdown"


class SolverError(BPSError):
    """Base for failures of the energy-minimising solvers."""

    code = "solver_error"

    def __init__(self, message, *, report=None, diagnosis=None, result=None):
        super().__init__(message)
        self.report = report
        self.diagnosis = diagnosis
        self.result = result


class NotSolvable(SolverError):
    code = "not_solvable"


class DivergenceDetected(SolverError):
    code = "divergence_detected"


class MaxIterations(SolverError):
    code = "max_iterations"


class ProblemFormatError(BPSError, ValueError):
    code = "parse_error"
