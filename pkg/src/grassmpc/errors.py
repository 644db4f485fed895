"""Exception hierarchy shared across the package."""


class GrassMPCError(Exception):
    """Base class for all errors raised by this package."""


class DimensionMismatch(GrassMPCError):
    """Matrix/vector dimensions are inconsistent."""


class NoStabilizingSolution(GrassMPCError):
    """Riccati iteration failed to produce a stabilizing solution."""


class EmptyPolytope(GrassMPCError):
    """A polytope required to be nonempty turned out empty."""


class IterationCapExceeded(GrassMPCError):
    """A fixed-point or solver iteration hit its cap without converging."""


class OriginInfeasible(GrassMPCError):
    """Even x = 0 has no admissible input sequence (broken terminal ingredients)."""


class InfeasibleProblem(GrassMPCError):
    """An LP/QP instance is infeasible; carries the certificate when available."""

    def __init__(self, message, certificate=None):
        super().__init__(message)
        self.certificate = certificate


class PreconditionViolated(GrassMPCError):
    """An operation was called with arguments violating its stated precondition."""


class DivergenceDetected(GrassMPCError):
    """Closed-loop state left the state constraint set (must never happen)."""


class NotConverged(GrassMPCError):
    """A closed-loop trace did not reach the convergence threshold."""


class RejectionStall(GrassMPCError):
    """Rejection sampler acceptance rate collapsed."""


class InfeasibleDesign(GrassMPCError):
    """Constrained subspace design could not reach a feasible point."""

    def __init__(self, message, worst_index=None, worst_violation=None):
        super().__init__(message)
        self.worst_index = worst_index
        self.worst_violation = worst_violation


class NonConvergence(GrassMPCError):
    """Design optimization stopped without meeting its stationarity targets."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class InfeasibleAtIteration(GrassMPCError):
    """The Euclidean alternation hit an infeasible convex program at iteration k."""

    def __init__(self, k, message=None):
        super().__init__(message or f"convex subproblem infeasible at iteration {k}")
        self.k = k


class ConfigError(GrassMPCError):
    """Experiment configuration is malformed or inconsistent."""
