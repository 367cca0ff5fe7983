"""Exception hierarchy shared by all tridome modules.

The CLI maps these onto exit codes: malformed input / failed validation
is exit 3, numerical failures (stalls, missed closures, failed
approximation budgets) are exit 4, I/O problems are exit 5.
"""


class DomeError(Exception):
    """Base class for all tridome errors."""


class MalformedInputError(DomeError):
    """Input violates a structural precondition (bad curve, bad file)."""


class NonManifoldError(MalformedInputError):
    """An edge is incident to three or more faces."""


class GlueError(MalformedInputError):
    """Vertex correspondence maps non-coincident points."""


class DomainError(MalformedInputError):
    """Numeric argument outside the operation's domain."""


class FlipError(DomeError):
    """A flip step cannot be performed (bad axis, non-unit edges)."""


class StallError(DomeError):
    """Planarization could not find an admissible multiplier."""

    def __init__(self, message, vertex=None):
        super().__init__(message)
        self.vertex = vertex


class PackingError(DomeError):
    """A packing bound could not be met."""


class PerturbationError(DomeError):
    """Generic perturbation failed at the requested magnitude."""


class ApproximationError(DomeError):
    """Approximate doming missed its error budget."""


class RingError(DomeError):
    """Ring construction stopped advancing."""


class ClosureError(DomeError):
    """Closure root for the n-gon construction was not bracketed."""


class CompositionError(DomeError):
    """Triangle composition rule precondition violated."""


class ConstructionError(DomeError):
    """Parametric construction (e.g. Bricard octahedron) unrealizable."""


class ConfigError(DomeError):
    """Assembly configuration rejected (e.g. accordion face choice)."""
