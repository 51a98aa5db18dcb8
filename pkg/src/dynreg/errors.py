"""Exception hierarchy.

``ProblemError`` covers malformed inputs, ``SolverError`` covers numerical
breakdown during a solve. The CLI maps the first to exit code 1 and the
second to exit code 2.
"""


class DynRegError(Exception):
    """Base class for all package errors."""


class ProblemError(DynRegError, ValueError):
    """Invalid problem data or configuration."""


class SolverError(DynRegError, RuntimeError):
    """Numerical failure inside a solver."""


class DimensionMismatch(ProblemError):
    def __init__(self, component, expected, found):
        self.component = component
        self.expected = expected
        self.found = found
        super().__init__(f"{component}: expected {expected}, found {found}")


class NonFinite(ProblemError):
    def __init__(self, component, index):
        self.component = component
        self.index = index
        super().__init__(f"{component}: non-finite entry at index {index}")


class InvalidWeight(ProblemError):
    pass


class NotConstantOperator(ProblemError):
    pass


class ProblemTooLarge(ProblemError):
    pass


class InvalidMeshSpec(ProblemError):
    pass


class EllipticityViolation(ProblemError):
    pass


class InvalidScenario(ProblemError):
    pass


class ConfigError(ProblemError):
    def __init__(self, field, reason):
        self.field = field
        self.reason = reason
        super().__init__(f"[{field}] {reason}")


class LinearSolveFailure(SolverError):
    pass


class SymmetryViolation(SolverError):
    pass


class CFLViolation(SolverError):
    def __init__(self, message, max_dt):
        self.max_dt = max_dt
        super().__init__(message)


class SpectrumEscape(SolverError):
    pass


class SingularSchurComplement(SolverError):
    pass


class DegenerateFrame(DynRegError):
    """A reconstruction frame has no positive nodal value."""


class OracleMismatch(SolverError):
    """A solver result disagrees with its independent reference solve."""
