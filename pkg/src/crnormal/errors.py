"""Error taxonomy shared by the library and the command line front end."""


class CrnfError(Exception):
    """Base class for all library errors."""

    exit_code = 5


class ParseError(CrnfError):
    """Malformed input file or jet text."""

    exit_code = 2


class StructuralError(CrnfError):
    """Dimension / weight-grid / truncation mismatch between objects."""

    exit_code = 2


class DomainError(CrnfError):
    """Input violates a documented precondition (realness, missing terms, ...)."""

    exit_code = 3


class GenericityError(CrnfError):
    """Input fails the generic-degeneracy conditions at the origin."""

    exit_code = 3


class ModeError(CrnfError):
    """Operation would need an irrational scalar in exact mode."""

    exit_code = 4


class TruncationError(CrnfError):
    """Requested weight exceeds what the stored truncation can certify."""

    exit_code = 4


class ConsistencyError(CrnfError):
    """Internal certificate failed (residual not zero, lost invariant, ...)."""

    exit_code = 5


class NumericalError(CrnfError):
    """Floating-point iteration failed to converge or lost genericity."""

    exit_code = 5
