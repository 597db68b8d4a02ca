"""Exception types shared across the package."""


class PolyjetError(Exception):
    """Base class for every error raised by polyjet."""


class ExprSyntaxError(PolyjetError):
    """Malformed expression source text.

    Carries the character offset at which parsing failed.
    """

    def __init__(self, message, position):
        super().__init__(f"{message} (at offset {position})")
        self.position = position


class UnknownIdentifier(PolyjetError):
    """An identifier that is neither an allowed variable nor a known function."""

    def __init__(self, name, position=None):
        where = "" if position is None else f" (at offset {position})"
        super().__init__(f"unknown identifier {name!r}{where}")
        self.name = name
        self.position = position


class UnboundVariable(PolyjetError):
    """Evaluation hit a variable missing from the assignment."""

    def __init__(self, name):
        super().__init__(f"no value bound for variable {name!r}")
        self.name = name


class DomainError(PolyjetError):
    """Evaluation or folding left the real domain (ln of non-positive,
    sqrt of negative, division by zero)."""


class SingularJacobian(PolyjetError):
    """A chart-change Jacobian fell below the invertibility threshold."""


class SingularMetric(PolyjetError):
    """A metric (or candidate metric) is numerically singular at a point."""


class NotRegular(PolyjetError):
    """An operation requiring Kronecker regularity was applied to a
    Hamiltonian that failed the regularity check."""


class ResidualTooLarge(PolyjetError):
    """A reconstruction or independence residual exceeded its tolerance."""


class ConfigError(PolyjetError):
    """Invalid or incomplete manifest / configuration input."""
