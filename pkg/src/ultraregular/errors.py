"""Exception hierarchy. Every failure mode the library can raise derives from
UltraError so the CLI can map it to exit code 1."""


class UltraError(Exception):
    """Base class."""


class ParameterError(UltraError, ValueError):
    """Invalid argument (bad sigma, truncation order, ...)."""


class DomainError(UltraError, ValueError):
    """Argument outside the mathematical domain, e.g. M~(t) with t <= 0."""


class CertificateError(UltraError):
    """A truncated sup could not be certified (argmax on the boundary)."""


class GeometryError(UltraError):
    """Grid / ladder / support incompatibility."""


class CompatibilityError(UltraError):
    """Nets on different grids or ladders."""


class EvaluationError(UltraError):
    """Non-finite values produced while evaluating an expression."""


class FitError(UltraError):
    """Not enough usable points for a regression."""


class TruncationError(UltraError):
    """Series tail could not be certified below tolerance."""


class InconclusiveError(UltraError):
    """Finite data cannot decide the question asked."""


class ResolutionError(UltraError):
    """Window or feature below the grid resolution."""


class SchemaError(UltraError):
    """Scenario file does not match the schema."""
