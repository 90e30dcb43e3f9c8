"""Ultraregular generalized functions: weight sequences, ε-nets, classification
and Fourier-side wave front estimation."""

__version__ = "0.1.0"

from .errors import (  # noqa: F401
    UltraError,
    ParameterError,
    DomainError,
    CertificateError,
    GeometryError,
    CompatibilityError,
    EvaluationError,
    FitError,
    TruncationError,
    InconclusiveError,
    ResolutionError,
    SchemaError,
)
