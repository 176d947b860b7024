"""Exception taxonomy.

Validation problems (bad parameters, malformed definitions) derive from
:class:`ValidationFailure`; failures of a computation that was legitimately
posed derive from :class:`NumericalFailure`.  The CLI maps the former to exit
code 2 and the latter to exit code 3; the HTTP layer maps them to 400 and 500.
"""

from __future__ import annotations


class NewtonLabError(Exception):
    """Base class for all package-specific errors."""

    code = "error"


class ValidationFailure(NewtonLabError, ValueError):
    code = "validation"


class InvalidSupportError(ValidationFailure):
    """Cutoff support [a, b] violates 0 < a < b."""


class InvalidAlphaError(ValidationFailure):
    """Stretch parameter outside (0, 1)."""


class UnsupportedDimensionError(ValidationFailure):
    """Requested dimension is outside the range an operation supports."""


class SupportTooLowError(ValidationFailure):
    """Cutoff support must start above the potential bound M."""


class NotNormalizedError(ValidationFailure):
    """Operation requires a normalized potential (global min shifted to 0)."""


class DuplicateModeError(ValidationFailure):
    """Two modes canonicalize to the same wave vector and time frequency."""


class NumericalFailure(NewtonLabError, RuntimeError):
    code = "numerical"


class IntegrationDivergedError(NumericalFailure):
    """Trajectory left the representable range mid-integration."""

    def __init__(self, message: str, last_valid_time: float):
        super().__init__(message)
        self.last_valid_time = float(last_valid_time)


class SingularWindowError(NumericalFailure):
    """A diagnostic window contains a (near-)singular Jacobi matrix."""

    def __init__(self, message: str, time: float):
        super().__init__(message)
        self.time = float(time)
