"""Exception hierarchy shared by all modules."""

from __future__ import annotations

import numpy as np


class DfrcError(Exception):
    """Base class for package errors."""


class InvalidInputError(DfrcError, ValueError):
    """Malformed, non-finite or dimensionally inconsistent input."""


class InvalidAngleError(InvalidInputError):
    """Angle outside the open interval (-90, 90) degrees."""


class InvalidParameterError(InvalidInputError):
    """Solver or model parameter outside its admissible range."""


class DegenerateInputError(InvalidInputError):
    """Input for which the requested quantity is undefined (e.g. a zero denominator)."""


class DomainError(DfrcError, ValueError):
    """Argument outside the mathematical domain of a special function."""


class NotPSDError(DfrcError, np.linalg.LinAlgError):
    """Matrix has an eigenvalue below the numerical PSD tolerance band."""


class NotPositiveDefiniteError(DfrcError, np.linalg.LinAlgError):
    """Cholesky factorization failed."""
