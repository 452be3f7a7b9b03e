"""
Exceptions raised by plrtest.

Every error carries an errno value so callers and the CLI can classify
failures without matching on message text.
"""

import errno

__all__ = [
    "PLRError",
    "ConfigurationError",
    "DomainError",
    "ShapeError",
    "FitDivergenceError",
    "ConvergenceError",
    "DegenerateCalibrationError",
    "BracketError",
    "SplitDegeneracyError",
    "CalibrationUnreliableError",
]


class PLRError(Exception):
    """Base class for all plrtest errors."""

    default_errno = errno.EINVAL

    def __init__(self, message, err=None):
        super().__init__(message)
        self.errno = self.default_errno if err is None else err
        self.message = message

    @property
    def errname(self):
        return errno.errorcode.get(self.errno, str(self.errno))


class ConfigurationError(PLRError, ValueError):
    """Invalid configuration value (kernel order, quadrature size, ...)."""


class DomainError(PLRError, ValueError):
    """Input outside the domain an operation is defined on."""

    default_errno = errno.EDOM


class ShapeError(PLRError, ValueError):
    """Array of the wrong shape."""


class FitDivergenceError(PLRError, ArithmeticError):
    """The log-density overflowed while evaluating the objective."""

    default_errno = errno.ERANGE


class ConvergenceError(PLRError):
    """Newton iterations stopped without reaching a stationary point."""

    default_errno = errno.ERANGE

    def __init__(self, message, iterate=None, model=None, grad_norm=None):
        super().__init__(message)
        self.iterate = iterate
        self.model = model
        self.grad_norm = grad_norm


class DegenerateCalibrationError(PLRError):
    """The interaction spectrum is numerically zero, no asymptotic null law."""

    default_errno = errno.EDOM


class BracketError(PLRError):
    """The adaptive smoothing rule has no root in its search bracket."""

    default_errno = errno.ERANGE

    def __init__(self, message, spectrum_summary=None):
        super().__init__(message)
        self.spectrum_summary = spectrum_summary or {}


class SplitDegeneracyError(PLRError):
    """Data splitting kept producing a half with an empty group."""

    default_errno = errno.EDOM


class CalibrationUnreliableError(PLRError):
    """Too many permutation replicates failed to fit."""

    default_errno = errno.EIO
