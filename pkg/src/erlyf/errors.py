"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class ErlyfError(Exception):
    """Base class for all errors raised by this package."""


class InvalidParameterError(ErlyfError):
    """A physical parameter is outside its allowed domain."""


class ContractViolationError(ErlyfError):
    """An input violates a documented precondition (e.g. non-Hermitian matrix)."""


class SearchFailedError(ErlyfError):
    """A numerical search did not converge.  Carries the best iterate found."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class SingularJacobianError(ErlyfError):
    """The least-squares Jacobian is rank deficient.

    ``parameters`` names the degenerate parameter (pair) responsible.
    """

    def __init__(self, message, parameters=()):
        super().__init__(message)
        self.parameters = tuple(parameters)


class PhaseSingularityError(ErlyfError):
    """The phase readout denominator vanished (flagged, never clipped)."""


class ConfigError(ErlyfError):
    """A configuration file is malformed or contains unknown keys."""


class TraceFormatError(ErlyfError):
    """A data file does not match the expected CSV schema."""
