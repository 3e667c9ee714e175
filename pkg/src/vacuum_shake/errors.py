"""Exception hierarchy shared by all vacuum_shake modules.

The CLI maps these onto process exit codes (see cli.py): configuration and
schema problems exit 2, numerical failures exit 3, capacity overruns exit 4.
"""


class VacuumShakeError(Exception):
    """Base class for all package errors."""


class ConfigError(VacuumShakeError):
    """Invalid configuration: bad parameter values, geometry mismatches,
    malformed scenario files."""


class DomainError(VacuumShakeError):
    """A quantity was requested outside its valid domain (e.g. a frequency
    outside the grid band, a negative decay rate)."""


class CapacityError(VacuumShakeError):
    """A requested truncated Hilbert space exceeds the configured size cap."""


class NumericalError(VacuumShakeError):
    """Quadrature non-convergence, integrator step-size underflow, or any
    other numerical failure.  Carries diagnostics in ``details``."""

    def __init__(self, message, details=None):
        super().__init__(message)
        self.details = dict(details or {})


class FitQualityError(VacuumShakeError):
    """A least-squares fit did not meet its required quality threshold."""
