"""Phase-randomized weak coherent states carrying OAM in a Mach-Zehnder interferometer.

Exact Fock-space propagation of the interferometer, Monte Carlo detector
timelines, the three-run subtraction protocol and the CLI that reproduces
the bunching scans.
"""

__version__ = "0.1.0"


class DomainError(ValueError):
    """Raised when an operation is called outside its mathematical domain."""


class ConfigError(ValueError):
    """Raised for invalid configuration; ``fields`` lists the offending paths."""

    def __init__(self, message, fields=()):
        super().__init__(message)
        self.fields = tuple(fields)
