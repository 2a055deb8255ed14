"""Exception hierarchy.

Configuration problems derive from ``ValueError`` and map to CLI exit code 1;
numerical failures derive from ``NumericalError`` and map to exit code 2.
"""


class ConfigurationError(ValueError):
    """Invalid input: duplicate modes, bad ranges, rank-deficient settings."""


class TruncationError(ConfigurationError):
    """An operation would exceed the configured photon-number truncation."""


class NumericalError(RuntimeError):
    """Base class for failures of a numerical procedure."""


class DegenerateSectorError(NumericalError):
    """A state has no weight in the sector it is being projected onto."""


class FitError(NumericalError):
    """Fringe fit could not be carried out (singular design, no data)."""


class ConvergenceError(NumericalError):
    """An iterative optimiser stopped without meeting its tolerance.

    ``last_iterate`` and ``grad_norm`` describe where it stopped.
    """

    def __init__(self, message, last_iterate=None, grad_norm=None):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.grad_norm = grad_norm
