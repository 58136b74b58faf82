"""Exception hierarchy."""


class GWLDPError(Exception):
    """Base class for all package errors."""


class ConfigError(GWLDPError, ValueError):
    """Invalid parameters or configuration."""


class DomainError(GWLDPError, ValueError):
    """An argument lies outside the domain where the quantity is defined."""


class HypothesisError(DomainError):
    """The hypotheses of the requested limit result do not hold."""


class BracketError(GWLDPError):
    """A monotone search could not bracket its target."""


class TruncationError(GWLDPError):
    """Truncated series left more mass out than the caller allows."""


class BudgetExceeded(GWLDPError):
    """Too many replicates hit the offspring-draw budget."""


class NonConvergence(GWLDPError):
    """An iteration or extrapolation failed to settle."""


class QuadratureError(GWLDPError):
    """Adaptive quadrature did not reach the requested tolerance."""


class InsufficientSamples(GWLDPError):
    """Not enough samples for a density estimate."""


class CalibrationFailure(GWLDPError):
    """No stable scale fits the normalised sums."""


class Unclassifiable(GWLDPError):
    """No rate theorem's hypotheses hold for the configuration.

    ``prediction`` carries the recorded checks and their evidence.
    """

    def __init__(self, message: str, prediction=None):
        super().__init__(message)
        self.prediction = prediction
