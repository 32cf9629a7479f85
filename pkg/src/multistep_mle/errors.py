"""Exception hierarchy shared by the estimation modules."""


class MultistepMLEError(Exception):
    """Base class for all package errors."""


class ConfigError(MultistepMLEError, ValueError):
    """Invalid configuration or argument combination."""


class NumericalError(MultistepMLEError):
    """Base class for numerical failures (CLI exit code 2)."""


class ErgodicityError(NumericalError):
    """The drift does not pull the process back from infinity (condition A0 fails)."""


class QuadratureError(NumericalError):
    """Adaptive quadrature did not reach the requested tolerance."""


class DegenerateInformationError(NumericalError):
    """Fisher information has an eigenvalue below the admissible floor."""


class SimulationDivergedError(NumericalError):
    """A simulated path left the finite region.

    Attributes
    ----------
    step : int
        Index of the first offending grid point.
    """

    def __init__(self, step, message=None):
        self.step = int(step)
        super().__init__(message or f"simulation diverged at step {self.step}")


class InsufficientDataError(NumericalError):
    """The learning window holds too few grid points."""


class DegeneratePreliminaryError(NumericalError):
    """A preliminary estimator cannot be formed from the learning window."""


class WindowError(MultistepMLEError, ValueError):
    """Requested tau lies outside the admissible window [tau_delta, 1]."""


class ExperimentFailedError(MultistepMLEError):
    """Too many Monte Carlo replicates failed."""

    def __init__(self, message, stats=None):
        super().__init__(message)
        self.stats = stats
