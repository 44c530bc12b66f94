"""Exception types raised by the simulator."""


class RailsimError(Exception):
    """Base class for all errors raised by this package."""


class NonFiniteInputError(RailsimError, ValueError):
    """An input vector contained NaN or an infinity."""


class InvalidProfileError(RailsimError, ValueError):
    """A track profile violates its invariants (e.g. non-positive wavelength)."""


class DelaysUndefinedError(RailsimError, ValueError):
    """Wheel transport delays are undefined (zero speed)."""


class InvalidPlanError(RailsimError, ValueError):
    """A worker plan is malformed or unsupported."""


class IntegrationDivergedError(RailsimError, ArithmeticError):
    """The solution became non-finite during time stepping."""

    def __init__(self, message, step_index=None, time=None):
        super().__init__(message)
        self.step_index = step_index
        self.time = time


class StepSizeUnderflowError(RailsimError, ArithmeticError):
    """The adaptive controller pushed the step size below its floor."""


class SingularMatrixError(RailsimError, ArithmeticError):
    """Gaussian elimination hit a pivot too small to divide by."""


class UndampedResonanceError(RailsimError, ArithmeticError):
    """The resolvent is singular at a forcing frequency (undamped resonance)."""


class InsufficientWindowError(RailsimError, ValueError):
    """A measurement window is too short or lies outside the sampled span."""


class ConfigError(RailsimError, ValueError):
    """A configuration file is malformed or violates an invariant."""
