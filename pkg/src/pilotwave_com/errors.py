"""Exception types raised by the simulation layers."""


class PilotwaveError(Exception):
    """Base class for all package errors."""


class GridTooNarrow(PilotwaveError):
    """Initial state has non-negligible amplitude at the grid boundary."""


class ZeroNorm(PilotwaveError):
    """Wavefunction norm too small to normalize or sample."""


class GridMismatch(PilotwaveError):
    """Operands live on different grids."""


class OutOfDomain(PilotwaveError):
    """Requested position lies outside the grid."""


class TooFewSamples(PilotwaveError):
    """Statistical check called with an ensemble below its minimum size."""


class UnsupportedState(PilotwaveError):
    """State family not handled by the conditional sampler."""


class TooLarge(PilotwaveError):
    """Matrix order exceeds the permanent cost guard."""


class EmptyEnsemble(PilotwaveError):
    """Trajectory ensemble holds no experiments."""


class DomainError(PilotwaveError):
    """Argument outside the mathematical domain of the function."""


class ConditionViolation(PilotwaveError):
    """Coordinate-change coefficients fail their defining conditions."""


class Nonconvergence(PilotwaveError):
    """Nonlinear midpoint refinement changed the applied phase too much.

    Signals that the time step is too large for the current state.
    """


class BoundaryLeak(PilotwaveError):
    """Test function does not decay at the integration boundary."""


class ConfigError(PilotwaveError):
    """Invalid or unknown experiment configuration entry."""
