"""Exception hierarchy shared by all modules."""


class CoxExtremesError(Exception):
    """Base class for errors raised by this package."""


class ParameterError(CoxExtremesError, ValueError):
    """A parameter lies outside its admissible domain."""


class DomainError(CoxExtremesError, ValueError):
    """Input data violate a precondition (negative intensity, non-positive field, ...)."""


class NumericalError(CoxExtremesError, RuntimeError):
    """A numerical procedure failed (embedding, runaway simulation, ...)."""


class EmbeddingError(NumericalError):
    """Circulant embedding stayed indefinite after maximal padding."""


class SimulationRunaway(NumericalError):
    """The storm loop exceeded its configured event cap."""
