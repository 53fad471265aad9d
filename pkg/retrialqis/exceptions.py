"""
Exception hierarchy for retrialqis

:author: Athanasios Anastasiou
:date: Oct 2026
"""


class RetrialQISException(Exception):
    """
    Base class for all exceptions that are specific to retrialqis.
    """
    def __init__(self, msg):
        super().__init__(msg)
        self.message = msg

    def __reduce__(self):
        # Subclasses take extra constructor arguments, so rebuild from the attributes instead.
        return (_rebuild, (self.__class__, self.message, dict(self.__dict__)))


def _rebuild(cls, msg, state):
    an_exception = cls.__new__(cls)
    Exception.__init__(an_exception, msg)
    an_exception.__dict__.update(state)
    return an_exception


class ParameterError(RetrialQISException, ValueError):
    """
    Raised when a set of model parameters violates one of the relations that tie its fields together.

    :param field: The name of the offending field
    :type field: str
    """
    def __init__(self, field, msg):
        super().__init__(msg)
        self.field = field


class ConfigurationError(RetrialQISException):
    """
    Raised when a configuration file or a command line override cannot be turned into parameters.
    """
    pass


class StateNotFound(RetrialQISException, KeyError):
    """
    Raised on lookups of states (or indices) that are not part of an enumerated state space.
    """
    def __str__(self):
        return self.message


class GeneratorError(RetrialQISException):
    """
    Raised when a transition rule does not resolve to exactly one feasible target state.
    """
    pass


class NumericalError(RetrialQISException):
    """
    Base class for failures of the numerical pipeline.
    """
    pass


class ReducibleGeneratorError(NumericalError):
    """
    Raised when the aggregated generator is not irreducible.

    :param state: The (macro-level, server state) that cannot be reached
    """
    def __init__(self, msg, state=None):
        super().__init__(msg)
        self.state = state


class RDivergenceError(NumericalError):
    """
    Raised when the fixed point iteration for R does not settle within the allowed iterations.
    """
    def __init__(self, msg, residual, spectral_radius, iterations):
        super().__init__(msg)
        self.residual = residual
        self.spectral_radius = spectral_radius
        self.iterations = iterations


class ConditioningError(NumericalError):
    """
    Raised when one of the K_j matrices of the stationary recursion cannot be formed.
    """
    def __init__(self, msg, level):
        super().__init__(msg)
        self.level = level


class DivergentTailError(NumericalError):
    """
    Raised when the geometric tail does not converge (sp(R) >= 1).
    """
    pass


class UnstableModelError(RetrialQISException):
    """
    Raised when the truncated chain fails the stability test.
    """
    def __init__(self, msg, drift_up, drift_down):
        super().__init__(msg)
        self.drift_up = drift_up
        self.drift_down = drift_down


class MetricsError(RetrialQISException):
    pass


class SimulationError(RetrialQISException):
    """
    Raised when the simulation oracle catches itself in an impossible state.

    :param trace: The most recent event lines leading to the breach
    :type trace: list[str]
    """
    def __init__(self, msg, trace=None, replication=None):
        super().__init__(msg)
        self.trace = list(trace or [])
        self.replication = replication


class ConditioningWarning(UserWarning):
    """
    Issued when a linear system of the solver is badly conditioned.
    """
    pass
