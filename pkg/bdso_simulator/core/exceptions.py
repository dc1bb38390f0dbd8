"""
Module for custom exception classes.
"""


class SimulationError(Exception):
    """
    Simulation related error.
    """


class ConfigInvalidError(SimulationError):
    """
    The scenario configuration is malformed or violates a resilience bound.
    """


class InsufficientServersError(ConfigInvalidError):
    """
    An object is configured with fewer servers than its protocol requires for the given `f`.
    """


class KindRoleMismatchError(ConfigInvalidError):
    """
    An adversary kind is assigned to a process whose role or object cannot host that behaviour.
    """


class StepLimitExceededError(SimulationError):
    """
    A run did not reach quiescence within its step limit.
    """

    def __init__(self, message: str, history=None):
        """
        Initialise the `StepLimitExceededError`.

        :param message: Description of the failure.
        :param history: The partial `History` recorded up to the step limit.
        """
        super().__init__(message)
        self.history = history


class UnknownOperationError(SimulationError):
    """
    An operation reference does not appear in the history.
    """


class TraceCorruptError(SimulationError):
    """
    A stored trace cannot be parsed back into a history.
    """


class UnknownPropertyError(SimulationError):
    """
    A checker was requested by a name that is not registered.
    """


class InvalidProcessIdError(ValueError):
    """
    The provided value is not a valid process ID.
    """


class ProtocolError(Exception):
    """
    Protocol related error raised by a client or server component.
    """


class OperationInFlightError(ProtocolError):
    """
    An operation was invoked while the client still has one outstanding.
    """


class NotCreatorError(ProtocolError):
    """
    A client attempted to add a record it did not create.
    """


class NotWriterError(ProtocolError):
    """
    A process other than the designated writer attempted to append to a single-writer ledger.
    """


class TargetUnknownError(ProtocolError):
    """
    An atomic request names a target object that is not in the scenario registry.
    """


class UnauthorizedClientError(ProtocolError):
    """
    A restricted target received a request from a client outside its registered set.
    """


class MalformedOperationError(ProtocolError):
    """
    The arguments of an invoked operation do not form a valid record or request.
    """
