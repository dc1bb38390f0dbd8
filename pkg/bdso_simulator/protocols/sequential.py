"""
Module for the sequential reference objects: a centralized grow-only set and a centralized ledger.

They define what a correct replicated object should look like when operations never overlap, and are used both as the
oracle for sequential equivalence and as plain reference objects.
"""

from typing import Optional, Union

from bdso_simulator.models.record import Record, sorted_records
from bdso_simulator.schemas.scenario import OperationKind

Result = Union[str, list]

ACK = "ack"


def seq_gset_apply(
    state: frozenset, operation: OperationKind, record: Optional[Record] = None
) -> tuple[frozenset, Result]:
    """
    Apply an operation to a sequential grow-only set.

    :param state: The current set of records.
    :param operation: `get` or `add`.
    :param record: The record to add.
    :raises ValueError: If the operation is not supported by a grow-only set.
    :return: The new state and the result, `"ack"` for an add or the sorted records for a get.
    """
    if operation == OperationKind.ADD:
        return state | {record}, ACK
    if operation == OperationKind.GET:
        return state, sorted_records(state)
    raise ValueError(f"Operation '{operation}' is not supported by a grow-only set")


def seq_ledger_apply(state: tuple, operation: OperationKind, payload: Optional[bytes] = None) -> tuple[tuple, Result]:
    """
    Apply an operation to a sequential ledger.

    :param state: The payloads appended so far, in order.
    :param operation: `get` or `append`.
    :param payload: The payload to append.
    :raises ValueError: If the operation is not supported by a ledger.
    :return: The new state and the result, `"ack"` for an append or the payloads in order for a get.
    """
    if operation == OperationKind.APPEND:
        return (*state, payload), ACK
    if operation == OperationKind.GET:
        return state, list(state)
    raise ValueError(f"Operation '{operation}' is not supported by a ledger")


class SequentialGSet:
    """
    Centralized grow-only set.
    """

    def __init__(self) -> None:
        self.state: frozenset = frozenset()

    def add(self, record: Record) -> str:
        """Add a record."""
        self.state, result = seq_gset_apply(self.state, OperationKind.ADD, record)
        return result

    def get(self) -> list[Record]:
        """Return every record, in deterministic order."""
        return seq_gset_apply(self.state, OperationKind.GET)[1]


class SequentialLedger:
    """
    Centralized ledger.
    """

    def __init__(self) -> None:
        self.state: tuple = ()

    def append(self, payload: bytes) -> str:
        """Append a payload."""
        self.state, result = seq_ledger_apply(self.state, OperationKind.APPEND, payload)
        return result

    def get(self) -> list[bytes]:
        """Return the payloads in append order."""
        return seq_ledger_apply(self.state, OperationKind.GET)[1]
