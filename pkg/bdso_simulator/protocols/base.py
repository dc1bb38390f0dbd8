"""
Module for the interface every simulated process implements and the effects it hands back to the simulator.

A machine never touches the network directly. Each handler returns a list of effects that the simulator applies in
order: sends are signed and enqueued, invocations and responses are recorded in the history, and emits become
`local_emit` events. The pseudocode's "wait until" statements become pending state inside the machine.
"""

from abc import ABC, abstractmethod
from typing import Callable, Optional, Union

from pydantic import BaseModel, ConfigDict

from bdso_simulator.core.exceptions import ProtocolError
from bdso_simulator.core.process_id import ProcessId
from bdso_simulator.models.envelope import AuthTag
from bdso_simulator.models.messages import WireMessage
from bdso_simulator.models.operation import OpRef
from bdso_simulator.models.record import AtomicRequestRecord, IndexedRecord, Record
from bdso_simulator.schemas.scenario import OperationKind, WorkloadOperation

Verifier = Callable[[AuthTag, bytes], bool]


class Effect(BaseModel):
    """
    Base model for everything a handler can ask the simulator to do.
    """

    model_config = ConfigDict(frozen=True)


class Send(Effect):
    """Sign `message` as the emitting process and enqueue it for `to`."""

    to: ProcessId
    message: WireMessage


class ForgedSend(Effect):
    """Enqueue a pre-built payload and tag claiming to come from `claimed_sender`."""

    to: ProcessId
    claimed_sender: ProcessId
    payload: bytes
    tag: AuthTag


class Invoke(Effect):
    """Record the invocation of an operation."""

    op: OpRef
    operation: OperationKind
    record: Optional[Record] = None
    indexed_record: Optional[IndexedRecord] = None
    request: Optional[AtomicRequestRecord] = None
    payload: Optional[bytes] = None


class Respond(Effect):
    """Record the response of an operation."""

    op: OpRef
    ack: bool = False
    records: Optional[list[Record]] = None
    sequence: Optional[list[IndexedRecord]] = None


class Emit(Effect):
    """Record a local event of the emitting process."""

    note: str
    object_id: str
    record: Optional[Record] = None
    indexed_record: Optional[IndexedRecord] = None
    origin: Optional[ProcessId] = None
    digest: Optional[int] = None
    pair_id: Optional[str] = None
    peer: Optional[ProcessId] = None


Effects = list[Union[Send, ForgedSend, Invoke, Respond, Emit]]


class Incoming(BaseModel):
    """
    Model for an authenticated, decoded message handed to a machine.
    """

    model_config = ConfigDict(frozen=True)

    sender: ProcessId
    message: WireMessage
    # Exact payload and tag of the envelope, kept so that requests can be relayed with their signature
    raw: bytes
    tag: AuthTag


class ReplicaSnapshot(BaseModel):
    """
    Model for the final state of one replica, recorded when a run ends.
    """

    object_id: str
    records: Optional[list[Record]] = None
    indexed_records: Optional[list[IndexedRecord]] = None


class ProcessStateMachine(ABC):
    """
    Base class for every simulated server and client.
    """

    def __init__(self, process_id: ProcessId) -> None:
        """
        Initialise the `ProcessStateMachine`.

        :param process_id: ID of the simulated process.
        """
        self.process_id = process_id

    def on_start(self) -> Effects:
        """
        Handle the start of the run.

        :return: The effects to apply.
        """
        return []

    @abstractmethod
    def on_message(self, incoming: Incoming) -> Effects:
        """
        Handle an authenticated message.

        :param incoming: The message and its envelope details.
        :return: The effects to apply.
        """

    def invoke(self, operation: WorkloadOperation) -> Effects:
        """
        Invoke a workload operation. The first effect returned must be the `Invoke` recording it.

        :param operation: The operation to invoke.
        :raises ProtocolError: If the process does not invoke operations.
        :return: The effects to apply.
        """
        raise ProtocolError(f"Process '{self.process_id}' does not invoke operations")

    def snapshots(self) -> list[ReplicaSnapshot]:
        """
        Final replica states of the process.

        :return: One snapshot per replica the process holds.
        """
        return []
