"""
Module for the history recorded by a run: every invocation, response, delivery and local event in the order the
simulator produced them. A history is written to disk as JSON lines and can be read back to re-run the checkers.
"""

import logging
from pathlib import Path
from typing import Annotated, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, TypeAdapter, ValidationError

from bdso_simulator.core.exceptions import TraceCorruptError, UnknownOperationError
from bdso_simulator.core.process_id import ProcessId
from bdso_simulator.models.envelope import Envelope
from bdso_simulator.models.operation import OpRef
from bdso_simulator.models.record import AtomicRequestRecord, IndexedRecord, Record
from bdso_simulator.schemas.scenario import OperationKind, ScenarioConfig

logger = logging.getLogger()


class HistoryEvent(BaseModel):
    """
    Base model for every history event.
    """

    model_config = ConfigDict(frozen=True, ser_json_bytes="base64", val_json_bytes="base64")

    step: int = Field(ge=0)


class RunStarted(HistoryEvent):
    """Start of a run, embedding the scenario and seed it was run with."""

    kind: Literal["run_started"] = "run_started"
    scenario: ScenarioConfig
    seed: int


class Invocation(HistoryEvent):
    """Invocation of an operation."""

    kind: Literal["invocation"] = "invocation"
    op: OpRef
    operation: OperationKind
    record: Optional[Record] = None
    indexed_record: Optional[IndexedRecord] = None
    request: Optional[AtomicRequestRecord] = None
    payload: Optional[bytes] = None


class Response(HistoryEvent):
    """Response of an operation."""

    kind: Literal["response"] = "response"
    op: OpRef
    ack: bool = False
    records: Optional[list[Record]] = None
    sequence: Optional[list[IndexedRecord]] = None


class Deliver(HistoryEvent):
    """
    Delivery of an envelope. `authentic` is the verdict of the authentication filter and `dispatched` tells whether
    the message reached the recipient's handler.
    """

    kind: Literal["deliver"] = "deliver"
    envelope: Envelope
    authentic: bool
    dispatched: bool


class LocalEmit(HistoryEvent):
    """Local event reported by a process."""

    kind: Literal["local_emit"] = "local_emit"
    process: ProcessId
    note: str
    object_id: str
    record: Optional[Record] = None
    indexed_record: Optional[IndexedRecord] = None
    origin: Optional[ProcessId] = None
    digest: Optional[int] = None
    pair_id: Optional[str] = None
    peer: Optional[ProcessId] = None


class Quiescence(HistoryEvent):
    """Marker recorded the first time no message was in flight and no client could invoke."""

    kind: Literal["quiescence"] = "quiescence"


class Snapshot(HistoryEvent):
    """Final replica state of a server."""

    kind: Literal["snapshot"] = "snapshot"
    process: ProcessId
    object_id: str
    records: Optional[list[Record]] = None
    indexed_records: Optional[list[IndexedRecord]] = None


class RunFinished(HistoryEvent):
    """End of a run."""

    kind: Literal["run_finished"] = "run_finished"
    outcome: Literal["quiescent", "step_limit"]


Event = Annotated[
    Union[RunStarted, Invocation, Response, Deliver, LocalEmit, Quiescence, Snapshot, RunFinished],
    Field(discriminator="kind"),
]

EVENT_ADAPTER: TypeAdapter[Event] = TypeAdapter(Event)


class History:
    """
    Ordered list of the events of one run, with lookups used by the checkers.
    """

    def __init__(self, events: Optional[list[HistoryEvent]] = None) -> None:
        """
        Initialise the `History`.

        :param events: Events to start from, in order.
        """
        self.events: list[HistoryEvent] = []
        self._invocations: dict[OpRef, int] = {}
        self._responses: dict[OpRef, int] = {}
        for event in events or []:
            self.record(event)

    def record(self, event: HistoryEvent) -> None:
        """
        Append an event.

        :param event: The event.
        """
        position = len(self.events)
        self.events.append(event)
        if isinstance(event, Invocation):
            self._invocations[event.op] = position
        elif isinstance(event, Response):
            self._responses[event.op] = position

    def of_kind(self, event_type: type) -> list:
        """
        Events of one type, in order.

        :param event_type: The event class.
        :return: The matching events.
        """
        return [event for event in self.events if isinstance(event, event_type)]

    @property
    def run_started(self) -> RunStarted:
        """The `run_started` event."""
        return self.of_kind(RunStarted)[0]

    @property
    def scenario(self) -> ScenarioConfig:
        """Scenario the run was built from."""
        return self.run_started.scenario

    @property
    def seed(self) -> int:
        """Seed of the run."""
        return self.run_started.seed

    @property
    def outcome(self) -> Optional[str]:
        """Outcome of the run, `None` if it has not finished."""
        finished = self.of_kind(RunFinished)
        return finished[0].outcome if finished else None

    @property
    def quiescence_position(self) -> Optional[int]:
        """Position of the quiescence marker, `None` if the run never became quiescent."""
        return next((index for index, event in enumerate(self.events) if isinstance(event, Quiescence)), None)

    def emits(self, note: Optional[str] = None) -> list[LocalEmit]:
        """
        Local events, optionally only those with a given note.

        :param note: The note to filter on.
        :return: The events in order.
        """
        return [event for event in self.of_kind(LocalEmit) if note is None or event.note == note]

    def operations(self) -> list[tuple[Invocation, Optional[Response]]]:
        """
        Every invoked operation with its response, if any, in invocation order.

        :return: Pairs of invocation and response.
        """
        return [(self.events[position], self.response_for(op)) for op, position in self._invocations.items()]

    def invocation_for(self, op: OpRef) -> Optional[Invocation]:
        """The invocation of an operation, if recorded."""
        position = self._invocations.get(op)
        return self.events[position] if position is not None else None

    def response_for(self, op: OpRef) -> Optional[Response]:
        """The response of an operation, if recorded."""
        position = self._responses.get(op)
        return self.events[position] if position is not None else None

    def position_of_invocation(self, op: OpRef) -> int:
        """
        Position of an operation's invocation.

        :param op: The operation.
        :raises UnknownOperationError: If the operation was never invoked.
        :return: The index of the event.
        """
        if op not in self._invocations:
            raise UnknownOperationError(f"Operation {op} does not appear in the history")
        return self._invocations[op]

    def position_of_response(self, op: OpRef) -> Optional[int]:
        """
        Position of an operation's response.

        :param op: The operation.
        :raises UnknownOperationError: If the operation was never invoked.
        :return: The index of the event, `None` if the operation is still pending.
        """
        self.position_of_invocation(op)
        return self._responses.get(op)

    def to_jsonl(self) -> str:
        """Render the history as JSON lines."""
        return "".join(event.model_dump_json(exclude_none=True) + "\n" for event in self.events)

    def write(self, path: Path) -> None:
        """
        Write the history to a file, creating its directory if needed.

        :param path: The trace path.
        """
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_jsonl(), encoding="utf-8")
        logger.info("Trace written to %s", path)

    @classmethod
    def from_jsonl(cls, text: str) -> "History":
        """
        Parse a history from JSON lines.

        :param text: The JSON lines.
        :raises TraceCorruptError: If a line is not a valid event or the history does not start with `run_started`.
        :return: The history.
        """
        events = []
        for number, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            try:
                events.append(EVENT_ADAPTER.validate_json(line))
            except ValidationError as exc:
                raise TraceCorruptError(f"Line {number} is not a valid history event: {exc}") from exc
        if not events or not isinstance(events[0], RunStarted):
            raise TraceCorruptError("A trace must start with a run_started event")
        return cls(events)

    @classmethod
    def read(cls, path: Path) -> "History":
        """
        Read a history from a trace file.

        :param path: The trace path.
        :raises TraceCorruptError: If the file cannot be read or parsed.
        :return: The history.
        """
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise TraceCorruptError(f"Cannot read trace '{path}': {exc}") from exc
        return cls.from_jsonl(text)


def precedes(history: History, first: OpRef, second: OpRef) -> bool:
    """
    Real-time order of two operations.

    :param history: The history.
    :param first: An operation.
    :param second: Another operation.
    :raises UnknownOperationError: If either operation does not appear in the history.
    :return: Whether `first` responded before `second` was invoked.
    """
    response = history.position_of_response(first)
    invocation = history.position_of_invocation(second)
    return response is not None and response < invocation
