"""
Module for defining the wire messages exchanged between clients and servers.

Every message names the logical object it belongs to so that several objects can share one simulated network. A
message travels as the canonical JSON encoding inside an envelope payload, and decoding it back is the shape validation
applied to anything a Byzantine process may send.
"""

from typing import Annotated, Literal, Union

from pydantic import BaseModel, ConfigDict, Field, TypeAdapter

from bdso_simulator.core.process_id import ProcessId
from bdso_simulator.models.envelope import AuthTag
from bdso_simulator.models.record import IndexedRecord, Record


class WireMessage(BaseModel):
    """
    Base model for every wire message.
    """

    model_config = ConfigDict(frozen=True, ser_json_bytes="base64", val_json_bytes="base64")

    object_id: str


class GetRequest(WireMessage):
    """Request for a replica snapshot."""

    type: Literal["get"] = "get"
    c: int = Field(ge=1)
    p: ProcessId


class GetResponse(WireMessage):
    """Replica snapshot of a G-Set server."""

    type: Literal["get_resp"] = "get_resp"
    c: int = Field(ge=1)
    i: ProcessId
    records: list[Record]


class LedgerGetResponse(WireMessage):
    """Replica snapshot of a single-writer ledger server."""

    type: Literal["ledger_get_resp"] = "ledger_get_resp"
    c: int = Field(ge=1)
    i: ProcessId
    records: list[IndexedRecord]


class AddRequest(WireMessage):
    """Request to add a record to a G-Set."""

    type: Literal["add"] = "add"
    c: int = Field(ge=1)
    p: ProcessId
    record: Record


class LedgerAddRequest(WireMessage):
    """Request from the writer to add an indexed record to a single-writer ledger."""

    type: Literal["ledger_add"] = "ledger_add"
    c: int = Field(ge=1)
    w: ProcessId
    record: IndexedRecord


class AppendRequest(WireMessage):
    """Request to append a record to a sequential ledger stub."""

    type: Literal["append"] = "append"
    c: int = Field(ge=1)
    p: ProcessId
    record: Record


class BroadcastRequest(WireMessage):
    """Request asking a server of a broadcast-only object to reliably broadcast a body."""

    type: Literal["broadcast"] = "broadcast"
    c: int = Field(ge=1)
    p: ProcessId
    body: bytes


class Ack(WireMessage):
    """Acknowledgement completing an add, append or broadcast request."""

    type: Literal["ack"] = "ack"
    c: int = Field(ge=1)
    i: ProcessId


class Propagate(WireMessage):
    """
    Body reliably broadcast by a server that received a fresh add. It carries the client's signed request so that every
    receiver can check the client really issued it.
    """

    type: Literal["propagate"] = "propagate"
    origin: ProcessId
    request: bytes
    request_tag: AuthTag


class BrbInit(WireMessage):
    """First phase of a reliable broadcast, sent by the origin to every server."""

    type: Literal["brb_init"] = "brb_init"
    origin: ProcessId
    # Origin's own label for the broadcast, only used to report equivocation
    slot: str
    body: bytes


class BrbEcho(WireMessage):
    """Echo phase of a reliable broadcast."""

    type: Literal["brb_echo"] = "brb_echo"
    origin: ProcessId
    digest: int
    body: bytes


class BrbReady(WireMessage):
    """Ready phase of a reliable broadcast."""

    type: Literal["brb_ready"] = "brb_ready"
    origin: ProcessId
    digest: int
    body: bytes


class Notify(WireMessage):
    """Notification from a smart G-Set server that both appends of a matched pair completed."""

    type: Literal["notify"] = "notify"
    pair_id: str
    server_id: ProcessId


Message = Annotated[
    Union[
        GetRequest,
        GetResponse,
        LedgerGetResponse,
        AddRequest,
        LedgerAddRequest,
        AppendRequest,
        BroadcastRequest,
        Ack,
        Propagate,
        BrbInit,
        BrbEcho,
        BrbReady,
        Notify,
    ],
    Field(discriminator="type"),
]

MESSAGE_ADAPTER: TypeAdapter[Message] = TypeAdapter(Message)


def encode_message(message: WireMessage) -> bytes:
    """
    Encode a message into its canonical envelope payload.

    :param message: The message to encode.
    :return: The canonical JSON bytes.
    """
    return message.model_dump_json().encode()


def decode_message(payload: bytes) -> WireMessage:
    """
    Decode an envelope payload back into a message.

    :param payload: The envelope payload.
    :raises pydantic.ValidationError: If the payload is not a well formed message.
    :return: The decoded message.
    """
    return MESSAGE_ADAPTER.validate_json(payload)
