"""
Module for the server logic shared by the grow-only set and single-writer ledger replicas.

A server that receives a fresh add request reliably broadcasts a PROPAGATE carrying the client's signed request. Every
server counts the distinct origins that propagated each ⟨c, p, r⟩ and inserts r once enough of them did. Pending acks
are keyed by the record so that any insertion of r releases every client waiting on r.
"""

import logging
from abc import ABC, abstractmethod
from typing import Union

from pydantic import ValidationError

from bdso_simulator.core.consts import NOTE_INSERT
from bdso_simulator.core.process_id import ProcessId
from bdso_simulator.models.messages import (
    Ack,
    AddRequest,
    GetRequest,
    Propagate,
    WireMessage,
    decode_message,
    encode_message,
)
from bdso_simulator.models.record import IndexedRecord, Record, sorted_records
from bdso_simulator.protocols.base import (
    Effects,
    Emit,
    Incoming,
    ProcessStateMachine,
    Send,
    Verifier,
)
from bdso_simulator.protocols.brb import BRB_MESSAGE_TYPES, BrbDelivery, BrbInstanceTable
from bdso_simulator.protocols.registry import ObjectView

logger = logging.getLogger()

AnyRecord = Union[Record, IndexedRecord]
AddKey = tuple[int, ProcessId, AnyRecord]


class ReplicaServer(ProcessStateMachine, ABC):
    """
    Base class for servers whose replica grows through reliably broadcast PROPAGATE messages.
    """

    request_type: type = AddRequest

    def __init__(self, process_id: ProcessId, view: ObjectView, verifier: Verifier) -> None:
        """
        Initialise the server.

        :param process_id: ID of the server.
        :param view: View of the object the server replicates.
        :param verifier: Function verifying an `AuthTag` over a payload, used on relayed client requests.
        """
        super().__init__(process_id)
        self.view = view
        self.verifier = verifier
        self.brb = BrbInstanceTable(view.id, process_id, view.servers, view.f)
        self.replica: set[AnyRecord] = set()
        self.propagate_counts: dict[AddKey, set[ProcessId]] = {}
        self.pending_acks: dict[AnyRecord, list[tuple[ProcessId, int]]] = {}
        self.insert_threshold = view.insert_threshold or self.default_insert_threshold()
        self._keys_by_record: dict[AnyRecord, list[AddKey]] = {}
        self._broadcast_keys: set[AddKey] = set()

    @abstractmethod
    def default_insert_threshold(self) -> int:
        """Number of distinct origins that must propagate an add before its record is inserted."""

    @abstractmethod
    def requester_of(self, request) -> ProcessId:
        """The client a request claims to come from."""

    @abstractmethod
    def on_add(self, incoming: Incoming) -> Effects:
        """
        Handle an add request received directly from a client.

        :param incoming: The authenticated request.
        :return: The effects to apply.
        """

    @abstractmethod
    def get_response(self, c: int, records: list) -> WireMessage:
        """Build the response to a get."""

    def accepts_propagated(self, request) -> bool:  # pylint: disable=unused-argument
        """
        Decide whether a request relayed by reliable broadcast may count towards insertion.

        :param request: The relayed request.
        :return: Whether it is acceptable.
        """
        return True

    def on_message(self, incoming: Incoming) -> Effects:
        message = incoming.message
        if message.object_id != self.view.id:
            return self.on_foreign_message(incoming)
        if isinstance(message, GetRequest):
            return self.server_on_get(incoming)
        if isinstance(message, self.request_type):
            return self.on_add(incoming)
        if isinstance(message, BRB_MESSAGE_TYPES):
            effects, deliveries = self.brb.brb_on_message(incoming.sender, message)
            for delivery in deliveries:
                effects.extend(self.on_delivery(delivery))
            return effects
        logger.warning("Server '%s' ignoring unexpected '%s' message", self.process_id, message.type)
        return []

    def on_foreign_message(self, incoming: Incoming) -> Effects:
        """
        Handle a message about another object.

        :param incoming: The message.
        :return: The effects to apply.
        """
        logger.warning(
            "Server '%s' of '%s' ignoring message about '%s'",
            self.process_id,
            self.view.id,
            incoming.message.object_id,
        )
        return []

    def server_on_get(self, incoming: Incoming) -> Effects:
        """
        Answer a get with the current replica.

        :param incoming: The authenticated get request.
        :return: The response send.
        """
        message = incoming.message
        if message.p != incoming.sender:
            logger.warning(
                "Server '%s' ignoring get for '%s' sent by '%s'", self.process_id, message.p, incoming.sender
            )
            return []
        return [Send(to=incoming.sender, message=self.get_response(message.c, self.get_snapshot()))]

    def get_snapshot(self) -> list:
        """The replica content reported to gets, in deterministic order."""
        return sorted_records(self.replica)

    def ack(self, client: ProcessId, c: int) -> Send:
        """
        Build an acknowledgement.

        :param client: The client to acknowledge.
        :param c: The client's operation counter.
        :return: The send.
        """
        return Send(to=client, message=Ack(object_id=self.view.id, c=c, i=self.process_id))

    def defer_ack(self, record: AnyRecord, client: ProcessId, c: int) -> None:
        """
        Hold back an acknowledgement until a record is inserted.

        :param record: The record the client waits on.
        :param client: The waiting client.
        :param c: The client's operation counter.
        """
        self.pending_acks.setdefault(record, []).append((client, c))

    def propagate(self, incoming: Incoming, key: AddKey) -> Effects:
        """
        Reliably broadcast a PROPAGATE for a client request, at most once per add key.

        :param incoming: The authenticated client request, relayed with its signature.
        :param key: The ⟨c, p, r⟩ key of the request.
        :return: The broadcast effects.
        """
        if key in self._broadcast_keys:
            return []
        self._broadcast_keys.add(key)
        body = encode_message(
            Propagate(object_id=self.view.id, origin=self.process_id, request=incoming.raw, request_tag=incoming.tag)
        )
        return self.brb.brb_broadcast(body, slot=f"propagate:{key[1]}:{key[0]}")

    def on_delivery(self, delivery: BrbDelivery) -> Effects:
        """
        Validate a reliably delivered PROPAGATE and hand its request to the insertion logic.

        :param delivery: The delivered body and its origin.
        :return: The effects to apply.
        """
        try:
            propagate = decode_message(delivery.body)
        except ValidationError:
            logger.warning("Server '%s' dropping malformed broadcast from '%s'", self.process_id, delivery.origin)
            return []
        if not isinstance(propagate, Propagate) or propagate.origin != delivery.origin:
            logger.warning(
                "Server '%s' dropping broadcast from '%s' that is not its PROPAGATE", self.process_id, delivery.origin
            )
            return []
        if not self.verifier(propagate.request_tag, propagate.request):
            logger.warning(
                "Server '%s' dropping PROPAGATE from '%s' with a forged request", self.process_id, delivery.origin
            )
            return []
        try:
            request = decode_message(propagate.request)
        except ValidationError:
            logger.warning(
                "Server '%s' dropping PROPAGATE from '%s' with a malformed request", self.process_id, delivery.origin
            )
            return []
        if (
            not isinstance(request, self.request_type)
            or request.object_id != self.view.id
            or self.requester_of(request) != propagate.request_tag.signer
        ):
            logger.warning(
                "Server '%s' dropping PROPAGATE from '%s' with a mismatched request", self.process_id, delivery.origin
            )
            return []
        return self.server_on_brb_insert(delivery.origin, request)

    def server_on_brb_insert(self, origin: ProcessId, request) -> Effects:
        """
        Count a propagation of a request and insert its record once the threshold is reached.

        :param origin: The server that propagated the request.
        :param request: The validated client request.
        :return: The effects to apply, including released acknowledgements.
        """
        if not self.accepts_propagated(request):
            return []
        record = request.record
        key = (request.c, self.requester_of(request), record)
        origins = self.propagate_counts.get(key)
        if origins is None:
            origins = set()
            self.propagate_counts[key] = origins
            self._keys_by_record.setdefault(record, []).append(key)
        if origin in origins:
            return []
        origins.add(origin)
        if record in self.replica or not self.admits(record):
            return []
        return self.insert(record)

    def admits(self, record: AnyRecord) -> bool:
        """
        Decide whether a record has been propagated by enough origins to be inserted.

        :param record: The candidate record.
        :return: Whether some add key carrying the record reached the threshold.
        """
        return any(
            len(self.propagate_counts[key]) >= self.insert_threshold for key in self._keys_by_record.get(record, [])
        )

    def insert(self, record: AnyRecord) -> Effects:
        """
        Insert a record into the replica and release the clients waiting on it.

        :param record: The record to insert.
        :return: The effects to apply.
        """
        self.replica.add(record)
        logger.debug("Server '%s' inserted a record into '%s'", self.process_id, self.view.id)
        if isinstance(record, IndexedRecord):
            effects: Effects = [Emit(note=NOTE_INSERT, object_id=self.view.id, indexed_record=record)]
        else:
            effects = [Emit(note=NOTE_INSERT, object_id=self.view.id, record=record)]
        effects.extend(self.ack(client, c) for client, c in self.pending_acks.pop(record, []))
        effects.extend(self.after_insert(record))
        return effects

    def after_insert(self, record: AnyRecord) -> Effects:  # pylint: disable=unused-argument
        """
        Hook run after every insertion.

        :param record: The inserted record.
        :return: The effects to apply.
        """
        return []
