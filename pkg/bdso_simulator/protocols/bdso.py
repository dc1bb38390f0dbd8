"""
Module for the eventually consistent Byzantine-tolerant grow-only set: the client quorum logic and the server replica.

A get asks 3f+1 servers, waits for 2f+1 snapshots and keeps the records present in at least f+1 of them. An add goes to
2f+1 servers and completes after f+1 acknowledgements. Servers insert a record once f+1 distinct servers propagated
the same add.
"""

import logging
from typing import Optional

from bdso_simulator.core.consts import NOTE_UNAUTHORIZED_CLIENT
from bdso_simulator.core.exceptions import NotCreatorError, UnauthorizedClientError
from bdso_simulator.core.process_id import ProcessId
from bdso_simulator.models.messages import AddRequest, GetRequest, GetResponse
from bdso_simulator.models.operation import OpRef
from bdso_simulator.models.record import Record
from bdso_simulator.protocols.admission import AdmissionFilter
from bdso_simulator.protocols.base import Effects, Emit, Incoming, ReplicaSnapshot, Respond, Send, Verifier
from bdso_simulator.protocols.quorum import QuorumSession, choose_servers, quorum_get_result
from bdso_simulator.protocols.registry import ObjectView
from bdso_simulator.protocols.replica import ReplicaServer
from bdso_simulator.schemas.scenario import AdmissionMode, OperationKind

logger = logging.getLogger()


class BdsoClientSession(QuorumSession):
    """
    Client side of one grow-only set for one client.
    """

    def client_get(self) -> tuple[OpRef, Effects]:
        """
        Start a get.

        :raises OperationInFlightError: If an operation is already pending.
        :return: The operation reference and the GET sends to 3f+1 distinct servers.
        """
        targets = self._get_targets()
        op = self._start(OperationKind.GET, targets, needed=2 * self.f + 1)
        message = GetRequest(object_id=self.view.id, c=op.c, p=self.client_id)
        return op, [Send(to=server, message=message) for server in targets]

    def client_on_get_response(self, sender: ProcessId, message: GetResponse) -> Optional[Respond]:
        """
        Handle a replica snapshot for the pending get.

        :param sender: Authenticated sender of the snapshot.
        :param message: The snapshot.
        :return: The response completing the get once 2f+1 distinct snapshots arrived, else `None`.
        """
        collected = self._collect(sender, message.c, message.i, message.records)
        if collected is None:
            return None
        op, snapshots = collected
        return Respond(op=op, records=quorum_get_result(snapshots, self.f))

    def client_add(self, record: Record, on_behalf: bool = False) -> tuple[OpRef, Effects]:
        """
        Start an add.

        :param record: The record to add.
        :param on_behalf: Whether the session adds a record created by another process, as smart G-Set servers do for
            their targets.
        :raises OperationInFlightError: If an operation is already pending.
        :raises NotCreatorError: If the client adds a record it did not create and `on_behalf` is not set.
        :return: The operation reference and the ADD sends to 2f+1 distinct servers.
        """
        if not on_behalf and record.creator != self.client_id:
            raise NotCreatorError(f"Client '{self.client_id}' cannot add a record created by '{record.creator}'")
        targets = choose_servers(self.rng, self.view, 2 * self.f + 1)
        op = self._start(OperationKind.ADD, targets, needed=self.f + 1)
        message = AddRequest(object_id=self.view.id, c=op.c, p=self.client_id, record=record)
        return op, [Send(to=server, message=message) for server in targets]


class BdsoServer(ReplicaServer):
    """
    Server of a grow-only set.
    """

    request_type = AddRequest

    def __init__(self, process_id: ProcessId, view: ObjectView, verifier: Verifier, creator_only: bool = False) -> None:
        """
        Initialise the `BdsoServer`.

        :param process_id: ID of the server.
        :param view: View of the grow-only set.
        :param verifier: Function verifying an `AuthTag` over a payload.
        :param creator_only: Only accept adds of a record from its creator.
        """
        super().__init__(process_id, view, verifier)
        self.creator_only = creator_only
        self.admission = (
            AdmissionFilter(view.authorized, view.admission_f) if view.mode == AdmissionMode.RESTRICTED else None
        )

    def default_insert_threshold(self) -> int:
        return self.view.f + 1

    def requester_of(self, request: AddRequest) -> ProcessId:
        return request.p

    def get_response(self, c: int, records: list) -> GetResponse:
        return GetResponse(object_id=self.view.id, c=c, i=self.process_id, records=records)

    def accepts_propagated(self, request: AddRequest) -> bool:
        return not self.creator_only or request.record.creator == request.p

    def on_add(self, incoming: Incoming) -> Effects:
        return self.server_on_add(incoming)

    def server_on_add(self, incoming: Incoming) -> Effects:
        """
        Handle an add request from a client.

        :param incoming: The authenticated request.
        :return: An immediate acknowledgement if the record is already in the replica, otherwise the PROPAGATE
            broadcast with the acknowledgement deferred until the record is inserted.
        """
        message: AddRequest = incoming.message
        if message.p != incoming.sender:
            logger.warning(
                "Server '%s' ignoring add for '%s' sent by '%s'", self.process_id, message.p, incoming.sender
            )
            return []
        if self.creator_only and message.record.creator != message.p:
            logger.warning("Server '%s' ignoring add of a record not created by '%s'", self.process_id, message.p)
            return []
        if self.admission is not None:
            try:
                self.admission.authorize(message.p)
            except UnauthorizedClientError as exc:
                logger.warning("Server '%s' rejecting add: %s", self.process_id, exc)
                return [Emit(note=NOTE_UNAUTHORIZED_CLIENT, object_id=self.view.id, peer=message.p)]

        if message.record in self.replica:
            return [self.ack(message.p, message.c)]
        self.defer_ack(message.record, message.p, message.c)
        return self.propagate(incoming, (message.c, message.p, message.record))

    def admits(self, record: Record) -> bool:
        if self.admission is None:
            return super().admits(record)
        requesters = {
            key[1]
            for key in self._keys_by_record.get(record, [])
            if len(self.propagate_counts[key]) >= self.insert_threshold
        }
        return self.admission.admits_requesters(requesters)

    def snapshots(self) -> list[ReplicaSnapshot]:
        return [ReplicaSnapshot(object_id=self.view.id, records=self.get_snapshot())]
