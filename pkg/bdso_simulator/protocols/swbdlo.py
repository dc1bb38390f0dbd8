"""
Module for the single-writer Byzantine-tolerant ledger.

The writer tags each appended payload with the next index. Servers reliably broadcast at most one add per index, so
two conflicting records for the same index can never both gather ⌊n/2⌋+f+1 propagations when n >= 4f+1.
"""

import logging
from typing import Optional

from bdso_simulator.core.exceptions import NotWriterError
from bdso_simulator.core.process_id import ProcessId
from bdso_simulator.models.messages import GetRequest, LedgerAddRequest, LedgerGetResponse
from bdso_simulator.models.operation import OpRef
from bdso_simulator.models.record import IndexedRecord, sorted_records
from bdso_simulator.protocols.base import Effects, Incoming, ReplicaSnapshot, Respond, Send
from bdso_simulator.protocols.quorum import QuorumSession, choose_servers, records_in_quorum
from bdso_simulator.protocols.replica import ReplicaServer
from bdso_simulator.schemas.scenario import OperationKind, PrefixFilter

logger = logging.getLogger()


def append_fanout(n: int, f: int) -> int:
    """Number of servers an append is sent to."""
    return n // 2 + 2 * f + 1


def sw_insert_threshold(n: int, f: int) -> int:
    """Number of distinct propagations needed before a ledger server inserts a record."""
    return n // 2 + f + 1


def sw_get_assemble(collected: list[list[IndexedRecord]], f: int, prefix_filter: PrefixFilter) -> list[IndexedRecord]:
    """
    Turn the replica snapshots collected by a get into the returned sequence.

    Only records reported by at least f+1 snapshots are considered. With the closure filter the result is the longest
    run of consecutive indices starting at 1. The literal filter keeps every considered record whose index is 1 or
    follows another considered index, which can leave gaps.

    :param collected: Snapshots from 2f+1 distinct servers.
    :param f: Maximum number of Byzantine servers.
    :param prefix_filter: Which filter to apply.
    :return: The selected records ordered by index.
    """
    candidates = records_in_quorum(collected, f)
    if prefix_filter == PrefixFilter.LITERAL:
        indices = {record.k for record in candidates}
        return sorted_records(record for record in candidates if record.k == 1 or record.k - 1 in indices)

    by_index: dict[int, list[IndexedRecord]] = {}
    for record in sorted_records(candidates):
        by_index.setdefault(record.k, []).append(record)
    sequence = []
    k = 1
    while k in by_index:
        sequence.append(by_index[k][0])
        k += 1
    return sequence


class SwClientSession(QuorumSession):
    """
    Client side of a single-writer ledger. Only the writer may append.
    """

    def __init__(self, *args, **kwargs) -> None:
        super().__init__(*args, **kwargs)
        self.k = 0

    def sw_append(self, rho: bytes) -> tuple[OpRef, IndexedRecord, Effects]:
        """
        Start an append of the next index.

        :param rho: Payload to append.
        :raises NotWriterError: If the client is not the writer of the ledger.
        :raises OperationInFlightError: If an operation is already pending.
        :return: The operation reference, the indexed record and the ADD sends to ⌊n/2⌋+2f+1 distinct servers.
        """
        if self.client_id != self.view.writer:
            raise NotWriterError(f"Client '{self.client_id}' is not the writer of '{self.view.id}'")
        record = IndexedRecord(k=self.k + 1, rho=rho)
        targets = choose_servers(self.rng, self.view, append_fanout(self.view.n, self.f))
        op = self._start(OperationKind.APPEND, targets, needed=self.f + 1)
        self.k = record.k
        message = LedgerAddRequest(object_id=self.view.id, c=op.c, w=self.client_id, record=record)
        return op, record, [Send(to=server, message=message) for server in targets]

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

    def client_on_get_response(self, sender: ProcessId, message: LedgerGetResponse) -> Optional[Respond]:
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
        return Respond(op=op, sequence=sw_get_assemble(snapshots, self.f, self.view.prefix_filter))


class SwServer(ReplicaServer):
    """
    Server of a single-writer ledger.
    """

    request_type = LedgerAddRequest

    def __init__(self, *args, **kwargs) -> None:
        super().__init__(*args, **kwargs)
        # Indices this server already propagated an add for
        self.T: set[int] = set()  # pylint: disable=invalid-name

    def default_insert_threshold(self) -> int:
        return sw_insert_threshold(self.view.n, self.view.f)

    def requester_of(self, request: LedgerAddRequest) -> ProcessId:
        return request.w

    def get_response(self, c: int, records: list) -> LedgerGetResponse:
        return LedgerGetResponse(object_id=self.view.id, c=c, i=self.process_id, records=records)

    def accepts_propagated(self, request: LedgerAddRequest) -> bool:
        return request.w == self.view.writer

    def on_add(self, incoming: Incoming) -> Effects:
        return self.sw_server_on_add(incoming)

    def sw_server_on_add(self, incoming: Incoming) -> Effects:
        """
        Handle an add request from the writer.

        :param incoming: The authenticated request.
        :return: An immediate acknowledgement if the record is already in the replica. Otherwise the acknowledgement
            is deferred, and the add is propagated only if no add for its index was propagated before.
        """
        message: LedgerAddRequest = incoming.message
        if message.w != incoming.sender or message.w != self.view.writer:
            logger.warning("Server '%s' ignoring ledger add from non-writer '%s'", self.process_id, incoming.sender)
            return []
        record = message.record
        if record in self.replica:
            return [self.ack(message.w, message.c)]
        self.defer_ack(record, message.w, message.c)
        if record.k in self.T:
            logger.debug("Server '%s' already propagated index %d", self.process_id, record.k)
            return []
        self.T.add(record.k)
        return self.propagate(incoming, (message.c, message.w, record))

    def snapshots(self) -> list[ReplicaSnapshot]:
        return [ReplicaSnapshot(object_id=self.view.id, indexed_records=self.get_snapshot())]
