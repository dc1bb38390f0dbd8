"""
Module for the client-side quorum bookkeeping shared by every object kind.
"""

import logging
from collections import Counter
from typing import Optional

import numpy as np
from pydantic import BaseModel

from bdso_simulator.core.exceptions import OperationInFlightError
from bdso_simulator.core.process_id import ProcessId
from bdso_simulator.models.messages import Ack
from bdso_simulator.models.operation import OpRef
from bdso_simulator.models.record import sorted_records
from bdso_simulator.protocols.base import Respond
from bdso_simulator.protocols.registry import ObjectView
from bdso_simulator.schemas.scenario import OperationKind, ServerSelection

logger = logging.getLogger()


def choose_servers(rng: np.random.Generator, view: ObjectView, count: int) -> list[ProcessId]:
    """
    Choose distinct servers of an object to contact.

    :param rng: The client's random generator.
    :param view: View of the object.
    :param count: Number of servers wanted, capped at the number of servers of the object.
    :return: The chosen servers in order.
    """
    count = min(count, view.n)
    if view.selection == ServerSelection.FIXED_PREFIX:
        return view.servers[:count]
    picks = rng.choice(view.n, size=count, replace=False)
    return [view.servers[int(index)] for index in sorted(picks)]


def records_in_quorum(collected: list[list], f: int) -> set:
    """
    Records reported by at least f+1 of the collected replica snapshots, so by at least one correct server.

    :param collected: The snapshots returned by distinct servers.
    :param f: Maximum number of Byzantine servers.
    :return: The set of records appearing in at least f+1 snapshots.
    """
    counts = Counter(record for snapshot in collected for record in set(snapshot))
    return {record for record, count in counts.items() if count >= f + 1}


class PendingOperation(BaseModel):
    """
    Model for the operation a client session is waiting on.
    """

    op: OpRef
    kind: OperationKind
    targets: set[ProcessId]
    needed: int
    responses: dict[ProcessId, list] = {}
    acks: set[ProcessId] = set()


class QuorumSession:
    """
    Base class for the client side of one object for one client: a monotone operation counter and at most one pending
    operation that completes once enough distinct servers answered.
    """

    def __init__(self, client_id: ProcessId, view: ObjectView, rng: np.random.Generator) -> None:
        """
        Initialise the session.

        :param client_id: ID of the client (or of the server acting as a client).
        :param view: View of the object.
        :param rng: Random generator used to choose servers.
        """
        self.client_id = client_id
        self.view = view
        self.rng = rng
        self.c = 0
        self.pending: Optional[PendingOperation] = None

    @property
    def f(self) -> int:
        """Maximum number of Byzantine servers of the object."""
        return self.view.f

    def _start(self, kind: OperationKind, targets: list[ProcessId], needed: int) -> OpRef:
        if self.pending is not None:
            raise OperationInFlightError(f"Client '{self.client_id}' already has operation {self.pending.op} pending")
        self.c += 1
        op = OpRef(object_id=self.view.id, client=self.client_id, c=self.c)
        self.pending = PendingOperation(op=op, kind=kind, targets=set(targets), needed=needed)
        return op

    def _accepts(self, sender: ProcessId, c: int, responder: ProcessId, getting: bool) -> bool:
        pending = self.pending
        if pending is None or pending.op.c != c or (pending.kind == OperationKind.GET) != getting:
            logger.debug("Client '%s' dropping stale response %s from '%s'", self.client_id, c, sender)
            return False
        if responder != sender or sender not in pending.targets:
            logger.warning("Client '%s' dropping response from unexpected server '%s'", self.client_id, sender)
            return False
        return sender not in pending.responses and sender not in pending.acks

    def client_on_ack(self, sender: ProcessId, message: Ack) -> Optional[Respond]:
        """
        Handle an acknowledgement of the pending add, append or broadcast.

        :param sender: Authenticated sender of the acknowledgement.
        :param message: The acknowledgement.
        :return: The response completing the operation once enough distinct servers acknowledged, else `None`.
        """
        if not self._accepts(sender, message.c, message.i, getting=False):
            return None
        self.pending.acks.add(sender)
        if len(self.pending.acks) < self.pending.needed:
            return None
        op = self.pending.op
        self.pending = None
        return Respond(op=op, ack=True)

    def _collect(self, sender: ProcessId, c: int, responder: ProcessId, records: list) -> Optional[tuple[OpRef, list]]:
        if not self._accepts(sender, c, responder, getting=True):
            return None
        self.pending.responses[sender] = records
        if len(self.pending.responses) < self.pending.needed:
            return None
        op = self.pending.op
        collected = list(self.pending.responses.values())
        self.pending = None
        return op, collected

    def _get_targets(self) -> list[ProcessId]:
        return choose_servers(self.rng, self.view, 3 * self.f + 1)


def quorum_get_result(collected: list[list], f: int) -> list:
    """
    Result of a G-Set get: the records present in at least f+1 collected snapshots, in deterministic order.

    :param collected: The snapshots returned by 2f+1 distinct servers.
    :param f: Maximum number of Byzantine servers.
    :return: The sorted records.
    """
    return sorted_records(records_in_quorum(collected, f))
