"""
Module for atomic appends and adds across two objects, coordinated by a smart G-Set.

Each client of a pair adds an `AtomicRequestRecord` naming its own record, its target and its partner's record to the
smart G-Set. A smart G-Set server that holds both mirrored requests acts as a client of the two targets and appends or
adds both records, then notifies the two clients. Targets run in restricted mode so that a record is only admitted once
f+1 distinct smart G-Set servers asked for it.
"""

import logging
from collections import deque
from typing import Optional

import numpy as np

from bdso_simulator.core.consts import (
    NOTE_ATOMIC_COMPLETED,
    NOTE_DISPATCH,
    NOTE_INSERT,
    NOTE_NOTIFY_SENT,
    NOTE_TARGET_UNKNOWN,
    NOTE_UNAUTHORIZED_CLIENT,
)
from bdso_simulator.core.exceptions import TargetUnknownError, UnauthorizedClientError
from bdso_simulator.core.process_id import ProcessId, sorted_ids
from bdso_simulator.models.messages import Ack, AppendRequest, Notify
from bdso_simulator.models.operation import OpRef
from bdso_simulator.models.record import AtomicRequestRecord, Record, pair_id
from bdso_simulator.protocols.admission import AdmissionFilter
from bdso_simulator.protocols.base import (
    Effects,
    Emit,
    Incoming,
    Invoke,
    ProcessStateMachine,
    ReplicaSnapshot,
    Send,
    Verifier,
)
from bdso_simulator.protocols.bdso import BdsoClientSession, BdsoServer
from bdso_simulator.protocols.quorum import QuorumSession
from bdso_simulator.protocols.registry import ObjectRegistry, ObjectView
from bdso_simulator.schemas.scenario import AdmissionMode, ObjectKind, OperationKind

logger = logging.getLogger()


def client_atomic_appends(session: BdsoClientSession, request: AtomicRequestRecord) -> tuple[OpRef, Effects]:
    """
    Ask the smart G-Set to append the requester's record to a ledger once the partner asked for the mirrored pair.

    :param session: The requester's session with the smart G-Set.
    :param request: The request, naming a ledger target.
    :raises OperationInFlightError: If the session already has an operation pending.
    :return: The operation reference and the ADD sends of the request record.
    """
    return session.client_add(request.to_record())


def client_atomic_adds(session: BdsoClientSession, request: AtomicRequestRecord) -> tuple[OpRef, Effects]:
    """
    Ask the smart G-Set to add the requester's record to a G-Set once the partner asked for the mirrored pair.

    :param session: The requester's session with the smart G-Set.
    :param request: The request, naming a G-Set target.
    :raises OperationInFlightError: If the session already has an operation pending.
    :return: The operation reference and the ADD sends of the request record.
    """
    return session.client_add(request.to_record())


class NotificationTracker:
    """
    Tracks the notifications a client receives for its atomic requests on one smart G-Set.
    """

    def __init__(self, client_id: ProcessId, view: ObjectView) -> None:
        """
        Initialise the `NotificationTracker`.

        :param client_id: ID of the client.
        :param view: View of the smart G-Set.
        """
        self.client_id = client_id
        self.view = view
        self._requests: dict[str, AtomicRequestRecord] = {}
        self._notifiers: dict[str, set[ProcessId]] = {}
        self.completed: set[str] = set()

    def expect(self, request: AtomicRequestRecord) -> None:
        """
        Start waiting for the notifications of a request.

        :param request: The request the client added.
        """
        key = f"{request.digest:016x}"
        self._requests.setdefault(key, request)
        self._notifiers.setdefault(key, set())

    def on_notify(self, sender: ProcessId, message: Notify) -> Effects:
        """
        Count a notification and mark the atomic operation completed once f+1 distinct servers notified.

        :param sender: Authenticated sender of the notification.
        :param message: The notification.
        :return: A completion emit the first time the threshold is reached, else nothing.
        """
        if sender != message.server_id or sender not in self.view.servers:
            logger.warning("Client '%s' ignoring notification from '%s'", self.client_id, sender)
            return []
        effects: Effects = []
        for key in message.pair_id.split("-"):
            if key not in self._requests or key in self.completed:
                continue
            notifiers = self._notifiers[key]
            notifiers.add(sender)
            if len(notifiers) >= self.view.f + 1:
                self.completed.add(key)
                request = self._requests[key]
                logger.debug("Client '%s' completed atomic pair %s", self.client_id, message.pair_id)
                effects.append(
                    Emit(
                        note=NOTE_ATOMIC_COMPLETED,
                        object_id=self.view.id,
                        pair_id=message.pair_id,
                        record=request.own_record,
                        peer=request.partner,
                    )
                )
        return effects


class LedgerStubClientSession(QuorumSession):
    """
    Client side of the sequential ledger stub, used by smart G-Set servers.
    """

    def stub_append(self, record: Record) -> tuple[OpRef, Effects]:
        """
        Start an append of a record to every server of the stub.

        :param record: The record to append.
        :raises OperationInFlightError: If an operation is already pending.
        :return: The operation reference and the APPEND sends.
        """
        targets = list(self.view.servers)
        op = self._start(OperationKind.APPEND, targets, needed=self.f + 1)
        message = AppendRequest(object_id=self.view.id, c=op.c, p=self.client_id, record=record)
        return op, [Send(to=server, message=message) for server in targets]


class TargetProxy:
    """
    Client role of a smart G-Set server toward one target object. Operations are queued and issued one at a time.
    """

    def __init__(self, owner: ProcessId, view: ObjectView, rng: np.random.Generator) -> None:
        """
        Initialise the `TargetProxy`.

        :param owner: ID of the smart G-Set server acting as a client.
        :param view: View of the target object.
        :param rng: The owner's random generator.
        """
        self.view = view
        if view.kind == ObjectKind.LEDGER_STUB:
            self.session: QuorumSession = LedgerStubClientSession(owner, view, rng)
        else:
            self.session = BdsoClientSession(owner, view, rng)
        self._queue: deque[tuple[str, Record]] = deque()
        self._in_flight: Optional[tuple[str, Record]] = None

    def submit(self, matched_pair: str, record: Record) -> Effects:
        """
        Queue an operation on the target.

        :param matched_pair: Identity of the pair the record belongs to.
        :param record: The record to append or add.
        :return: The effects of issuing the operation if the proxy was idle.
        """
        self._queue.append((matched_pair, record))
        return self._pump()

    def on_ack(self, sender: ProcessId, message: Ack) -> tuple[Effects, Optional[tuple[str, Record]]]:
        """
        Handle an acknowledgement from a target server.

        :param sender: Authenticated sender.
        :param message: The acknowledgement.
        :return: The effects to apply and, when the operation in flight completed, its pair and record.
        """
        response = self.session.client_on_ack(sender, message)
        if response is None:
            return [], None
        completed = self._in_flight
        self._in_flight = None
        effects: Effects = [response]
        effects.extend(self._pump())
        return effects, completed

    def _pump(self) -> Effects:
        if self._in_flight is not None or not self._queue:
            return []
        self._in_flight = self._queue.popleft()
        record = self._in_flight[1]
        if isinstance(self.session, LedgerStubClientSession):
            op, sends = self.session.stub_append(record)
            effects: Effects = [Invoke(op=op, operation=OperationKind.APPEND, record=record)]
        else:
            op, sends = self.session.client_add(record, on_behalf=True)
            effects = [Invoke(op=op, operation=OperationKind.ADD, record=record)]
        effects.extend(sends)
        return effects


class SbdsoServer(BdsoServer):
    """
    Server of a smart G-Set: a G-Set server that only accepts records from their creator and dispatches matched atomic
    requests to their targets.
    """

    def __init__(
        self,
        process_id: ProcessId,
        view: ObjectView,
        verifier: Verifier,
        registry: ObjectRegistry,
        rng: np.random.Generator,
    ) -> None:
        """
        Initialise the `SbdsoServer`.

        :param process_id: ID of the server.
        :param view: View of the smart G-Set.
        :param verifier: Function verifying an `AuthTag` over a payload.
        :param registry: Registry resolving target object ids.
        :param rng: Random generator used by the target proxies.
        """
        super().__init__(process_id, view, verifier, creator_only=True)
        self.registry = registry
        self.rng = rng
        self.proxies: dict[str, TargetProxy] = {}
        self.dispatched: set[str] = set()
        self.notify_targets: dict[str, list[ProcessId]] = {}
        self._requests_by_match: dict[tuple, list[AtomicRequestRecord]] = {}
        self._remaining: dict[str, set[tuple[str, Record]]] = {}

    def after_insert(self, record: Record) -> Effects:
        return self.sbdso_on_insert(record)

    def sbdso_on_insert(self, record: Record) -> Effects:
        """
        Look for the mirror of a freshly inserted atomic request and dispatch the pair if it is found.

        :param record: The record just inserted into the replica.
        :return: The dispatch effects, if any.
        """
        request = AtomicRequestRecord.from_record(record)
        if request is None:
            return []
        bucket = self._requests_by_match.setdefault(request.match_key, [])
        if request in bucket:
            return []
        effects: Effects = []
        for other in bucket:
            if request.mirrors(other):
                effects.extend(self._dispatch(request, other))
        bucket.append(request)
        return effects

    def _dispatch(self, request: AtomicRequestRecord, mirror: AtomicRequestRecord) -> Effects:
        matched_pair = pair_id(request, mirror)
        if matched_pair in self.dispatched:
            return []
        self.dispatched.add(matched_pair)
        try:
            halves = [(self._target(half.target), half.own_record) for half in (request, mirror)]
        except TargetUnknownError as exc:
            logger.warning("Server '%s' cannot dispatch pair %s: %s", self.process_id, matched_pair, exc)
            return [Emit(note=NOTE_TARGET_UNKNOWN, object_id=self.view.id, pair_id=matched_pair)]

        logger.debug("Server '%s' dispatching pair %s", self.process_id, matched_pair)
        self.notify_targets[matched_pair] = sorted_ids(request.group)
        self._remaining[matched_pair] = {(view.id, record) for view, record in halves}
        effects: Effects = [Emit(note=NOTE_DISPATCH, object_id=self.view.id, pair_id=matched_pair)]
        for view, record in halves:
            effects.extend(self._proxy(view).submit(matched_pair, record))
        return effects

    def _target(self, object_id: str) -> ObjectView:
        view = self.registry.resolve(object_id)
        if view.kind not in (ObjectKind.BDSO, ObjectKind.LEDGER_STUB):
            raise TargetUnknownError(f"Object '{object_id}' of kind '{view.kind}' cannot be an atomic target")
        return view

    def _proxy(self, view: ObjectView) -> TargetProxy:
        proxy = self.proxies.get(view.id)
        if proxy is None:
            proxy = TargetProxy(self.process_id, view, self.rng)
            self.proxies[view.id] = proxy
        return proxy

    def on_foreign_message(self, incoming: Incoming) -> Effects:
        message = incoming.message
        proxy = self.proxies.get(message.object_id)
        if proxy is None or not isinstance(message, Ack):
            return super().on_foreign_message(incoming)

        effects, completed = proxy.on_ack(incoming.sender, message)
        if completed is None:
            return effects
        matched_pair, record = completed
        remaining = self._remaining[matched_pair]
        remaining.discard((message.object_id, record))
        if not remaining:
            notify = Notify(object_id=self.view.id, pair_id=matched_pair, server_id=self.process_id)
            effects.extend(Send(to=client, message=notify) for client in self.notify_targets[matched_pair])
            effects.append(Emit(note=NOTE_NOTIFY_SENT, object_id=self.view.id, pair_id=matched_pair))
        return effects


class LedgerStubServer(ProcessStateMachine):
    """
    Server of the sequential ledger stub used as an atomic append target.
    """

    def __init__(self, process_id: ProcessId, view: ObjectView) -> None:
        super().__init__(process_id)
        self.view = view
        self.admission = (
            AdmissionFilter(view.authorized, view.admission_f) if view.mode == AdmissionMode.RESTRICTED else None
        )
        self.records: list[Record] = []
        self._present: set[Record] = set()
        self.pending_acks: dict[Record, list[tuple[ProcessId, int]]] = {}

    def on_message(self, incoming: Incoming) -> Effects:
        message = incoming.message
        if not isinstance(message, AppendRequest) or message.object_id != self.view.id:
            logger.warning("Ledger stub '%s' ignoring unexpected '%s' message", self.process_id, message.type)
            return []
        if message.p != incoming.sender:
            logger.warning(
                "Ledger stub '%s' ignoring append for '%s' sent by '%s'", self.process_id, message.p, incoming.sender
            )
            return []
        return self.target_admission(message)

    def target_admission(self, message: AppendRequest) -> Effects:
        """
        Handle an append, admitting the record only once enough registered clients requested it.

        :param message: The authenticated append request.
        :return: The effects to apply.
        """
        admitted = True
        if self.admission is not None:
            try:
                admitted = self.admission.target_admission(message.p, message.record)
            except UnauthorizedClientError as exc:
                logger.warning("Ledger stub '%s' rejecting append: %s", self.process_id, exc)
                return [Emit(note=NOTE_UNAUTHORIZED_CLIENT, object_id=self.view.id, peer=message.p)]

        ack = Send(to=message.p, message=Ack(object_id=self.view.id, c=message.c, i=self.process_id))
        if message.record in self._present:
            return [ack]
        self.pending_acks.setdefault(message.record, []).append((message.p, message.c))
        if not admitted:
            return []

        self.records.append(message.record)
        self._present.add(message.record)
        effects: Effects = [Emit(note=NOTE_INSERT, object_id=self.view.id, record=message.record)]
        effects.extend(
            Send(to=client, message=Ack(object_id=self.view.id, c=c, i=self.process_id))
            for client, c in self.pending_acks.pop(message.record)
        )
        return effects

    def snapshots(self) -> list[ReplicaSnapshot]:
        return [ReplicaSnapshot(object_id=self.view.id, records=list(self.records))]

