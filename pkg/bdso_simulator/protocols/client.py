"""
Module for the correct client process, which drives one session per object it uses.
"""

import logging

import numpy as np
from pydantic import ValidationError

from bdso_simulator.core.exceptions import MalformedOperationError, ProtocolError
from bdso_simulator.core.process_id import ProcessId
from bdso_simulator.models.messages import Ack, GetResponse, LedgerGetResponse, Notify
from bdso_simulator.models.record import Record
from bdso_simulator.protocols.atomic import NotificationTracker, client_atomic_adds, client_atomic_appends
from bdso_simulator.protocols.base import Effects, Incoming, Invoke, ProcessStateMachine
from bdso_simulator.protocols.bdso import BdsoClientSession
from bdso_simulator.protocols.brb import BrbClientSession
from bdso_simulator.protocols.quorum import QuorumSession
from bdso_simulator.protocols.registry import ObjectRegistry, ObjectView
from bdso_simulator.protocols.swbdlo import SwClientSession
from bdso_simulator.schemas.scenario import ObjectKind, OperationKind, WorkloadOperation

logger = logging.getLogger()

SESSION_CLASSES: dict[ObjectKind, type[QuorumSession]] = {
    ObjectKind.BRB: BrbClientSession,
    ObjectKind.BDSO: BdsoClientSession,
    ObjectKind.SBDSO: BdsoClientSession,
    ObjectKind.SWBDLO: SwClientSession,
}


class ClientMachine(ProcessStateMachine):
    """
    A correct client. It has at most one operation in flight across every object it uses.
    """

    def __init__(self, process_id: ProcessId, registry: ObjectRegistry, rng: np.random.Generator) -> None:
        """
        Initialise the `ClientMachine`.

        :param process_id: ID of the client.
        :param registry: Registry of the objects of the scenario.
        :param rng: The client's random generator.
        """
        super().__init__(process_id)
        self.registry = registry
        self.rng = rng
        self.sessions: dict[str, QuorumSession] = {}
        self.trackers: dict[str, NotificationTracker] = {}

    def session(self, view: ObjectView) -> QuorumSession:
        """
        Get the session of an object, creating it on first use.

        :param view: View of the object.
        :raises ProtocolError: If clients cannot use objects of this kind.
        :return: The session.
        """
        session = self.sessions.get(view.id)
        if session is None:
            session_class = SESSION_CLASSES.get(view.kind)
            if session_class is None:
                raise ProtocolError(f"Clients cannot invoke operations on '{view.id}' of kind '{view.kind}'")
            session = session_class(self.process_id, view, self.rng)
            self.sessions[view.id] = session
        return session

    @property
    def busy(self) -> bool:
        """Whether an operation is in flight."""
        return any(session.pending is not None for session in self.sessions.values())

    def invoke(self, operation: WorkloadOperation) -> Effects:
        view = self.registry.resolve(operation.object)
        session = self.session(view)
        if self.busy:
            raise ProtocolError(f"Client '{self.process_id}' invoked {operation.op} with an operation in flight")
        try:
            op, invocation, sends = self._start(view, session, operation)
        except ValidationError as exc:
            raise MalformedOperationError(
                f"Client '{self.process_id}' cannot invoke {operation.op} on '{view.id}': {exc}"
            ) from exc
        logger.debug("Client '%s' invoked %s", self.process_id, op)
        return [invocation, *sends]

    def _start(self, view: ObjectView, session: QuorumSession, operation: WorkloadOperation) -> tuple:
        match operation.op:
            case OperationKind.GET:
                op, sends = session.client_get()
                invocation = Invoke(op=op, operation=operation.op)
            case OperationKind.ADD:
                record = Record(creator=self.process_id, payload=operation.payload_bytes)
                op, sends = session.client_add(record)
                invocation = Invoke(op=op, operation=operation.op, record=record)
            case OperationKind.APPEND:
                op, indexed_record, sends = session.sw_append(operation.payload_bytes)
                invocation = Invoke(op=op, operation=operation.op, indexed_record=indexed_record)
            case OperationKind.ATOMIC_APPENDS | OperationKind.ATOMIC_ADDS:
                request = operation.atomic_request()
                start = client_atomic_appends if operation.op == OperationKind.ATOMIC_APPENDS else client_atomic_adds
                op, sends = start(session, request)
                self.tracker(view).expect(request)
                invocation = Invoke(op=op, operation=operation.op, record=request.to_record(), request=request)
            case OperationKind.BROADCAST:
                op, sends = session.client_broadcast(operation.payload_bytes, operation.via)
                invocation = Invoke(op=op, operation=operation.op, payload=operation.payload_bytes)
            case _:
                raise ProtocolError(f"Unsupported operation '{operation.op}'")
        return op, invocation, sends

    def tracker(self, view: ObjectView) -> NotificationTracker:
        """
        Get the notification tracker of a smart G-Set, creating it on first use.

        :param view: View of the smart G-Set.
        :return: The tracker.
        """
        tracker = self.trackers.get(view.id)
        if tracker is None:
            tracker = NotificationTracker(self.process_id, view)
            self.trackers[view.id] = tracker
        return tracker

    def on_message(self, incoming: Incoming) -> Effects:
        message = incoming.message
        if isinstance(message, Notify):
            tracker = self.trackers.get(message.object_id)
            return tracker.on_notify(incoming.sender, message) if tracker is not None else []

        session = self.sessions.get(message.object_id)
        if session is None:
            logger.warning("Client '%s' ignoring message about unused object '%s'", self.process_id, message.object_id)
            return []
        if isinstance(message, Ack):
            response = session.client_on_ack(incoming.sender, message)
        elif (isinstance(message, GetResponse) and isinstance(session, BdsoClientSession)) or (
            isinstance(message, LedgerGetResponse) and isinstance(session, SwClientSession)
        ):
            response = session.client_on_get_response(incoming.sender, message)
        else:
            logger.warning("Client '%s' ignoring unexpected '%s' message", self.process_id, message.type)
            return []
        return [response] if response is not None else []
