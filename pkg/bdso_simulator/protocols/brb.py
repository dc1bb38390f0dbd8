"""
Module for Byzantine reliable broadcast among the servers of one object.

Echo/ready broadcast with instances keyed by (origin, content digest):

- an INIT from its origin is echoed once,
- ceil((n+f+1)/2) matching ECHOs or f+1 matching READYs trigger a single READY,
- 2f+1 matching READYs deliver the body exactly once.
"""

import logging
from typing import Optional

from pydantic import BaseModel

from bdso_simulator.auth.authenticator import content_digest
from bdso_simulator.core.consts import NOTE_BRB_BROADCAST, NOTE_BRB_DELIVER, NOTE_BRB_EQUIVOCATION
from bdso_simulator.core.process_id import ProcessId
from bdso_simulator.models.messages import Ack, BrbEcho, BrbInit, BrbReady, BroadcastRequest, WireMessage
from bdso_simulator.models.operation import OpRef
from bdso_simulator.protocols.base import Effects, Emit, Incoming, ProcessStateMachine, Send
from bdso_simulator.protocols.quorum import QuorumSession
from bdso_simulator.protocols.registry import ObjectView
from bdso_simulator.schemas.scenario import OperationKind

logger = logging.getLogger()

BRB_MESSAGE_TYPES = (BrbInit, BrbEcho, BrbReady)


def echo_threshold(n: int, f: int) -> int:
    """
    Number of matching ECHOs needed to send READY, i.e. ceil((n+f+1)/2).

    :param n: Number of servers.
    :param f: Maximum number of Byzantine servers.
    :return: The threshold.
    """
    return (n + f + 2) // 2


class BrbInstanceState(BaseModel):
    """
    Model for the progress of one broadcast instance at one server.
    """

    echoed: bool = False
    readied: bool = False
    delivered: bool = False
    echo_senders: set[ProcessId] = set()
    ready_senders: set[ProcessId] = set()
    payload: bytes = b""


class BrbDelivery(BaseModel):
    """
    Model for a body delivered by reliable broadcast.
    """

    origin: ProcessId
    digest: int
    body: bytes


class BrbInstanceTable:
    """
    Reliable broadcast endpoint of one server for one object, holding the state of every instance it has seen.
    """

    def __init__(
        self,
        object_id: str,
        self_id: ProcessId,
        servers: list[ProcessId],
        f: int,
        withhold_echo: bool = False,
        withhold_ready: bool = False,
    ) -> None:
        """
        Initialise the `BrbInstanceTable`.

        :param object_id: ID of the object whose servers form the broadcast group.
        :param self_id: ID of the owning server.
        :param servers: IDs of every server of the group, in order.
        :param f: Maximum number of Byzantine servers in the group.
        :param withhold_echo: Never send ECHOs (Byzantine behaviour).
        :param withhold_ready: Never send READYs (Byzantine behaviour).
        """
        self.object_id = object_id
        self.self_id = self_id
        self.servers = servers
        self.f = f
        self.withhold_echo = withhold_echo
        self.withhold_ready = withhold_ready
        self._members = set(servers)
        self._echo_threshold = echo_threshold(len(servers), f)
        self._instances: dict[tuple[ProcessId, int], BrbInstanceState] = {}
        self._slots: dict[tuple[ProcessId, str], int] = {}

    def instance(self, origin: ProcessId, digest: int) -> BrbInstanceState:
        """
        Get the state of an instance, creating it when first seen.

        :param origin: Broadcaster of the instance.
        :param digest: Content digest of the body.
        :return: The instance state.
        """
        key = (origin, digest)
        state = self._instances.get(key)
        if state is None:
            state = BrbInstanceState()
            self._instances[key] = state
        return state

    def brb_broadcast(self, body: bytes, slot: str) -> Effects:
        """
        Start a broadcast of `body` from the owning server.

        :param body: The body to broadcast.
        :param slot: The owner's label for this broadcast, used to report equivocation.
        :return: The INIT sends to every server, including the owner.
        """
        effects: Effects = [
            Emit(note=NOTE_BRB_BROADCAST, object_id=self.object_id, origin=self.self_id, digest=content_digest(body))
        ]
        effects.extend(self.init_sends(body, slot, self.servers))
        return effects

    def init_sends(self, body: bytes, slot: str, recipients: list[ProcessId]) -> Effects:
        """
        Build INIT sends for a body.

        :param body: The body to broadcast.
        :param slot: The owner's label for this broadcast.
        :param recipients: The servers to send the INIT to.
        :return: The sends.
        """
        message = BrbInit(object_id=self.object_id, origin=self.self_id, slot=slot, body=body)
        return [Send.model_construct(to=server, message=message) for server in recipients]

    def brb_on_message(self, sender: ProcessId, message: WireMessage) -> tuple[Effects, list[BrbDelivery]]:
        """
        Handle an INIT, ECHO or READY message.

        :param sender: Authenticated sender of the message.
        :param message: The message.
        :return: The effects to apply and the bodies delivered by this message.
        """
        if sender not in self._members:
            logger.warning("Ignoring broadcast message from '%s' outside the group of '%s'", sender, self.object_id)
            return [], []

        if isinstance(message, BrbInit):
            return self._on_init(sender, message), []

        digest = content_digest(message.body)
        if digest != message.digest:
            logger.warning("Ignoring broadcast message from '%s' whose digest does not match its body", sender)
            return [], []

        state = self.instance(message.origin, digest)
        if not state.payload:
            state.payload = message.body

        if isinstance(message, BrbEcho):
            if sender in state.echo_senders:
                return [], []
            state.echo_senders.add(sender)
            if len(state.echo_senders) >= self._echo_threshold:
                return self._ready(message.origin, digest, state), []
            return [], []

        if sender in state.ready_senders:
            return [], []
        state.ready_senders.add(sender)
        effects: Effects = []
        if len(state.ready_senders) >= self.f + 1:
            effects.extend(self._ready(message.origin, digest, state))
        if len(state.ready_senders) >= 2 * self.f + 1 and not state.delivered:
            state.delivered = True
            effects.append(
                Emit(note=NOTE_BRB_DELIVER, object_id=self.object_id, origin=message.origin, digest=digest)
            )
            return effects, [BrbDelivery(origin=message.origin, digest=digest, body=state.payload)]
        return effects, []

    def _on_init(self, sender: ProcessId, message: BrbInit) -> Effects:
        if sender != message.origin:
            logger.warning("Ignoring INIT relayed by '%s' on behalf of '%s'", sender, message.origin)
            return []

        digest = content_digest(message.body)
        effects: Effects = []
        previous = self._slots.setdefault((message.origin, message.slot), digest)
        if previous != digest:
            logger.warning("Origin '%s' broadcast two bodies for slot '%s'", message.origin, message.slot)
            effects.append(
                Emit(
                    note=NOTE_BRB_EQUIVOCATION, object_id=self.object_id, origin=message.origin, digest=digest
                )
            )

        state = self.instance(message.origin, digest)
        if not state.payload:
            state.payload = message.body
        if state.echoed:
            return effects
        state.echoed = True
        if not self.withhold_echo:
            echo = BrbEcho(object_id=self.object_id, origin=message.origin, digest=digest, body=message.body)
            effects.extend(Send.model_construct(to=server, message=echo) for server in self.servers)
        return effects

    def _ready(self, origin: ProcessId, digest: int, state: BrbInstanceState) -> Effects:
        if state.readied:
            return []
        state.readied = True
        if self.withhold_ready:
            return []
        ready = BrbReady(object_id=self.object_id, origin=origin, digest=digest, body=state.payload)
        return [Send.model_construct(to=server, message=ready) for server in self.servers]


class BrbServer(ProcessStateMachine):
    """
    Server of a broadcast-only object: reliably broadcasts bodies on behalf of clients.
    """

    def __init__(self, process_id: ProcessId, view: ObjectView) -> None:
        """
        Initialise the `BrbServer`.

        :param process_id: ID of the server.
        :param view: View of the broadcast object.
        """
        super().__init__(process_id)
        self.view = view
        self.brb = BrbInstanceTable(view.id, process_id, view.servers, view.f)

    def on_message(self, incoming: Incoming) -> Effects:
        message = incoming.message
        if isinstance(message, BroadcastRequest):
            if message.p != incoming.sender:
                logger.warning("Ignoring broadcast request for '%s' sent by '%s'", message.p, incoming.sender)
                return []
            effects = self.brb.brb_broadcast(message.body, slot=f"{message.p}:{message.c}")
            effects.append(Send(to=message.p, message=Ack(object_id=self.view.id, c=message.c, i=self.process_id)))
            return effects
        if isinstance(message, BRB_MESSAGE_TYPES):
            effects, _ = self.brb.brb_on_message(incoming.sender, message)
            return effects
        logger.warning("Server '%s' ignoring unexpected '%s' message", self.process_id, message.type)
        return []


class BrbClientSession(QuorumSession):
    """
    Client side of a broadcast-only object: asks one server to broadcast a body and waits for its acknowledgement.
    """

    def client_broadcast(self, body: bytes, via: Optional[ProcessId] = None) -> tuple[OpRef, Effects]:
        """
        Start a broadcast.

        :param body: The body to broadcast.
        :param via: The server asked to broadcast, defaults to the first server of the object.
        :raises OperationInFlightError: If an operation is already pending.
        :return: The operation reference and the request send.
        """
        server = via or self.view.servers[0]
        op = self._start(OperationKind.BROADCAST, [server], needed=1)
        message = BroadcastRequest(object_id=self.view.id, c=op.c, p=self.client_id, body=body)
        return op, [Send(to=server, message=message)]
