"""
Module for the library of Byzantine behaviours.

Each behaviour is a mixin composed in front of the correct machine it replaces, so it only overrides the handlers it
misbehaves in and defers to the correct logic everywhere else. Adversaries draw every random choice from their own
seeded generator and can only sign as themselves.
"""

# pylint: disable=no-member

import logging
from functools import cache
from typing import Any

import numpy as np

from bdso_simulator.auth.authenticator import Signer
from bdso_simulator.core.exceptions import KindRoleMismatchError
from bdso_simulator.core.process_id import ProcessId, Role, sorted_ids
from bdso_simulator.models.envelope import AuthTag
from bdso_simulator.models.messages import (
    AddRequest,
    LedgerAddRequest,
    Propagate,
    WireMessage,
    encode_message,
)
from bdso_simulator.models.operation import OpRef
from bdso_simulator.models.record import IndexedRecord, Record, sorted_records
from bdso_simulator.protocols.atomic import LedgerStubServer
from bdso_simulator.protocols.base import Effects, ForgedSend, Incoming, Invoke, Respond, Send
from bdso_simulator.protocols.brb import BrbServer
from bdso_simulator.protocols.client import ClientMachine
from bdso_simulator.protocols.replica import ReplicaServer
from bdso_simulator.protocols.swbdlo import SwServer
from bdso_simulator.schemas.scenario import AdversaryAssignment, AdversaryKind, ObjectKind, OperationKind

logger = logging.getLogger()


class AdversaryMixin:
    """
    Base class for Byzantine behaviours.
    """

    kind: AdversaryKind
    # Correct machine classes the behaviour can replace
    hosts: tuple[type, ...] = (ReplicaServer, BrbServer, LedgerStubServer, ClientMachine)

    params: dict[str, Any]
    adversary_rng: np.random.Generator
    signer: Signer

    @classmethod
    def applicable(cls, honest_cls: type, honest_kwargs: dict) -> bool:  # pylint: disable=unused-argument
        """
        Decide whether the behaviour can replace a correct machine.

        :param honest_cls: Class of the correct machine.
        :param honest_kwargs: Arguments the correct machine is built with.
        :return: Whether the behaviour fits.
        """
        return issubclass(honest_cls, cls.hosts)

    def configure(self, params: dict[str, Any], rng: np.random.Generator, signer: Signer) -> None:
        """
        Hand the behaviour its parameters, its random generator and its own signing handle.

        :param params: Kind specific parameters from the scenario.
        :param rng: The adversary's random generator.
        :param signer: Handle signing as the adversary itself.
        """
        self.params = params
        self.adversary_rng = rng
        self.signer = signer


def fabricated_request(machine: ReplicaServer, c: int, label: str) -> WireMessage:
    """
    Build an add request that no client ever issued, claiming the adversary itself as requester.

    :param machine: The Byzantine server.
    :param c: Operation counter of the fabricated request.
    :param label: Text mixed into the payload.
    :return: The request, shaped for the server's object kind.
    """
    payload = f"{label}:{machine.process_id}:{c}".encode()
    if machine.view.kind == ObjectKind.SWBDLO:
        return LedgerAddRequest(
            object_id=machine.view.id, c=c, w=machine.process_id, record=IndexedRecord(k=c, rho=payload)
        )
    return AddRequest(
        object_id=machine.view.id, c=c, p=machine.process_id, record=Record(creator=machine.process_id, payload=payload)
    )


def signed_propagate(machine: ReplicaServer, request: WireMessage) -> bytes:
    """
    Wrap a request signed by the adversary into a PROPAGATE body.

    :param machine: The Byzantine server.
    :param request: The request to relay.
    :return: The encoded PROPAGATE.
    """
    raw = encode_message(request)
    propagate = Propagate(
        object_id=machine.view.id, origin=machine.process_id, request=raw, request_tag=machine.signer.sign(raw)
    )
    return encode_message(propagate)


class CrashSilent(AdversaryMixin):
    """
    Stops doing anything after handling `after_messages` messages, by default from the start. A crashed client still
    records its invocation but never sends the request.
    """

    kind = AdversaryKind.CRASH_SILENT

    @property
    def crashed(self) -> bool:
        """Whether the process has crashed."""
        return getattr(self, "_handled", 0) >= self.params.get("after_messages", 0)

    def on_start(self) -> Effects:
        return [] if self.crashed else super().on_start()

    def on_message(self, incoming: Incoming) -> Effects:
        if self.crashed:
            return []
        self._handled = getattr(self, "_handled", 0) + 1  # pylint: disable=attribute-defined-outside-init
        return super().on_message(incoming)

    def invoke(self, operation) -> Effects:
        effects = super().invoke(operation)
        return effects[:1] if self.crashed else effects


class StaleResponder(AdversaryMixin):
    """
    Answers gets with the replica as it was once it first held `stale_after` records, by default the empty replica.
    """

    kind = AdversaryKind.STALE_RESPONDER
    hosts = (ReplicaServer,)

    def configure(self, params: dict[str, Any], rng: np.random.Generator, signer: Signer) -> None:
        super().configure(params, rng, signer)
        self._frozen = None  # pylint: disable=attribute-defined-outside-init
        self._freeze()

    def insert(self, record) -> Effects:
        effects = super().insert(record)
        self._freeze()
        return effects

    def get_snapshot(self) -> list:
        return self._frozen if self._frozen is not None else super().get_snapshot()

    def _freeze(self) -> None:
        if self._frozen is None and len(self.replica) >= self.params.get("stale_after", 0):
            self._frozen = super().get_snapshot()  # pylint: disable=attribute-defined-outside-init


class SpuriousSet(AdversaryMixin):
    """
    Answers gets with its replica plus `count` fabricated records attributed to `creator`.
    """

    kind = AdversaryKind.SPURIOUS_SET
    hosts = (ReplicaServer,)

    def get_snapshot(self) -> list:
        count = self.params.get("count", 1)
        creator = ProcessId(self.params.get("creator", "C0"))
        if isinstance(self, SwServer):
            fabricated = [
                IndexedRecord(k=index + 1, rho=f"spurious:{self.process_id}:{index}".encode()) for index in range(count)
            ]
        else:
            fabricated = [
                Record(creator=creator, payload=f"spurious:{self.process_id}:{index}".encode())
                for index in range(count)
            ]
        return sorted_records(set(super().get_snapshot()) | set(fabricated))


class EquivocatingBrbOrigin(AdversaryMixin):
    """
    On start, reliably broadcasts two different bodies under the same slot, one to each half of the servers.
    """

    kind = AdversaryKind.EQUIVOCATING_BRB_ORIGIN
    hosts = (ReplicaServer, BrbServer)

    def on_start(self) -> Effects:
        effects = super().on_start()
        if isinstance(self, ReplicaServer):
            first = signed_propagate(self, fabricated_request(self, 1, "equivocate-a"))
            second = signed_propagate(self, fabricated_request(self, 1, "equivocate-b"))
        else:
            first = self.params.get("a", "a").encode()
            second = self.params.get("b", "b").encode()
        servers = sorted_ids(self.view.servers)
        half = len(servers) // 2
        slot = f"equivocate:{self.process_id}"
        effects.extend(self.brb.init_sends(first, slot, servers[:half]))
        effects.extend(self.brb.init_sends(second, slot, servers[half:]))
        logger.debug("Server '%s' equivocating across %d servers", self.process_id, len(servers))
        return effects


class SpuriousPropagator(AdversaryMixin):
    """
    On start, reliably broadcasts PROPAGATEs for `count` adds no client requested. With `relay_all` it also propagates
    every add it receives, ignoring the guards that stop correct servers from propagating twice for an index.
    """

    kind = AdversaryKind.SPURIOUS_PROPAGATOR
    hosts = (ReplicaServer,)

    def on_start(self) -> Effects:
        effects = super().on_start()
        for c in range(1, self.params.get("count", 1) + 1):
            body = signed_propagate(self, fabricated_request(self, c, "spurious"))
            effects.extend(self.brb.brb_broadcast(body, slot=f"spurious:{self.process_id}:{c}"))
        return effects

    def on_add(self, incoming: Incoming) -> Effects:
        if not self.params.get("relay_all", False):
            return super().on_add(incoming)
        message = incoming.message
        requester = self.requester_of(message)
        if requester != incoming.sender:
            return []
        self.defer_ack(message.record, requester, message.c)
        return self.propagate(incoming, (message.c, requester, message.record))


class IndexEquivocatingWriter(AdversaryMixin):
    """
    Writer of a single-writer ledger that sends each append with its payload to one half of the servers and with a
    different payload for the same index to the other half. `colluders` receive both versions. The append responds
    immediately.
    """

    kind = AdversaryKind.INDEX_EQUIVOCATING_WRITER
    hosts = (ClientMachine,)

    @classmethod
    def applicable(cls, honest_cls: type, honest_kwargs: dict) -> bool:
        if not super().applicable(honest_cls, honest_kwargs):
            return False
        process_id = honest_kwargs["process_id"]
        return any(view.writer == process_id for view in honest_kwargs["registry"].views())

    def invoke(self, operation) -> Effects:
        if operation.op != OperationKind.APPEND:
            return super().invoke(operation)
        view = self.registry.resolve(operation.object)
        session = self.session(view)
        session.c += 1
        session.k += 1
        op = OpRef(object_id=view.id, client=self.process_id, c=session.c)
        first = IndexedRecord(k=session.k, rho=operation.payload_bytes)
        second = IndexedRecord(k=session.k, rho=operation.payload_bytes + b"'")

        colluders = {ProcessId(server) for server in self.params.get("colluders", [])}
        correct = [server for server in sorted_ids(view.servers) if server not in colluders]
        half = len(correct) // 2
        effects: Effects = [Invoke(op=op, operation=OperationKind.APPEND, indexed_record=first)]
        for record, recipients in ((first, correct[:half]), (second, correct[half:])):
            message = LedgerAddRequest(object_id=view.id, c=session.c, w=self.process_id, record=record)
            effects.extend(Send(to=server, message=message) for server in [*recipients, *sorted_ids(colluders)])
        effects.append(Respond(op=op, ack=True))
        return effects


class SilentAtomicPartner(AdversaryMixin):
    """
    Records its atomic operations but never adds the request. With `issue_then_crash` it adds the request and then
    stops handling messages.
    """

    kind = AdversaryKind.SILENT_ATOMIC_PARTNER
    hosts = (ClientMachine,)

    def invoke(self, operation) -> Effects:
        effects = super().invoke(operation)
        if operation.op not in (OperationKind.ATOMIC_APPENDS, OperationKind.ATOMIC_ADDS):
            return effects
        if self.params.get("issue_then_crash", False):
            self._crashed = True  # pylint: disable=attribute-defined-outside-init
            return effects
        return effects[:1]

    def on_message(self, incoming: Incoming) -> Effects:
        if getattr(self, "_crashed", False):
            return []
        return super().on_message(incoming)


class ForgeAttempter(AdversaryMixin):
    """
    On start, sends requests claiming to come from `victim`, once with a made up tag and once with a tag the adversary
    signed itself. With `silent` (the default) it otherwise ignores every message.
    """

    kind = AdversaryKind.FORGE_ATTEMPTER

    def on_start(self) -> Effects:
        effects = super().on_start()
        view = getattr(self, "view", None) or self.registry.views()[0]
        victim = self._victim(view)
        for index in range(self.params.get("count", 1)):
            record = Record(creator=victim, payload=f"forged:{self.process_id}:{index}".encode())
            payload = encode_message(AddRequest(object_id=view.id, c=index + 1, p=victim, record=record))
            made_up = AuthTag(signer=victim, digest=int(self.adversary_rng.integers(0, 2**62)))
            own = self.signer.sign(payload)
            for server in view.servers:
                if server == self.process_id:
                    continue
                effects.append(ForgedSend(to=server, claimed_sender=victim, payload=payload, tag=made_up))
                effects.append(ForgedSend(to=server, claimed_sender=victim, payload=payload, tag=own))
        return effects

    def _victim(self, view) -> ProcessId:
        victim = self.params.get("victim")
        if victim is not None:
            return ProcessId(victim)
        if self.process_id.role == Role.SERVER:
            return ProcessId.of(Role.CLIENT, 0)
        return view.servers[0]

    def on_message(self, incoming: Incoming) -> Effects:
        if self.params.get("silent", True):
            return []
        return super().on_message(incoming)


ADVERSARIES: dict[AdversaryKind, type[AdversaryMixin]] = {
    mixin.kind: mixin
    for mixin in (
        CrashSilent,
        StaleResponder,
        SpuriousSet,
        EquivocatingBrbOrigin,
        SpuriousPropagator,
        IndexEquivocatingWriter,
        SilentAtomicPartner,
        ForgeAttempter,
    )
}


@cache
def compose(mixin: type[AdversaryMixin], honest_cls: type) -> type:
    """
    Build the class placing a Byzantine behaviour in front of a correct machine class.

    :param mixin: The behaviour.
    :param honest_cls: The correct machine class.
    :return: The composed class.
    """
    return type(f"{mixin.__name__}{honest_cls.__name__}", (mixin, honest_cls), {})


def make_adversary(
    assignment: AdversaryAssignment,
    honest_cls: type,
    honest_kwargs: dict,
    rng: np.random.Generator,
    signer: Signer,
):
    """
    Build the Byzantine machine replacing a correct one.

    :param assignment: The adversary assigned to the process.
    :param honest_cls: Class of the correct machine the process would otherwise run.
    :param honest_kwargs: Arguments to build the correct machine with.
    :param rng: The adversary's random generator.
    :param signer: Handle signing as the process.
    :raises KindRoleMismatchError: If the behaviour cannot replace this kind of process.
    :return: The Byzantine machine.
    """
    mixin = ADVERSARIES[assignment.kind]
    if not mixin.applicable(honest_cls, honest_kwargs):
        raise KindRoleMismatchError(
            f"Adversary '{assignment.kind}' cannot be assigned to '{assignment.process}' running {honest_cls.__name__}"
        )
    params = assignment.params
    machine = compose(mixin, honest_cls)(**honest_kwargs)
    machine.configure(params, rng, signer)

    withhold_echo = params.get("withhold_echo", False)
    withhold_ready = params.get("withhold_ready", False)
    if withhold_echo or withhold_ready:
        if not hasattr(machine, "brb"):
            raise KindRoleMismatchError(f"Process '{assignment.process}' takes no part in reliable broadcast")
        machine.brb.withhold_echo = withhold_echo
        machine.brb.withhold_ready = withhold_ready
    logger.debug("Process '%s' runs adversary %s", assignment.process, assignment.kind)
    return machine
