"""
Module for the property checkers. Every checker is a pure function of a `History` returning a `Verdict`, so verdicts of
a stored trace can be recomputed at any time.
"""

from collections import defaultdict
from itertools import pairwise
from typing import Iterator, Optional

from pydantic import ValidationError

from bdso_simulator.auth.authenticator import Authenticator
from bdso_simulator.core.consts import NOTE_ATOMIC_COMPLETED, NOTE_BRB_BROADCAST, NOTE_BRB_DELIVER, NOTE_INSERT
from bdso_simulator.core.process_id import ProcessId, Role
from bdso_simulator.models.messages import AddRequest, LedgerAddRequest, decode_message
from bdso_simulator.models.record import AtomicRequestRecord, Record, sorted_records
from bdso_simulator.protocols.registry import ObjectRegistry
from bdso_simulator.protocols.sequential import ACK, seq_gset_apply, seq_ledger_apply
from bdso_simulator.schemas.scenario import AdmissionMode, AtomicPair, ObjectKind, OperationKind, ScenarioConfig
from bdso_simulator.schemas.verdict import Outcome, Verdict
from bdso_simulator.simnet.history import Deliver, History, Invocation, LocalEmit, Response, Snapshot

GSET_KINDS = {ObjectKind.BDSO, ObjectKind.SBDSO}
UPDATE_OPERATIONS = {
    OperationKind.ADD,
    OperationKind.APPEND,
    OperationKind.ATOMIC_APPENDS,
    OperationKind.ATOMIC_ADDS,
}


def _verdict(name: str, witness: list[str]) -> Verdict:
    return Verdict(property=name, verdict=Outcome.FAIL if witness else Outcome.PASS, witness=witness)


def _skip(name: str, reason: str) -> Verdict:
    return Verdict(property=name, verdict=Outcome.SKIP, witness=[reason])


def _kinds(scenario: ScenarioConfig) -> dict[str, ObjectKind]:
    return {spec.id: spec.kind for spec in scenario.objects}


def _is_correct(scenario: ScenarioConfig, process_id: ProcessId) -> bool:
    if process_id.role == Role.CLIENT:
        return process_id in scenario.correct_clients
    return process_id not in scenario.byzantine_servers


def _correct_gets(history: History, kinds: set[ObjectKind]) -> Iterator[tuple[int, Invocation, Response]]:
    """
    Complete gets of correct clients on objects of the given kinds.

    :param history: The history.
    :param kinds: Object kinds to consider.
    :return: Position of the response, invocation and response of every such get, in response order.
    """
    scenario = history.scenario
    object_kinds = _kinds(scenario)
    correct = scenario.correct_clients
    for position, event in enumerate(history.events):
        if not isinstance(event, Response) or event.op.client not in correct:
            continue
        if object_kinds.get(event.op.object_id) not in kinds:
            continue
        invocation = history.invocation_for(event.op)
        if invocation is not None and invocation.operation == OperationKind.GET:
            yield position, invocation, event


def _returned(response: Response) -> list:
    return response.sequence if response.sequence is not None else response.records or []


def _correct_inserts(history: History) -> dict[tuple[str, object], int]:
    """Earliest position at which some correct server inserted each record, keyed by object and record."""
    scenario = history.scenario
    inserts: dict[tuple[str, object], int] = {}
    for position, event in enumerate(history.events):
        if not isinstance(event, LocalEmit) or event.note != NOTE_INSERT or not _is_correct(scenario, event.process):
            continue
        record = event.indexed_record if event.indexed_record is not None else event.record
        inserts.setdefault((event.object_id, record), position)
    return inserts


def _final_replicas(history: History) -> dict[tuple[str, ProcessId], set]:
    return {
        (snapshot.object_id, snapshot.process): set(
            snapshot.indexed_records if snapshot.indexed_records is not None else snapshot.records or []
        )
        for snapshot in history.of_kind(Snapshot)
    }


def check_bc(history: History) -> Verdict:
    """
    Byzantine completeness: every operation invoked by a correct client has a response.

    :param history: The history.
    :return: The verdict, naming the operations left without a response.
    """
    correct = history.scenario.correct_clients
    witness = [
        f"{invocation.op} ({invocation.operation}) has no response"
        for invocation, response in history.operations()
        if invocation.op.client in correct and response is None
    ]
    return _verdict("bc", witness)


def _add_sources(history: History) -> dict[tuple[str, object], int]:
    """
    Earliest position at which each record was the subject of an add or append, either through an invocation or
    through an authenticated request a client sent without going through the workload.
    """
    sources: dict[tuple[str, object], int] = {}
    for position, event in enumerate(history.events):
        if isinstance(event, Invocation) and event.operation in UPDATE_OPERATIONS:
            record = event.indexed_record if event.indexed_record is not None else event.record
            if record is not None:
                sources.setdefault((event.op.object_id, record), position)
        elif isinstance(event, Deliver) and event.dispatched and event.envelope.sender.role == Role.CLIENT:
            try:
                message = decode_message(event.envelope.payload)
            except ValidationError:
                continue
            sender = event.envelope.sender
            if isinstance(message, AddRequest) and message.p == sender:
                sources.setdefault((message.object_id, message.record), position)
            elif isinstance(message, LedgerAddRequest) and message.w == sender:
                sources.setdefault((message.object_id, message.record), position)
    return sources


def check_bec_a(history: History) -> Verdict:
    """
    Every record returned by a correct client's get was added before the get responded. A ledger get must also return
    a gap-free sequence starting at index 1.

    :param history: The history.
    :return: The verdict, naming the unsourced records.
    """
    sources = _add_sources(history)
    witness = []
    for position, invocation, response in _correct_gets(history, GSET_KINDS | {ObjectKind.SWBDLO}):
        returned = _returned(response)
        if response.sequence is not None:
            indices = [record.k for record in returned]
            if indices != list(range(1, len(returned) + 1)):
                witness.append(f"{invocation.op} returned indices {indices}, not a prefix")
        for record in returned:
            source = sources.get((invocation.op.object_id, record))
            if source is None or source > position:
                witness.append(f"{invocation.op} returned {record!r} which was never added before its response")
    return _verdict("bec_a", witness)


def check_bec_b_quiescent(history: History) -> Verdict:
    """
    Every get invoked by a correct client after the quiescence marker returns the record of every add or append
    completed by a correct process before the marker.

    :param history: The history.
    :return: The verdict, naming the missing records.
    """
    quiescence = history.quiescence_position
    if quiescence is None:
        return _skip("bec_b", "the run never became quiescent")
    scenario = history.scenario
    completed: dict[str, set] = defaultdict(set)
    for invocation, response in history.operations():
        if invocation.operation not in UPDATE_OPERATIONS or response is None:
            continue
        if not _is_correct(scenario, invocation.op.client) or history.position_of_response(invocation.op) > quiescence:
            continue
        record = invocation.indexed_record if invocation.indexed_record is not None else invocation.record
        completed[invocation.op.object_id].add(record)

    witness = []
    for _, invocation, response in _correct_gets(history, GSET_KINDS | {ObjectKind.SWBDLO}):
        if history.position_of_invocation(invocation.op) < quiescence:
            continue
        missing = completed[invocation.op.object_id] - set(_returned(response))
        witness.extend(f"{invocation.op} is missing completed {record!r}" for record in sorted_records(missing))
    return _verdict("bec_b", witness)


def check_strong_prefix(history: History) -> Verdict:
    """
    Any two sequences returned by correct clients' gets on the same single-writer ledger are prefix related.

    :param history: The history.
    :return: The verdict, naming the first pair of unrelated gets per ledger.
    """
    sequences: dict[str, list[tuple[Invocation, list]]] = defaultdict(list)
    for _, invocation, response in _correct_gets(history, {ObjectKind.SWBDLO}):
        sequences[invocation.op.object_id].append((invocation, response.sequence or []))

    witness = []
    for object_id, returned in sequences.items():
        longest_invocation, longest = max(returned, key=lambda item: len(item[1]))
        for invocation, sequence in returned:
            if longest[: len(sequence)] != sequence:
                witness.append(
                    f"{object_id}: {invocation.op} returned a sequence that is not a prefix of "
                    f"{longest_invocation.op}'s"
                )
    return _verdict("strong_prefix", witness)


class _AtomicFacts:
    """
    Facts about a history needed by the atomic checker, computed once.
    """

    def __init__(self, history: History) -> None:
        self.history = history
        self.scenario = history.scenario
        self.registry = ObjectRegistry.from_scenario(self.scenario)
        self.quiescent = history.outcome == "quiescent"
        self.inserts = _correct_inserts(history)
        self.replicas = _final_replicas(history)
        self.completed = {
            (event.process, event.record) for event in history.emits(NOTE_ATOMIC_COMPLETED) if event.record is not None
        }
        self.requesters: dict[tuple[str, Record], set[ProcessId]] = defaultdict(set)
        for invocation, _ in history.operations():
            if invocation.op.client.role == Role.SERVER and invocation.record is not None:
                self.requesters[(invocation.op.object_id, invocation.record)].add(invocation.op.client)

    def present_everywhere(self, object_id: str, record: Record) -> bool:
        """Whether every correct server of an object holds a record in its final snapshot."""
        return all(
            record in self.replicas.get((object_id, server), set())
            for server in self.scenario.correct_servers(object_id)
        )


def _partner_request(pair: AtomicPair, member: ProcessId) -> Record:
    if member == pair.p:
        partner, own, target, counterpart = pair.q, pair.record_q, pair.target_q, pair.record_p
    else:
        partner, own, target, counterpart = pair.p, pair.record_p, pair.target_p, pair.record_q
    request = AtomicRequestRecord(
        requester=partner, group=(pair.p, pair.q), own_record=own, target=target, counterpart_record=counterpart
    )
    return request.to_record()


def _check_atomic_side(facts: _AtomicFacts, pair: AtomicPair, member: ProcessId) -> list[str]:
    record, target = (pair.record_p, pair.target_p) if member == pair.p else (pair.record_q, pair.target_q)
    partner_record, partner_target = (
        (pair.record_q, pair.target_q) if member == pair.p else (pair.record_p, pair.target_p)
    )
    admitted = facts.inserts.get((target, record))
    if admitted is None:
        return []

    witness = []
    target_spec = facts.scenario.find_object(target)
    if target_spec.mode == AdmissionMode.RESTRICTED:
        requesters = facts.requesters[(target, record)]
        needed = facts.registry.resolve(pair.sbdso).f + 1
        if len(requesters) < needed:
            witness.append(f"{record!r} admitted to '{target}' on the request of only {len(requesters)} servers")

    if member not in facts.scenario.correct_clients:
        return witness
    partner_request = _partner_request(pair, member)
    partner_inserted = facts.inserts.get((pair.sbdso, partner_request))
    if partner_inserted is None or partner_inserted > admitted:
        witness.append(f"{record!r} of '{member}' admitted to '{target}' before the partner's request was inserted")
    if facts.quiescent:
        if not facts.present_everywhere(pair.sbdso, partner_request):
            witness.append(f"partner request of '{member}' missing from a correct '{pair.sbdso}' replica")
        if not facts.present_everywhere(partner_target, partner_record):
            witness.append(f"{partner_record!r} missing from a correct '{partner_target}' replica")
    return witness


def check_atomic(history: History) -> Verdict:
    """
    Atomic appends and adds. For every declared pair, a correct member's record only lands in its target if the
    partner's request was inserted in the smart G-Set first, and when both members are correct both records land in
    their targets and both members complete. Records admitted to a restricted target must have been requested by
    enough smart G-Set servers.

    :param history: The history.
    :return: The verdict, naming the violated clauses per pair.
    """
    pairs = history.scenario.declared_pairs()
    if not pairs:
        return _skip("atomic", "the scenario declares no atomic pair")
    facts = _AtomicFacts(history)
    witness = []
    for pair in pairs:
        for member in (pair.p, pair.q):
            witness.extend(_check_atomic_side(facts, pair, member))
        correct = facts.scenario.correct_clients
        if pair.p not in correct or pair.q not in correct or not facts.quiescent:
            continue
        for member, record, target in ((pair.p, pair.record_p, pair.target_p), (pair.q, pair.record_q, pair.target_q)):
            if not facts.present_everywhere(target, record):
                witness.append(f"{record!r} of correct '{member}' never reached every correct '{target}' replica")
            if (member, record) not in facts.completed:
                witness.append(f"correct '{member}' never completed its atomic operation for {record!r}")
    return _verdict("atomic", witness)


def check_sequential_equiv(history: History) -> Verdict:
    """
    Replay a failure-free single-client history on the sequential reference objects and compare every result.

    :param history: The history.
    :return: The verdict, or SKIP if the history is concurrent or has Byzantine processes.
    """
    scenario = history.scenario
    if scenario.clients != 1 or scenario.adversaries or not scenario.workload.settle_between_ops:
        return _skip("sequential_equiv", "only single-client, failure-free, settled runs are sequential")

    object_kinds = _kinds(scenario)
    gsets: dict[str, frozenset] = defaultdict(frozenset)
    ledgers: dict[str, tuple] = defaultdict(tuple)
    witness = []
    for invocation, response in history.operations():
        object_id = invocation.op.object_id
        kind = object_kinds.get(object_id)
        if invocation.op.client.role != Role.CLIENT or kind not in GSET_KINDS | {ObjectKind.SWBDLO}:
            continue
        if invocation.operation not in (OperationKind.GET, OperationKind.ADD, OperationKind.APPEND):
            continue
        if response is None:
            witness.append(f"{invocation.op} has no response")
            continue
        if kind in GSET_KINDS:
            gsets[object_id], expected = seq_gset_apply(gsets[object_id], invocation.operation, invocation.record)
            actual = sorted_records(response.records) if response.records is not None else ACK
        else:
            payload = invocation.indexed_record.rho if invocation.indexed_record is not None else None
            ledgers[object_id], expected = seq_ledger_apply(ledgers[object_id], invocation.operation, payload)
            actual = [record.rho for record in response.sequence] if response.sequence is not None else ACK
        if actual == ACK and not response.ack:
            witness.append(f"{invocation.op} responded without an acknowledgement")
        elif actual != expected:
            witness.append(f"{invocation.op} returned {actual!r}, the sequential object returns {expected!r}")
    return _verdict("sequential_equiv", witness)


def check_convergence(history: History) -> Verdict:
    """
    Correct replicas of every object hold the same records once the run is quiescent.

    :param history: The history.
    :return: The verdict, naming the replicas that differ from the first correct one.
    """
    if history.outcome != "quiescent":
        return _skip("convergence", "the run did not finish quiescent")
    scenario = history.scenario
    replicas = _final_replicas(history)
    witness = []
    for spec in scenario.objects:
        if spec.kind == ObjectKind.BRB:
            continue
        states = [(server, replicas.get((spec.id, server), set())) for server in scenario.correct_servers(spec.id)]
        for (first, first_state), (second, second_state) in pairwise(states):
            if first_state != second_state:
                witness.append(f"'{spec.id}': replicas of '{first}' and '{second}' differ")
    return _verdict("convergence", witness)


def check_index_uniqueness(history: History) -> Verdict:
    """
    No two different records with the same index are ever held by correct replicas of a single-writer ledger.

    :param history: The history.
    :return: The verdict, naming the indices bound to several records.
    """
    scenario = history.scenario
    ledgers = {spec.id for spec in scenario.objects if spec.kind == ObjectKind.SWBDLO}
    bound: dict[tuple[str, int], set[bytes]] = defaultdict(set)
    for object_id, record in _correct_inserts(history):
        if object_id in ledgers:
            bound[(object_id, record.k)].add(record.rho)
    for (object_id, server), records in _final_replicas(history).items():
        if object_id in ledgers and _is_correct(scenario, server):
            for record in records:
                bound[(object_id, record.k)].add(record.rho)
    witness = [
        f"'{object_id}' index {k} is bound to {len(payloads)} records"
        for (object_id, k), payloads in sorted(bound.items())
        if len(payloads) > 1
    ]
    return _verdict("index_uniqueness", witness)


def check_brb(history: History) -> Verdict:
    """
    Reliable broadcast among the servers of every object: a correct server delivers an instance at most once and only
    if a correct origin broadcast it. Once quiescent, every instance broadcast by a correct origin or delivered by any
    correct server has been delivered by every correct server.

    :param history: The history.
    :return: The verdict.
    """
    scenario = history.scenario
    broadcasts: dict[str, set[tuple[ProcessId, int]]] = defaultdict(set)
    deliveries: dict[str, dict[tuple[ProcessId, int], list[ProcessId]]] = defaultdict(lambda: defaultdict(list))
    for event in history.emits():
        if event.note not in (NOTE_BRB_BROADCAST, NOTE_BRB_DELIVER) or not _is_correct(scenario, event.process):
            continue
        if event.note == NOTE_BRB_BROADCAST:
            broadcasts[event.object_id].add((event.origin, event.digest))
        else:
            deliveries[event.object_id][(event.origin, event.digest)].append(event.process)

    witness = []
    quiescent = history.outcome == "quiescent"
    for spec in scenario.objects:
        correct = set(scenario.correct_servers(spec.id))
        delivered = deliveries[spec.id]
        for (origin, digest), servers in sorted(delivered.items(), key=lambda item: (item[0][0].sort_key, item[0][1])):
            instance = f"'{spec.id}' instance {origin}/{digest:016x}"
            if len(servers) != len(set(servers)):
                witness.append(f"{instance} delivered more than once by a correct server")
            if origin in correct and (origin, digest) not in broadcasts[spec.id]:
                witness.append(f"{instance} delivered but never broadcast by its correct origin")
            missing = sorted(str(server) for server in correct - set(servers))
            if quiescent and missing:
                witness.append(f"{instance} not delivered by {missing}")
        if quiescent:
            undelivered = broadcasts[spec.id] - set(delivered)
            for origin, digest in sorted(undelivered, key=lambda item: (item[0].sort_key, item[1])):
                witness.append(f"'{spec.id}' instance {origin}/{digest:016x} broadcast but never delivered")
    return _verdict("brb", witness)


def check_authentication(history: History, authenticator: Optional[Authenticator] = None) -> Verdict:
    """
    No envelope whose tag fails verification reached its recipient's handler.

    :param history: The history.
    :param authenticator: Authenticator to check tags with, by default one rebuilt from the seed of the run.
    :return: The verdict, naming the offending envelopes.
    """
    authenticator = authenticator or Authenticator(history.seed)
    witness = []
    for event in history.of_kind(Deliver):
        if not event.dispatched:
            continue
        envelope = event.envelope
        if envelope.tag.signer != envelope.sender or not authenticator.matches(envelope.tag, envelope.payload):
            witness.append(f"envelope {envelope.seq} claiming '{envelope.sender}' was dispatched without a valid tag")
    return _verdict("authentication", witness)


def check_get_soundness(history: History) -> Verdict:
    """
    Every record returned by a correct client's get was held by some correct replica when the get responded.

    :param history: The history.
    :return: The verdict, naming the records no correct replica held.
    """
    inserts = _correct_inserts(history)
    witness = []
    for position, invocation, response in _correct_gets(history, GSET_KINDS | {ObjectKind.SWBDLO}):
        for record in _returned(response):
            inserted = inserts.get((invocation.op.object_id, record))
            if inserted is None or inserted > position:
                witness.append(f"{invocation.op} returned {record!r} which no correct replica held")
    return _verdict("get_soundness", witness)
