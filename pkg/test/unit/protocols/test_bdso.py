"""
Unit tests for the grow-only set client session and server.
"""

import numpy as np
import pytest

from bdso_simulator.core.consts import NOTE_BRB_BROADCAST, NOTE_INSERT
from bdso_simulator.core.exceptions import NotCreatorError, OperationInFlightError
from bdso_simulator.core.process_id import ProcessId, server_ids
from bdso_simulator.models.envelope import AuthTag
from bdso_simulator.models.messages import Ack, AddRequest, BrbInit, GetRequest, GetResponse, encode_message
from bdso_simulator.models.record import Record
from bdso_simulator.protocols.base import Emit, Incoming, Send
from bdso_simulator.protocols.bdso import BdsoClientSession, BdsoServer
from bdso_simulator.protocols.quorum import quorum_get_result, records_in_quorum
from bdso_simulator.protocols.registry import ObjectView
from bdso_simulator.schemas.scenario import ObjectKind

RECORD_A = Record(creator="C0", payload=b"a")
RECORD_B = Record(creator="C0", payload=b"b")


@pytest.fixture(name="view")
def fixture_view() -> ObjectView:
    """
    Fixture to create the view of a grow-only set with 4 servers tolerating 1 Byzantine server.

    :return: The view.
    """
    return ObjectView(id="gs", kind=ObjectKind.BDSO, servers=server_ids(0, 4), f=1)


def incoming(sender: str, message) -> Incoming:
    """
    Wrap a message as if it was delivered by the simulator.

    :param sender: Authenticated sender.
    :param message: The message.
    :return: The incoming message.
    """
    return Incoming(
        sender=ProcessId(sender),
        message=message,
        raw=encode_message(message),
        tag=AuthTag(signer=ProcessId(sender), digest=0),
    )


def test_records_in_quorum():
    """
    Test only records reported by at least f+1 snapshots are kept.
    """
    collected = [[RECORD_A, RECORD_B], [RECORD_A], [RECORD_B, RECORD_B]]
    assert records_in_quorum(collected, 1) == {RECORD_A, RECORD_B}
    assert records_in_quorum(collected, 2) == set()


def test_quorum_get_result_is_sorted():
    """
    Test the get result is in deterministic order.
    """
    assert quorum_get_result([[RECORD_B, RECORD_A], [RECORD_A, RECORD_B]], 1) == [RECORD_A, RECORD_B]


class BdsoClientSessionDSL:
    """Base class for `BdsoClientSession` tests."""

    session: BdsoClientSession

    @pytest.fixture(autouse=True)
    def setup(self, view):
        """Setup fixtures"""
        self.session = BdsoClientSession(ProcessId("C0"), view, np.random.default_rng(0))

    def call_get_responses(self, responses: dict[str, list[Record]]):
        """
        Feeds snapshots to the pending get.

        :param responses: Snapshot of each responding server.
        :return: The result of the last call.
        """
        result = None
        for server, records in responses.items():
            message = GetResponse(object_id="gs", c=self.session.c, i=ProcessId(server), records=records)
            result = self.session.client_on_get_response(ProcessId(server), message)
        return result


class TestGet(BdsoClientSessionDSL):
    """Tests for gets."""

    def test_get_sends_to_every_server(self):
        """Test a get with n=3f+1 asks every server."""
        op, sends = self.session.client_get()
        assert op.c == 1
        assert sorted(send.to for send in sends) == ["S0", "S1", "S2", "S3"]
        assert all(isinstance(send.message, GetRequest) for send in sends)

    def test_get_completes_after_2f_plus_1(self):
        """Test a get completes with the third snapshot and filters records reported only once."""
        self.session.client_get()
        assert self.call_get_responses({"S0": [RECORD_A], "S1": [RECORD_A, RECORD_B]}) is None
        respond = self.call_get_responses({"S2": []})
        assert respond.records == [RECORD_A]
        assert self.session.pending is None

    def test_duplicate_snapshot_ignored(self):
        """Test a second snapshot from the same server is not counted."""
        self.session.client_get()
        self.call_get_responses({"S0": [RECORD_A], "S1": [RECORD_A]})
        assert self.call_get_responses({"S1": [RECORD_A]}) is None

    def test_spoofed_responder_ignored(self):
        """Test a snapshot claiming another responder is dropped."""
        self.session.client_get()
        message = GetResponse(object_id="gs", c=1, i=ProcessId("S1"), records=[])
        assert self.session.client_on_get_response(ProcessId("S0"), message) is None
        assert not self.session.pending.responses


class TestAdd(BdsoClientSessionDSL):
    """Tests for adds."""

    def test_add_sends_to_2f_plus_1(self):
        """Test an add goes to 2f+1 distinct servers."""
        _, sends = self.session.client_add(RECORD_A)
        assert len({send.to for send in sends}) == 3
        assert all(isinstance(send.message, AddRequest) and send.message.p == "C0" for send in sends)

    def test_add_completes_after_f_plus_1_acks(self):
        """Test an add completes with the second acknowledgement."""
        _, sends = self.session.client_add(RECORD_A)
        first, second = sends[0].to, sends[1].to
        assert self.session.client_on_ack(first, Ack(object_id="gs", c=1, i=first)) is None
        respond = self.session.client_on_ack(second, Ack(object_id="gs", c=1, i=second))
        assert respond.ack is True

    def test_add_of_other_creator(self):
        """Test a client cannot add a record created by someone else."""
        with pytest.raises(NotCreatorError):
            self.session.client_add(Record(creator="C1", payload=b"a"))

    def test_operation_in_flight(self):
        """Test a second operation cannot start while one is pending."""
        self.session.client_get()
        with pytest.raises(OperationInFlightError):
            self.session.client_add(RECORD_A)


class BdsoServerDSL:
    """Base class for `BdsoServer` tests."""

    server: BdsoServer
    _effects: list

    @pytest.fixture(autouse=True)
    def setup(self, view):
        """Setup fixtures"""
        self.server = BdsoServer(ProcessId("S0"), view, verifier=lambda tag, payload: True)

    def call_add(self, sender: str = "C0", p: str = "C0", record: Record = RECORD_A) -> None:
        """
        Delivers an add request to the server.

        :param sender: Authenticated sender.
        :param p: Client named in the request.
        :param record: The record to add.
        """
        message = AddRequest(object_id="gs", c=1, p=ProcessId(p), record=record)
        self._effects = self.server.on_message(incoming(sender, message))


class TestServerAdd(BdsoServerDSL):
    """Tests for add requests reaching a server."""

    def test_fresh_add_is_propagated(self):
        """Test a fresh add starts a reliable broadcast to every server and defers the acknowledgement."""
        self.call_add()
        emits = [effect for effect in self._effects if isinstance(effect, Emit)]
        inits = [effect for effect in self._effects if isinstance(effect, Send) and isinstance(effect.message, BrbInit)]
        assert [emit.note for emit in emits] == [NOTE_BRB_BROADCAST]
        assert sorted(send.to for send in inits) == ["S0", "S1", "S2", "S3"]
        assert self.server.pending_acks[RECORD_A] == [("C0", 1)]

    def test_present_record_acked(self):
        """Test an add of a record already in the replica is acknowledged at once."""
        self.server.replica.add(RECORD_A)
        self.call_add()
        assert len(self._effects) == 1
        assert isinstance(self._effects[0].message, Ack)

    def test_add_for_other_client_ignored(self):
        """Test an add naming another client than its sender is ignored."""
        self.call_add(sender="C1")
        assert not self._effects

    def test_insert_releases_acks(self):
        """Test inserting a record acknowledges every client waiting on it."""
        self.call_add()
        effects = self.server.insert(RECORD_A)
        assert effects[0].note == NOTE_INSERT
        assert [effect.to for effect in effects if isinstance(effect, Send)] == ["C0"]
        assert self.server.get_snapshot() == [RECORD_A]

    def test_insert_threshold(self):
        """Test the default insertion threshold is f+1."""
        assert self.server.insert_threshold == 2


class TestServerBrbInsert(BdsoServerDSL):
    """Tests for counting reliably delivered propagations."""

    def call_propagated(self, origin: str, c: int = 1, record: Record = RECORD_A) -> None:
        """
        Hands a propagated add of `C0` to the insertion logic as if delivered from `origin`.

        :param origin: The server that propagated the add.
        :param c: Sequence number of the add.
        :param record: The record.
        """
        request = AddRequest(object_id="gs", c=c, p=ProcessId("C0"), record=record)
        self._effects = self.server.server_on_brb_insert(ProcessId(origin), request)

    def test_inserted_after_f_plus_1_origins(self):
        """Test a record is inserted once f+1 distinct servers propagated the same add."""
        self.call_propagated("S1")
        assert not self._effects
        self.call_propagated("S2")
        assert self._effects[0].note == NOTE_INSERT
        assert self.server.get_snapshot() == [RECORD_A]

    def test_repeated_origin_not_counted(self):
        """Test the same server propagating twice counts once."""
        self.call_propagated("S1")
        self.call_propagated("S1")
        assert not self._effects
        assert not self.server.get_snapshot()

    def test_different_adds_counted_apart(self):
        """Test propagations of different adds of one record are not summed."""
        self.call_propagated("S1", c=1)
        self.call_propagated("S2", c=2)
        assert not self._effects
        assert not self.server.get_snapshot()
