"""
Unit tests for reliable broadcast among the servers of an object.
"""

from collections import deque

import pytest

from bdso_simulator.auth.authenticator import content_digest
from bdso_simulator.core.consts import NOTE_BRB_DELIVER, NOTE_BRB_EQUIVOCATION
from bdso_simulator.core.process_id import ProcessId, server_ids
from bdso_simulator.protocols.base import Emit, Send
from bdso_simulator.protocols.brb import BrbInstanceTable, echo_threshold


@pytest.mark.parametrize("n,f,expected", [(4, 1, 3), (7, 2, 5), (5, 1, 4), (1, 0, 1)])
def test_echo_threshold(n, f, expected):
    """
    Test the echo threshold is a majority of the servers plus f.
    """
    assert echo_threshold(n, f) == expected


class BrbGroupDSL:
    """Base class for tests running a whole broadcast group in memory."""

    servers: list[ProcessId]
    tables: dict[ProcessId, BrbInstanceTable]
    _queue: deque
    _deliveries: dict[ProcessId, list]
    _emits: list[tuple[ProcessId, Emit]]

    def mock_group(self, n: int, f: int, withhold_echo: tuple = (), withhold_ready: tuple = ()) -> None:
        """
        Creates one broadcast endpoint per server.

        :param n: Number of servers.
        :param f: Maximum number of Byzantine servers.
        :param withhold_echo: Servers that never echo.
        :param withhold_ready: Servers that never send READY.
        """
        self.servers = server_ids(0, n)
        self.tables = {
            server: BrbInstanceTable(
                "rb",
                server,
                self.servers,
                f,
                withhold_echo=server in withhold_echo,
                withhold_ready=server in withhold_ready,
            )
            for server in self.servers
        }
        self._queue = deque()
        self._deliveries = {server: [] for server in self.servers}
        self._emits = []

    def _collect(self, sender: ProcessId, effects: list) -> None:
        for effect in effects:
            if isinstance(effect, Send):
                self._queue.append((sender, effect.to, effect.message))
            else:
                self._emits.append((sender, effect))

    def call_broadcast(self, origin: str, body: bytes, recipients: list = None) -> None:
        """
        Starts a broadcast and delivers every message in FIFO order until none is left.

        :param origin: The broadcasting server.
        :param body: The body.
        :param recipients: Servers receiving the INIT, by default every server.
        """
        table = self.tables[ProcessId(origin)]
        if recipients is None:
            self._collect(table.self_id, table.brb_broadcast(body, slot="s"))
        else:
            self._collect(table.self_id, table.init_sends(body, "s", [ProcessId(server) for server in recipients]))
        self.call_drain()

    def call_drain(self) -> None:
        """Delivers queued messages until none is left."""
        while self._queue:
            sender, recipient, message = self._queue.popleft()
            effects, deliveries = self.tables[recipient].brb_on_message(sender, message)
            self._collect(recipient, effects)
            self._deliveries[recipient].extend(deliveries)

    def check_delivered(self, servers: list[str], body: bytes) -> None:
        """
        Checks that exactly the given servers delivered the body, once each.

        :param servers: The servers expected to deliver.
        :param body: The body.
        """
        for server in self.servers:
            bodies = [delivery.body for delivery in self._deliveries[server]]
            assert bodies == ([body] if server in servers else []), server


class TestBroadcast(BrbGroupDSL):
    """Tests for broadcasts from a correct origin."""

    def test_all_deliver(self):
        """Test every server delivers a correct broadcast exactly once."""
        self.mock_group(4, 1)
        self.call_broadcast("S0", b"hello")
        self.check_delivered(["S0", "S1", "S2", "S3"], b"hello")
        deliver_emits = [emit for _, emit in self._emits if emit.note == NOTE_BRB_DELIVER]
        assert {emit.digest for emit in deliver_emits} == {content_digest(b"hello")}

    def test_deliver_despite_withheld_echo_and_ready(self):
        """Test every server delivers when f servers withhold both ECHO and READY, withholders included."""
        self.mock_group(7, 2, withhold_echo=("S5", "S6"), withhold_ready=("S5", "S6"))
        self.call_broadcast("S0", b"hello")
        self.check_delivered(["S0", "S1", "S2", "S3", "S4", "S5", "S6"], b"hello")

    def test_outsider_ignored(self):
        """Test messages from outside the group are ignored."""
        self.mock_group(4, 1)
        table = self.tables[ProcessId("S0")]
        init_send = table.brb_broadcast(b"hello", slot="s")[1]
        assert table.brb_on_message(ProcessId("S9"), init_send.message) == ([], [])


class TestEquivocation(BrbGroupDSL):
    """Tests for an origin sending different bodies to different servers."""

    def test_split_init_delivers_nothing(self):
        """Test an origin splitting two bodies between halves of the group gets neither delivered."""
        self.mock_group(4, 1)
        self.call_broadcast("S3", b"left", recipients=["S0", "S1"])
        self.call_broadcast("S3", b"right", recipients=["S2", "S3"])
        self.check_delivered([], b"left")

    def test_equivocation_reported(self):
        """Test a server receiving two bodies for the same slot reports it."""
        self.mock_group(4, 1)
        self.call_broadcast("S3", b"left", recipients=["S0"])
        self.call_broadcast("S3", b"right", recipients=["S0"])
        assert [server for server, emit in self._emits if emit.note == NOTE_BRB_EQUIVOCATION] == ["S0"]
