"""
Unit tests for the `Scheduler` class.
"""

import numpy as np
import pytest

from bdso_simulator.core.config import SchedulerPolicy
from bdso_simulator.core.process_id import ProcessId
from bdso_simulator.models.envelope import AuthTag, Envelope
from bdso_simulator.simnet.scheduler import Scheduler


def make_envelope(seq: int, sender: str = "S0", recipient: str = "S1") -> Envelope:
    """
    Build an envelope.

    :param seq: Sequence number of the envelope.
    :param sender: The sender.
    :param recipient: The recipient.
    :return: The envelope.
    """
    return Envelope(
        seq=seq,
        sender=ProcessId(sender),
        recipient=ProcessId(recipient),
        payload=b"{}",
        tag=AuthTag(signer=ProcessId(sender), digest=seq),
        enqueue_step=0,
    )


class SchedulerDSL:
    """Base class for `Scheduler` tests."""

    scheduler: Scheduler

    def mock_scheduler(self, policy: SchedulerPolicy, fairness_multiplier: int = 100, byzantine=frozenset()) -> None:
        """
        Creates the scheduler under test.

        :param policy: The scheduling policy.
        :param fairness_multiplier: Multiple of the pending count used for deadlines.
        :param byzantine: Byzantine processes.
        """
        self.scheduler = Scheduler(
            policy, np.random.default_rng(0), fairness_multiplier, frozenset(ProcessId(p) for p in byzantine)
        )

    def call_enqueue(self, *envelopes: Envelope, step: int = 0) -> None:
        """
        Enqueues envelopes at a step.

        :param envelopes: The envelopes.
        :param step: The step.
        """
        for envelope in envelopes:
            self.scheduler.enqueue(envelope, step)

    def check_delivery_order(self, expected: list[int], step: int = 0) -> None:
        """
        Checks the order in which the scheduler delivers every pending envelope.

        :param expected: Expected sequence numbers, in order.
        :param step: The step passed to every choice.
        """
        order = []
        while (choice := self.scheduler.next_choice([], step)) is not None:
            order.append(choice.seq)
        assert order == expected


class TestFifo(SchedulerDSL):
    """Tests for the `fifo` policy."""

    def test_arrival_order(self):
        """Test envelopes are delivered in the order they were enqueued."""
        self.mock_scheduler(SchedulerPolicy.FIFO)
        self.call_enqueue(make_envelope(2), make_envelope(0), make_envelope(1))
        self.check_delivery_order([2, 0, 1])

    def test_clients_first(self):
        """Test an idle client is let invoke before any envelope is delivered."""
        self.mock_scheduler(SchedulerPolicy.FIFO)
        self.call_enqueue(make_envelope(0))
        assert self.scheduler.next_choice([ProcessId("C0")], 0) == "C0"
        assert len(self.scheduler) == 1


class TestFair(SchedulerDSL):
    """Tests for the `fair` policy."""

    def test_nothing_to_do(self):
        """Test there is no choice without pending envelopes or idle clients."""
        self.mock_scheduler(SchedulerPolicy.FAIR)
        assert self.scheduler.next_choice([], 0) is None

    def test_overdue_delivered_first(self):
        """Test an envelope past its deadline is delivered before any other."""
        self.mock_scheduler(SchedulerPolicy.FAIR, fairness_multiplier=1)
        self.call_enqueue(make_envelope(0))
        self.call_enqueue(make_envelope(1), make_envelope(2), step=5)
        assert self.scheduler.next_choice([ProcessId("C0")], 1).seq == 0

    def test_every_envelope_delivered_once(self):
        """Test random choices still deliver every envelope exactly once."""
        self.mock_scheduler(SchedulerPolicy.FAIR)
        self.call_enqueue(*(make_envelope(seq) for seq in range(10)))
        order = []
        while (choice := self.scheduler.next_choice([], 0)) is not None:
            order.append(choice.seq)
        assert sorted(order) == list(range(10))


class TestAdversary(SchedulerDSL):
    """Tests for the `adversary` policy."""

    @pytest.fixture(autouse=True)
    def setup(self):
        """Setup fixtures"""
        self.mock_scheduler(SchedulerPolicy.ADVERSARY, byzantine={"S3"})

    def test_byzantine_traffic_first(self):
        """Test envelopes involving Byzantine processes go first, then the newest others."""
        self.call_enqueue(make_envelope(0), make_envelope(1, sender="S3"), make_envelope(2, recipient="S3"))
        self.call_enqueue(make_envelope(3))
        self.check_delivery_order([2, 1, 3, 0])

    def test_overdue_beats_byzantine(self):
        """Test the deadline still bounds how long a correct envelope waits."""
        self.mock_scheduler(SchedulerPolicy.ADVERSARY, fairness_multiplier=1, byzantine={"S3"})
        self.call_enqueue(make_envelope(0))
        self.call_enqueue(make_envelope(1, sender="S3"), step=5)
        assert self.scheduler.next_choice([], 1).seq == 0
