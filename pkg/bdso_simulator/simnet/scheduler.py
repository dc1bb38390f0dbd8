"""
Module for the scheduler deciding, at every step, which pending envelope to deliver or which idle client to let invoke
its next operation.
"""

import heapq
import logging
from collections import deque
from typing import Optional, Union

import numpy as np

from bdso_simulator.core.config import SchedulerPolicy
from bdso_simulator.core.process_id import ProcessId
from bdso_simulator.models.envelope import Envelope

logger = logging.getLogger()

Choice = Union[Envelope, ProcessId]


class Scheduler:
    """
    Pool of in-flight envelopes and the policy choosing the next step.

    Under the `fair` and `adversary` policies every envelope gets a deadline when it is enqueued, a multiple of the
    number of envelopes then pending. An envelope past its deadline is delivered before anything else, so every message
    between correct processes is eventually delivered.
    """

    def __init__(
        self,
        policy: SchedulerPolicy,
        rng: np.random.Generator,
        fairness_multiplier: int,
        byzantine: frozenset[ProcessId] = frozenset(),
    ) -> None:
        """
        Initialise the `Scheduler`.

        :param policy: The scheduling policy.
        :param rng: The scheduler's random generator.
        :param fairness_multiplier: Multiple of the pending count used for deadlines.
        :param byzantine: Byzantine processes, favoured by the `adversary` policy.
        """
        self.policy = policy
        self.rng = rng
        self.fairness_multiplier = fairness_multiplier
        self.byzantine = byzantine
        self._pending: dict[int, Envelope] = {}
        # Uniform choice needs O(1) indexing and removal, so envelopes are swap-removed from this pool
        self._pool: list[int] = []
        self._positions: dict[int, int] = {}
        self._arrivals: deque[int] = deque()
        self._deadlines: list[tuple[int, int]] = []
        self._byzantine_stack: list[int] = []

    def __len__(self) -> int:
        return len(self._pending)

    def enqueue(self, envelope: Envelope, step: int) -> None:
        """
        Add an envelope to the pool.

        :param envelope: The envelope.
        :param step: The current step.
        """
        seq = envelope.seq
        deadline = step + self.fairness_multiplier * max(1, len(self._pending))
        self._pending[seq] = envelope
        self._positions[seq] = len(self._pool)
        self._pool.append(seq)
        self._arrivals.append(seq)
        heapq.heappush(self._deadlines, (deadline, seq))
        if envelope.sender in self.byzantine or envelope.recipient in self.byzantine:
            self._byzantine_stack.append(seq)

    def next_choice(self, ready_clients: list[ProcessId], step: int) -> Optional[Choice]:
        """
        Choose the next step.

        :param ready_clients: Clients that may invoke their next operation, in deterministic order.
        :param step: The step about to be taken.
        :return: The envelope to deliver, the client to let invoke, or `None` if nothing can happen.
        """
        if not self._pending and not ready_clients:
            return None
        match self.policy:
            case SchedulerPolicy.FIFO:
                if ready_clients:
                    return ready_clients[0]
                return self._take(self._pop_valid(self._arrivals.popleft, self._arrivals))
            case SchedulerPolicy.ADVERSARY:
                if ready_clients:
                    return ready_clients[0]
                overdue = self._overdue(step)
                if overdue is not None:
                    return self._take(overdue)
                seq = self._pop_valid(self._byzantine_stack.pop, self._byzantine_stack)
                if seq is None:
                    seq = next(reversed(self._pending))
                return self._take(seq)
            case _:
                overdue = self._overdue(step)
                if overdue is not None:
                    return self._take(overdue)
                pick = int(self.rng.integers(len(self._pool) + len(ready_clients)))
                if pick >= len(self._pool):
                    return ready_clients[pick - len(self._pool)]
                return self._take(self._pool[pick])

    def _overdue(self, step: int) -> Optional[int]:
        while self._deadlines:
            deadline, seq = self._deadlines[0]
            if seq not in self._pending:
                heapq.heappop(self._deadlines)
                continue
            if deadline > step:
                return None
            heapq.heappop(self._deadlines)
            logger.debug("Delivering envelope %d past its deadline %d", seq, deadline)
            return seq
        return None

    def _pop_valid(self, pop, container) -> Optional[int]:
        while container:
            seq = pop()
            if seq in self._pending:
                return seq
        return None

    def _take(self, seq: int) -> Envelope:
        envelope = self._pending.pop(seq)
        position = self._positions.pop(seq)
        last = self._pool.pop()
        if last != seq:
            self._pool[position] = last
            self._positions[last] = position
        return envelope
