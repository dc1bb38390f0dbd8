"""
Module for the deterministic network simulator.

The simulator owns the message pool, the authentication filter and the workload. Each step either delivers one
envelope or lets one idle client invoke its next operation, so a run is fully determined by the scenario and the seed.
"""

import logging
from collections import deque
from typing import Optional

import numpy as np
from pydantic import ValidationError

from bdso_simulator.auth.authenticator import Authenticator
from bdso_simulator.core.config import SchedulerPolicy, config
from bdso_simulator.core.consts import RNG_STREAM_SCHEDULER
from bdso_simulator.core.exceptions import ProtocolError, StepLimitExceededError
from bdso_simulator.core.process_id import ProcessId, Role, sorted_ids
from bdso_simulator.models.envelope import AuthTag, Envelope
from bdso_simulator.models.messages import WireMessage, decode_message, encode_message
from bdso_simulator.protocols.base import Effects, Emit, ForgedSend, Incoming, Invoke, ProcessStateMachine, Respond
from bdso_simulator.schemas.scenario import ScenarioConfig, WorkloadOperation
from bdso_simulator.simnet.assembly import build_machines
from bdso_simulator.simnet.history import (
    Deliver,
    History,
    Invocation,
    LocalEmit,
    Quiescence,
    Response,
    RunFinished,
    RunStarted,
    Snapshot,
)
from bdso_simulator.simnet.scheduler import Scheduler
from bdso_simulator.simnet.workload import build_final_gets, build_workload

logger = logging.getLogger()


class Simulator:
    """
    Runs the machines of one scenario to quiescence.
    """

    # pylint: disable=too-many-instance-attributes

    def __init__(
        self,
        scenario: ScenarioConfig,
        machines: dict[ProcessId, ProcessStateMachine],
        authenticator: Authenticator,
        seed: int,
        policy: SchedulerPolicy,
        step_limit: int,
        fairness_multiplier: int,
    ) -> None:
        """
        Initialise the `Simulator`.

        :param scenario: The validated scenario.
        :param machines: The machine of every process.
        :param authenticator: The run's authenticator.
        :param seed: Seed of the run.
        :param policy: Scheduling policy.
        :param step_limit: Number of steps after which the run is abandoned.
        :param fairness_multiplier: Multiple of the pending count used for delivery deadlines.
        """
        self.scenario = scenario
        self.machines = machines
        self.authenticator = authenticator
        self.seed = seed
        self.step_limit = step_limit
        byzantine = frozenset(assignment.process for assignment in scenario.adversaries)
        self.scheduler = Scheduler(
            policy, np.random.default_rng([seed, RNG_STREAM_SCHEDULER, 0]), fairness_multiplier, byzantine
        )
        self.signers = {process_id: authenticator.signer_for(process_id) for process_id in machines}
        self.workload: dict[ProcessId, deque[WorkloadOperation]] = build_workload(scenario, seed)
        self.final_gets = build_final_gets(scenario)
        self.busy: dict[ProcessId, bool] = {client: False for client in self.workload}
        self.history = History()
        self.step = 0
        self._next_seq = 0
        # Decoded message, or `None` if malformed, of every distinct payload delivered so far
        self._decoded: dict[bytes, Optional[WireMessage]] = {}

    def ready_clients(self) -> list[ProcessId]:
        """Clients that may invoke their next operation now, in order."""
        if self.scenario.workload.settle_between_ops and len(self.scheduler):
            return []
        return [client for client in sorted_ids(self.workload) if self.workload[client] and not self.busy[client]]

    def run(self) -> History:
        """
        Run the scenario.

        :raises StepLimitExceededError: If the run does not become quiescent within the step limit. The partial
            history is attached to the exception.
        :return: The history of the run.
        """
        logger.info("Running scenario '%s' with seed %d", self.scenario.name, self.seed)
        self.history.record(RunStarted(step=0, scenario=self.scenario, seed=self.seed))
        for process_id in sorted_ids(self.machines):
            self.apply(process_id, self.machines[process_id].on_start())

        quiescent_once = False
        while True:
            choice = self.scheduler.next_choice(self.ready_clients(), self.step)
            if choice is None:
                if quiescent_once:
                    break
                quiescent_once = True
                self.history.record(Quiescence(step=self.step))
                for client, operations in self.final_gets.items():
                    self.workload[client].extend(operations)
                continue

            self.step += 1
            if self.step > self.step_limit:
                self.history.record(RunFinished(step=self.step, outcome="step_limit"))
                raise StepLimitExceededError(
                    f"Scenario '{self.scenario.name}' seed {self.seed} exceeded {self.step_limit} steps", self.history
                )
            if isinstance(choice, Envelope):
                self.deliver(choice)
            else:
                self.invoke(choice)

        for process_id in sorted_ids(self.machines):
            if process_id.role != Role.SERVER:
                continue
            for snapshot in self.machines[process_id].snapshots():
                self.history.record(
                    Snapshot(
                        step=self.step,
                        process=process_id,
                        object_id=snapshot.object_id,
                        records=snapshot.records,
                        indexed_records=snapshot.indexed_records,
                    )
                )
        self.history.record(RunFinished(step=self.step, outcome="quiescent"))
        logger.info("Scenario '%s' seed %d quiescent after %d steps", self.scenario.name, self.seed, self.step)
        return self.history

    def deliver(self, envelope: Envelope) -> None:
        """
        Deliver an envelope through the authentication filter.

        :param envelope: The envelope.
        """
        authentic = envelope.tag.signer == envelope.sender and self.authenticator.verify(envelope.tag, envelope.payload)
        if not authentic:
            logger.warning("Dropping envelope %d claiming to come from '%s'", envelope.seq, envelope.sender)
            self._record_delivery(envelope, authentic=False, dispatched=False)
            return
        message = self.decode(envelope.payload)
        if message is None:
            logger.warning("Dropping malformed envelope %d from '%s'", envelope.seq, envelope.sender)
            self._record_delivery(envelope, authentic=True, dispatched=False)
            return

        self._record_delivery(envelope, authentic=True, dispatched=True)
        incoming = Incoming.model_construct(
            sender=envelope.sender, message=message, raw=envelope.payload, tag=envelope.tag
        )
        self.apply(envelope.recipient, self.machines[envelope.recipient].on_message(incoming))

    def decode(self, payload: bytes) -> Optional[WireMessage]:
        """
        Decode an envelope payload. Messages are immutable, so every delivery of the same payload shares one decoded
        message.

        :param payload: The payload.
        :return: The message, or `None` if the payload is not a well formed message.
        """
        if payload in self._decoded:
            return self._decoded[payload]
        try:
            message = decode_message(payload)
        except ValidationError:
            message = None
        self._decoded[payload] = message
        return message

    def invoke(self, client: ProcessId) -> None:
        """
        Let a client invoke its next operation.

        :param client: The client.
        """
        operation = self.workload[client].popleft()
        try:
            effects = self.machines[client].invoke(operation)
        except ProtocolError as exc:
            logger.warning("Client '%s' could not invoke %s: %s", client, operation.op, exc)
            return
        self.apply(client, effects)

    def apply(self, process_id: ProcessId, effects: Effects) -> None:
        """
        Apply the effects returned by a machine, in order.

        :param process_id: The process that returned them.
        :param effects: The effects.
        """
        # A message sent to several recipients is encoded and signed once
        signed: dict[int, tuple[bytes, AuthTag]] = {}
        for effect in effects:
            if isinstance(effect, ForgedSend):
                self._enqueue(effect.claimed_sender, effect.to, effect.payload, effect.tag)
            elif isinstance(effect, Invoke):
                if effect.op.client in self.busy:
                    self.busy[effect.op.client] = True
                self.history.record(Invocation(step=self.step, **dict(effect)))
            elif isinstance(effect, Respond):
                if effect.op.client in self.busy:
                    self.busy[effect.op.client] = False
                self.history.record(Response(step=self.step, **dict(effect)))
            elif isinstance(effect, Emit):
                self.history.record(LocalEmit(step=self.step, process=process_id, **dict(effect)))
            else:
                key = id(effect.message)
                if key not in signed:
                    payload = encode_message(effect.message)
                    signed[key] = (payload, self.signers[process_id].sign(payload))
                self._enqueue(process_id, effect.to, *signed[key])

    def _enqueue(self, sender: ProcessId, recipient: ProcessId, payload: bytes, tag) -> None:
        if recipient not in self.machines:
            logger.warning("Dropping message from '%s' to unknown process '%s'", sender, recipient)
            return
        envelope = Envelope.model_construct(
            seq=self._next_seq, sender=sender, recipient=recipient, payload=payload, tag=tag, enqueue_step=self.step
        )
        self._next_seq += 1
        self.scheduler.enqueue(envelope, self.step)

    def _record_delivery(self, envelope: Envelope, authentic: bool, dispatched: bool) -> None:
        self.history.record(
            Deliver.model_construct(step=self.step, envelope=envelope, authentic=authentic, dispatched=dispatched)
        )


def run_scenario(
    scenario: ScenarioConfig,
    seed: Optional[int] = None,
    policy: Optional[SchedulerPolicy] = None,
    step_limit: Optional[int] = None,
) -> History:
    """
    Run a scenario. Arguments left unset fall back to the scenario file and then to the configured defaults.

    :param scenario: The validated scenario.
    :param seed: Seed of the run.
    :param policy: Scheduling policy.
    :param step_limit: Step limit.
    :raises KindRoleMismatchError: If an adversary cannot replace the process it is assigned to.
    :raises StepLimitExceededError: If the run does not become quiescent within the step limit.
    :return: The history of the run.
    """
    seed = scenario.seed if seed is None else seed
    authenticator = Authenticator(seed)
    machines = build_machines(scenario, seed, authenticator)
    simulator = Simulator(
        scenario,
        machines,
        authenticator,
        seed,
        policy=policy or scenario.policy or config.simulator.policy,
        step_limit=step_limit or scenario.step_limit or config.simulator.step_limit,
        fairness_multiplier=scenario.fairness_multiplier or config.simulator.fairness_multiplier,
    )
    return simulator.run()
