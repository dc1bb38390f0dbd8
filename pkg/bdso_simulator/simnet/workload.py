"""
Module for expanding the workload of a scenario into per-client operation queues.
"""

from collections import deque

import numpy as np

from bdso_simulator.core.consts import RNG_STREAM_WORKLOAD
from bdso_simulator.core.process_id import ProcessId, sorted_ids
from bdso_simulator.schemas.scenario import ObjectKind, OperationKind, RandomWorkload, ScenarioConfig, WorkloadOperation


def _random_operations(
    scenario: ScenarioConfig, generator: RandomWorkload, client: ProcessId, rng: np.random.Generator
) -> list[WorkloadOperation]:
    spec = scenario.find_object(generator.object)
    update = OperationKind.APPEND if spec.kind == ObjectKind.SWBDLO else OperationKind.ADD
    may_update = spec.kind != ObjectKind.SWBDLO or client == spec.writer

    if generator.max_operations is not None:
        length = int(rng.integers(1, generator.max_operations + 1))
        kinds = [update if may_update and rng.random() < 0.5 else OperationKind.GET for _ in range(length)]
    else:
        adds = generator.adds_per_client if may_update else 0
        kinds = [update] * adds + [OperationKind.GET] * generator.gets_per_client
        kinds = [kinds[index] for index in rng.permutation(len(kinds))]

    operations = []
    for index, kind in enumerate(kinds):
        payload = f"{client}:{spec.id}:{index}" if kind != OperationKind.GET else None
        operations.append(WorkloadOperation(client=client, object=spec.id, op=kind, payload=payload))
    return operations


def build_workload(scenario: ScenarioConfig, seed: int) -> dict[ProcessId, deque[WorkloadOperation]]:
    """
    Build the main workload: the scripted operations of each client followed by its random operations.

    :param scenario: The validated scenario.
    :param seed: Seed of the run.
    :return: Map of client to its queue of operations.
    """
    queues: dict[ProcessId, deque[WorkloadOperation]] = {client: deque() for client in scenario.client_ids()}
    for operation in scenario.workload.script:
        queues[operation.client].append(operation)
    for index, generator in enumerate(scenario.workload.random):
        rng = np.random.default_rng([seed, RNG_STREAM_WORKLOAD, index])
        for client in sorted_ids(generator.clients or scenario.client_ids()):
            queues[client].extend(_random_operations(scenario, generator, client, rng))
    return queues


def build_final_gets(scenario: ScenarioConfig) -> dict[ProcessId, list[WorkloadOperation]]:
    """
    Build the gets issued once the main workload reached quiescence.

    :param scenario: The validated scenario.
    :return: Map of client to its final gets.
    """
    final: dict[ProcessId, list[WorkloadOperation]] = {}
    for final_gets in scenario.workload.final_gets:
        for client in sorted_ids(final_gets.clients or scenario.client_ids()):
            final.setdefault(client, []).extend(
                WorkloadOperation(client=client, object=final_gets.object, op=OperationKind.GET)
                for _ in range(final_gets.per_client)
            )
    return final
