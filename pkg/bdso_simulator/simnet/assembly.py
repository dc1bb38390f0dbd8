"""
Module for building the state machine of every process of a scenario.
"""

import logging

import numpy as np

from bdso_simulator.auth.authenticator import Authenticator
from bdso_simulator.core.consts import RNG_STREAM_ADVERSARY, RNG_STREAM_CLIENT, RNG_STREAM_SERVER
from bdso_simulator.core.process_id import ProcessId
from bdso_simulator.protocols.adversary import make_adversary
from bdso_simulator.protocols.atomic import LedgerStubServer, SbdsoServer
from bdso_simulator.protocols.base import ProcessStateMachine
from bdso_simulator.protocols.bdso import BdsoServer
from bdso_simulator.protocols.brb import BrbServer
from bdso_simulator.protocols.client import ClientMachine
from bdso_simulator.protocols.registry import ObjectRegistry, ObjectView
from bdso_simulator.protocols.swbdlo import SwServer
from bdso_simulator.schemas.scenario import ObjectKind, ScenarioConfig

logger = logging.getLogger()


def _server_recipe(
    server: ProcessId, view: ObjectView, registry: ObjectRegistry, authenticator: Authenticator, seed: int
) -> tuple[type, dict]:
    kwargs: dict = {"process_id": server, "view": view}
    match view.kind:
        case ObjectKind.BRB:
            return BrbServer, kwargs
        case ObjectKind.LEDGER_STUB:
            return LedgerStubServer, kwargs
        case ObjectKind.BDSO:
            return BdsoServer, {**kwargs, "verifier": authenticator.verify}
        case ObjectKind.SWBDLO:
            return SwServer, {**kwargs, "verifier": authenticator.verify}
        case _:
            rng = np.random.default_rng([seed, RNG_STREAM_SERVER, server.index])
            return SbdsoServer, {**kwargs, "verifier": authenticator.verify, "registry": registry, "rng": rng}


def build_machines(
    scenario: ScenarioConfig, seed: int, authenticator: Authenticator
) -> dict[ProcessId, ProcessStateMachine]:
    """
    Build the machines of every server and client, replacing the Byzantine ones by their adversary.

    :param scenario: The validated scenario.
    :param seed: Seed of the run.
    :param authenticator: The run's authenticator, whose `verify` servers use on relayed requests.
    :raises KindRoleMismatchError: If an adversary cannot replace the process it is assigned to.
    :return: Map of process ID to machine.
    """
    registry = ObjectRegistry.from_scenario(scenario)
    recipes: dict[ProcessId, tuple[type, dict]] = {}
    for view in registry.views():
        for server in view.servers:
            recipes[server] = _server_recipe(server, view, registry, authenticator, seed)
    for client in scenario.client_ids():
        rng = np.random.default_rng([seed, RNG_STREAM_CLIENT, client.index])
        recipes[client] = (ClientMachine, {"process_id": client, "registry": registry, "rng": rng})

    machines: dict[ProcessId, ProcessStateMachine] = {}
    for index, (process_id, (honest_cls, kwargs)) in enumerate(recipes.items()):
        assignment = scenario.adversary_for(process_id)
        if assignment is None:
            machines[process_id] = honest_cls(**kwargs)
            continue
        rng = np.random.default_rng([seed, RNG_STREAM_ADVERSARY, index])
        machines[process_id] = make_adversary(
            assignment, honest_cls, kwargs, rng, authenticator.signer_for(process_id)
        )
    logger.debug("Built %d machines for scenario '%s'", len(machines), scenario.name)
    return machines
