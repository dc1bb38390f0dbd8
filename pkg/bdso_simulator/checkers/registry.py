"""
Module for looking up property checkers by name and evaluating them on a history.
"""

import logging
from typing import Callable, Iterable, Optional

from bdso_simulator.checkers.properties import (
    check_atomic,
    check_authentication,
    check_bc,
    check_bec_a,
    check_bec_b_quiescent,
    check_brb,
    check_convergence,
    check_get_soundness,
    check_index_uniqueness,
    check_sequential_equiv,
    check_strong_prefix,
)
from bdso_simulator.core.exceptions import UnknownPropertyError
from bdso_simulator.schemas.verdict import Verdict
from bdso_simulator.simnet.history import History

logger = logging.getLogger()

PROPERTIES: dict[str, Callable[[History], Verdict]] = {
    "bc": check_bc,
    "bec_a": check_bec_a,
    "bec_b": check_bec_b_quiescent,
    "strong_prefix": check_strong_prefix,
    "atomic": check_atomic,
    "sequential_equiv": check_sequential_equiv,
    "convergence": check_convergence,
    "index_uniqueness": check_index_uniqueness,
    "brb": check_brb,
    "authentication": check_authentication,
    "get_soundness": check_get_soundness,
}


def resolve_properties(names: Optional[Iterable[str]]) -> list[str]:
    """
    Validate property names.

    :param names: Requested names, or `None`/empty for every registered property.
    :raises UnknownPropertyError: If a name is not registered.
    :return: The names to evaluate, in the order given.
    """
    names = list(names or PROPERTIES)
    unknown = [name for name in names if name not in PROPERTIES]
    if unknown:
        raise UnknownPropertyError(f"Unknown properties {unknown}, expected some of {sorted(PROPERTIES)}")
    return names


def evaluate(history: History, names: Optional[Iterable[str]] = None) -> list[Verdict]:
    """
    Run checkers on a history.

    :param history: The history.
    :param names: Properties to check. Defaults to the properties listed by the scenario, or every property if it
        lists none.
    :raises UnknownPropertyError: If a name is not registered.
    :return: One verdict per property, in the order requested.
    """
    verdicts = []
    for name in resolve_properties(names or history.scenario.properties):
        verdict = PROPERTIES[name](history)
        logger.debug("Property '%s' on seed %d: %s", name, history.seed, verdict.verdict)
        verdicts.append(verdict)
    return verdicts
