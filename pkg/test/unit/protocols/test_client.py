"""
Unit tests for the correct client process.
"""

from test.mock_data import ATOMIC_APPENDS_SCENARIO_DATA, BDSO_SCENARIO_DATA

import numpy as np
import pytest

from bdso_simulator.core.exceptions import MalformedOperationError
from bdso_simulator.core.process_id import ProcessId
from bdso_simulator.protocols.base import Invoke, Send
from bdso_simulator.protocols.client import ClientMachine
from bdso_simulator.protocols.registry import ObjectRegistry
from bdso_simulator.schemas.scenario import OperationKind, ScenarioConfig, WorkloadOperation


class ClientMachineDSL:
    """Base class for `ClientMachine` tests."""

    client: ClientMachine
    _effects: list

    def mock_client(self, scenario_data: dict) -> None:
        """
        Creates client `C0` for the objects of a scenario.

        :param scenario_data: The scenario data.
        """
        registry = ObjectRegistry.from_scenario(ScenarioConfig.model_validate(scenario_data))
        self.client = ClientMachine(ProcessId("C0"), registry, np.random.default_rng(0))

    def call_invoke(self, **fields) -> None:
        """
        Invokes an operation of `C0` built without validation, as a workload mutated after loading would be.

        :param fields: Fields of the operation.
        """
        self._effects = self.client.invoke(WorkloadOperation.model_construct(client=ProcessId("C0"), **fields))

    def check_invoke_malformed(self, **fields) -> None:
        """
        Checks that invoking an operation fails as malformed and leaves the client idle.

        :param fields: Fields of the operation.
        """
        with pytest.raises(MalformedOperationError):
            self.call_invoke(**fields)
        assert not self.client.busy


class TestInvoke(ClientMachineDSL):
    """Tests for invoking operations."""

    def test_add(self):
        """Test an add records its invocation and sends to 2f+1 servers."""
        self.mock_client(BDSO_SCENARIO_DATA)
        self.call_invoke(object="gs", op=OperationKind.ADD, payload="a")
        assert isinstance(self._effects[0], Invoke)
        assert len([effect for effect in self._effects if isinstance(effect, Send)]) == 3
        assert self.client.busy

    def test_oversized_add(self):
        """Test an add whose payload does not fit in a record is rejected without starting an operation."""
        self.mock_client(BDSO_SCENARIO_DATA)
        self.check_invoke_malformed(object="gs", op=OperationKind.ADD, payload="a" * 70000)

    def test_oversized_atomic_request(self):
        """Test an atomic request too large for one smart G-Set record is rejected without starting an operation."""
        self.mock_client(ATOMIC_APPENDS_SCENARIO_DATA)
        self.check_invoke_malformed(
            object="sg",
            op=OperationKind.ATOMIC_APPENDS,
            payload="x" * 30000,
            target="L1",
            partner=ProcessId("C1"),
            counterpart="y" * 30000,
        )

    def test_operation_after_rejection(self):
        """Test a client can invoke again after an operation was rejected."""
        self.mock_client(BDSO_SCENARIO_DATA)
        self.check_invoke_malformed(object="gs", op=OperationKind.ADD, payload="a" * 70000)
        self.call_invoke(object="gs", op=OperationKind.GET)
        assert self.client.busy
