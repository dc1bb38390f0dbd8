"""
Unit tests for the `History` class and its trace format.
"""

from test.mock_data import BDSO_SCENARIO_DATA, RECORD_DATA_A

import pytest

from bdso_simulator.core.consts import NOTE_INSERT
from bdso_simulator.core.exceptions import TraceCorruptError, UnknownOperationError
from bdso_simulator.core.process_id import ProcessId
from bdso_simulator.models.operation import OpRef
from bdso_simulator.models.record import Record
from bdso_simulator.schemas.scenario import OperationKind, ScenarioConfig
from bdso_simulator.simnet.history import (
    History,
    Invocation,
    LocalEmit,
    Quiescence,
    Response,
    RunFinished,
    RunStarted,
    precedes,
)

ADD_OP = OpRef(object_id="gs", client=ProcessId("C0"), c=1)
GET_OP = OpRef(object_id="gs", client=ProcessId("C1"), c=1)


@pytest.fixture(name="history")
def fixture_history() -> History:
    """
    Fixture to create a short history of an add followed by a get on a grow-only set.

    :return: The history.
    """
    record = Record(**RECORD_DATA_A)
    return History(
        [
            RunStarted(step=0, scenario=ScenarioConfig.model_validate(BDSO_SCENARIO_DATA), seed=3),
            Invocation(step=1, op=ADD_OP, operation=OperationKind.ADD, record=record),
            LocalEmit(step=5, process=ProcessId("S0"), note=NOTE_INSERT, object_id="gs", record=record),
            Response(step=7, op=ADD_OP, ack=True),
            Invocation(step=8, op=GET_OP, operation=OperationKind.GET),
            Response(step=12, op=GET_OP, records=[record]),
            Quiescence(step=12),
            RunFinished(step=12, outcome="quiescent"),
        ]
    )


class TestLookups:
    """Tests for the lookups used by the checkers."""

    def test_run_started(self, history):
        """Test the scenario, seed and outcome are read from the history."""
        assert history.scenario.name == "unit_bdso"
        assert history.seed == 3
        assert history.outcome == "quiescent"
        assert history.quiescence_position == 6

    def test_operations(self, history):
        """Test every invocation is paired with its response."""
        pairs = history.operations()
        assert [invocation.op for invocation, _ in pairs] == [ADD_OP, GET_OP]
        assert pairs[1][1].records == [Record(**RECORD_DATA_A)]

    def test_emits(self, history):
        """Test local events can be filtered on their note."""
        assert len(history.emits(NOTE_INSERT)) == 1
        assert not history.emits("other")

    def test_precedes(self, history):
        """Test the real-time order of two operations."""
        assert precedes(history, ADD_OP, GET_OP)
        assert not precedes(history, GET_OP, ADD_OP)

    def test_unknown_operation(self, history):
        """Test looking up an operation that was never invoked."""
        with pytest.raises(UnknownOperationError):
            history.position_of_invocation(OpRef(object_id="gs", client=ProcessId("C0"), c=9))


class TestTrace:
    """Tests for writing and reading traces."""

    def test_jsonl_round_trip(self, history):
        """Test a history read back from its trace renders the same trace."""
        text = history.to_jsonl()
        assert len(text.splitlines()) == len(history.events)
        assert History.from_jsonl(text).to_jsonl() == text

    def test_write_and_read(self, history, tmp_path):
        """Test writing a trace into a directory that does not exist yet."""
        path = tmp_path / "traces" / "unit.jsonl"
        history.write(path)
        assert History.read(path).events == history.events

    def test_corrupt_line(self, history):
        """Test a trace with an invalid line is rejected, naming the line."""
        lines = history.to_jsonl().splitlines()
        lines[1] = '{"kind": "nope", "step": 1}'
        with pytest.raises(TraceCorruptError, match="Line 2"):
            History.from_jsonl("\n".join(lines))

    def test_missing_run_started(self, history):
        """Test a trace that does not start with `run_started` is rejected."""
        text = "".join(history.to_jsonl().splitlines(keepends=True)[1:])
        with pytest.raises(TraceCorruptError, match="must start with a run_started"):
            History.from_jsonl(text)

    def test_missing_file(self, tmp_path):
        """Test reading a trace that does not exist."""
        with pytest.raises(TraceCorruptError, match="Cannot read trace"):
            History.read(tmp_path / "missing.jsonl")
