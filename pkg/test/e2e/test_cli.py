"""
End-to-End tests for the `bdso-sim` command line interface.
"""

import json
from pathlib import Path
from test.e2e.conftest import E2ETestHelpers
from test.mock_data import BDSO_SCENARIO_DATA

import pytest

from bdso_simulator.main import EXIT_FAILED, EXIT_INVALID, EXIT_OK, main


class CliDSL:
    """Base class for tests invoking the command line interface."""

    trace_dir: Path
    _exit_code: int
    _lines: list[dict]
    _capsys: pytest.CaptureFixture

    @pytest.fixture(autouse=True)
    def setup(self, trace_dir, capsys):
        """Setup fixtures"""
        self.trace_dir = trace_dir
        self._capsys = capsys

    def call_main(self, *argv: str) -> None:
        """
        Runs the command line interface and captures its exit code and the JSON lines it printed.

        :param argv: The command line arguments.
        """
        with pytest.raises(SystemExit) as exc:
            main(list(argv))
        self._exit_code = exc.value.code
        output = self._capsys.readouterr().out
        self._lines = [json.loads(line) for line in output.splitlines() if line.strip()]

    def call_run(self, config: str, *extra: str) -> None:
        """
        Runs the `run` command writing traces to the trace directory.

        :param config: Scenario path or bundled scenario name.
        :param extra: Further arguments.
        """
        self.call_main("run", "--config", config, "--out", str(self.trace_dir), *extra)

    def check_exit_code(self, expected: int) -> None:
        """
        Checks the exit code of a prior call to `call_main`.

        :param expected: The expected exit code.
        """
        assert self._exit_code == expected


class TestRun(CliDSL):
    """Tests for the `run` command."""

    def test_run_bundled_scenario(self):
        """Test running a bundled scenario over two seeds writes a trace and prints verdicts per seed."""
        self.call_run("bdso_basic", "--seeds", "0..1")
        self.check_exit_code(EXIT_OK)
        assert sorted(path.name for path in self.trace_dir.iterdir()) == [
            "bdso_basic-seed0.jsonl",
            "bdso_basic-seed1.jsonl",
        ]
        assert {line["seed"] for line in self._lines} == {0, 1}
        assert len(self._lines) == 14

    def test_run_parallel_seeds(self):
        """Test running seeds in worker processes prints the same verdicts in the same order."""
        self.call_run("bdso_basic", "--seeds", "0..3")
        sequential = self._lines
        self.call_run("bdso_basic", "--seeds", "0..3", "--workers", "2")
        self.check_exit_code(EXIT_OK)
        assert self._lines == sequential
        assert len(list(self.trace_dir.iterdir())) == 4

    def test_run_selected_properties(self):
        """Test only the requested properties are printed."""
        self.call_run("bdso_basic", "--properties", "bc,authentication")
        self.check_exit_code(EXIT_OK)
        assert [line["property"] for line in self._lines] == ["bc", "authentication"]

    def test_run_violating_scenario(self, tmp_path):
        """Test a run violating a property exits with 1."""
        data = E2ETestHelpers.bundled_scenario_data("bdso_byzantine_matrix/spurious_propagator")
        data = E2ETestHelpers.with_object_overrides(data, "gs", insert_threshold=1)
        self.call_run(str(E2ETestHelpers.write_scenario(tmp_path, data)), "--properties", "bec_a")
        self.check_exit_code(EXIT_FAILED)
        assert self._lines[0]["verdict"] == "FAIL"

    def test_run_hitting_step_limit(self):
        """Test a run abandoned at the step limit exits with 1 and still writes its partial trace."""
        self.call_run("bdso_basic", "--step-limit", "10", "--properties", "bc")
        self.check_exit_code(EXIT_FAILED)
        assert (self.trace_dir / "bdso_basic-seed0.jsonl").exists()

    def test_run_insufficient_servers(self, tmp_path):
        """Test a scenario violating `n >= 3f+1` is rejected in strict mode."""
        path = E2ETestHelpers.write_scenario(tmp_path, {**BDSO_SCENARIO_DATA, "n": 3})
        self.call_run(str(path), "--strict-bounds", "true")
        self.check_exit_code(EXIT_INVALID)

    def test_run_oversized_payload(self, tmp_path):
        """Test a scenario adding a payload too large for a record is rejected before running."""
        script = [{"client": "C0", "object": "gs", "op": "add", "payload": "a" * 70000}]
        path = E2ETestHelpers.write_scenario(tmp_path, {**BDSO_SCENARIO_DATA, "workload": {"script": script}})
        self.call_run(str(path))
        self.check_exit_code(EXIT_INVALID)
        assert not self._lines

    def test_run_missing_scenario(self):
        """Test running a scenario that does not exist."""
        self.call_run("does_not_exist")
        self.check_exit_code(EXIT_INVALID)

    @pytest.mark.parametrize("argument", [("--properties", "nope"), ("--seeds", "3..1"), ("--seeds", "x")])
    def test_run_invalid_arguments(self, argument):
        """Test invalid arguments are a usage error."""
        self.call_run("bdso_basic", *argument)
        self.check_exit_code(2)


class TestCheck(CliDSL):
    """Tests for the `check` command."""

    def test_check_trace(self):
        """Test re-checking a stored trace gives the verdicts of the run."""
        self.call_run("bdso_basic", "--seeds", "2")
        run_lines = [{key: value for key, value in line.items() if key != "seed"} for line in self._lines]
        self.call_main("check", str(self.trace_dir / "bdso_basic-seed2.jsonl"))
        self.check_exit_code(EXIT_OK)
        assert self._lines == run_lines

    def test_check_selected_properties(self):
        """Test re-checking a stored trace for one property."""
        self.call_run("bdso_basic")
        self.call_main("check", str(self.trace_dir / "bdso_basic-seed0.jsonl"), "--properties", "convergence")
        assert [line["property"] for line in self._lines] == ["convergence"]

    def test_check_corrupt_trace(self, tmp_path):
        """Test checking a trace that is not a history."""
        path = tmp_path / "corrupt.jsonl"
        path.write_text("not json\n", encoding="utf-8")
        self.call_main("check", str(path))
        self.check_exit_code(EXIT_INVALID)
