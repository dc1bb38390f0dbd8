"""
End-to-End tests running the bundled scenarios through the simulator and the checkers.
"""

from test.e2e.conftest import E2ETestHelpers
from test.mock_data import BUNDLED_SCENARIOS, E2E_SEEDS

import pytest

from bdso_simulator.checkers.registry import evaluate
from bdso_simulator.core.exceptions import StepLimitExceededError
from bdso_simulator.schemas.scenario import load_scenario
from bdso_simulator.schemas.verdict import Outcome
from bdso_simulator.simnet.history import History, Snapshot
from bdso_simulator.simnet.simulator import run_scenario


class RunDSL:
    """Base class for tests running a scenario and checking its history."""

    _history: History

    def run(self, scenario, seed: int) -> None:
        """
        Runs a scenario with a seed.

        :param scenario: The validated scenario.
        :param seed: The seed.
        """
        self._history = run_scenario(scenario, seed=seed)

    def check_no_failures(self) -> None:
        """Checks that a prior call to `run` finished quiescent and violated none of the scenario's properties."""
        assert self._history.outcome == "quiescent"
        failures = [verdict for verdict in evaluate(self._history) if verdict.failed]
        assert not failures, failures

    def check_property(self, name: str, outcome: Outcome) -> None:
        """
        Checks the verdict of one property on the history of a prior call to `run`.

        :param name: The property.
        :param outcome: The expected outcome.
        """
        (verdict,) = evaluate(self._history, [name])
        assert verdict.verdict == outcome, verdict.witness


class TestBundledScenarios(RunDSL):
    """Tests for every bundled scenario over a few seeds."""

    @pytest.mark.parametrize("seed", E2E_SEEDS)
    @pytest.mark.parametrize("name", BUNDLED_SCENARIOS)
    def test_no_property_violated(self, name, seed):
        """Test a bundled scenario violates none of the properties it lists."""
        self.run(load_scenario(name), seed)
        self.check_no_failures()


class TestOutcomes(RunDSL):
    """Tests for properties that must hold with a definite outcome in specific scenarios."""

    def test_atomic_liveness_both_correct(self):
        """Test both atomic appends complete when both members are correct."""
        self.run(load_scenario("atomic_appends_both_correct"), 0)
        self.check_property("atomic", Outcome.PASS)
        assert len(self._history.emits("atomic_completed")) == 2

    def test_atomic_partner_crashing_after_issuing(self):
        """Test a correct member completes when its partner adds the request and then crashes."""
        self.run(load_scenario("atomic_adds_partner_crash"), 0)
        self.check_property("atomic", Outcome.PASS)
        assert [event.process for event in self._history.emits("atomic_completed")] == ["C0"]
        for object_id, payload in (("G1", b"pay-bob"), ("G2", b"ship-alice")):
            snapshots = [snapshot for snapshot in self._history.of_kind(Snapshot) if snapshot.object_id == object_id]
            assert snapshots
            assert all(payload in {record.payload for record in snapshot.records} for snapshot in snapshots)

    def test_atomic_partner_staying_silent(self):
        """Test a correct member never completes when its partner never adds the request."""
        self.run(load_scenario("atomic_adds_silent_partner"), 0)
        self.check_property("atomic", Outcome.PASS)
        assert not self._history.emits("atomic_completed")

    @pytest.mark.parametrize("name", ["bdso_f2", "swbdlo_f2"])
    def test_two_byzantine_servers(self, name):
        """Test an object tolerating two Byzantine servers keeps every correct replica equal."""
        self.run(load_scenario(name), 0)
        self.check_property("convergence", Outcome.PASS)
        self.check_property("get_soundness", Outcome.PASS)

    def test_sequential_oracle_checked(self):
        """Test a settled single-client run is compared against the sequential objects instead of being skipped."""
        self.run(load_scenario("sequential_oracle"), 0)
        self.check_property("sequential_equiv", Outcome.PASS)

    def test_brb_equivocation_not_delivered(self):
        """Test neither body of an origin splitting its broadcast between halves of the servers is delivered."""
        self.run(load_scenario("brb_equivocation"), 0)
        self.check_property("brb", Outcome.PASS)
        assert not [event for event in self._history.emits("brb_deliver") if event.origin == "S3"]


class TestDeterminism(RunDSL):
    """Tests for the reproducibility of runs."""

    def test_same_seed_same_trace(self):
        """Test two runs with the same seed produce byte identical traces."""
        scenario = load_scenario("bdso_basic")
        assert run_scenario(scenario, seed=4).to_jsonl() == run_scenario(scenario, seed=4).to_jsonl()

    def test_other_seed_other_trace(self):
        """Test the seed drives the run."""
        scenario = load_scenario("bdso_basic")
        assert run_scenario(scenario, seed=4).to_jsonl() != run_scenario(scenario, seed=5).to_jsonl()

    def test_step_limit(self):
        """Test a run abandoned at the step limit carries its partial history."""
        with pytest.raises(StepLimitExceededError) as exc:
            run_scenario(load_scenario("bdso_basic"), seed=0, step_limit=10)
        assert exc.value.history.outcome == "step_limit"


class TestMutations(RunDSL):
    """Tests that weakening an insertion threshold is caught by the checkers."""

    def test_gset_single_propagation_accepted(self):
        """Test a grow-only set inserting after a single propagation returns records nobody added."""
        data = E2ETestHelpers.bundled_scenario_data("bdso_byzantine_matrix/spurious_propagator")
        self.run(E2ETestHelpers.validate(data), 0)
        self.check_property("bec_a", Outcome.PASS)

        self.run(E2ETestHelpers.validate(E2ETestHelpers.with_object_overrides(data, "gs", insert_threshold=1)), 0)
        self.check_property("bec_a", Outcome.FAIL)

    def test_ledger_threshold_without_majority(self):
        """Test a ledger inserting after ⌊n/2⌋+f propagations binds two records to one index."""
        data = E2ETestHelpers.bundled_scenario_data("swbdlo_equivocate")
        self.run(E2ETestHelpers.validate(data), 0)
        self.check_property("index_uniqueness", Outcome.PASS)

        self.run(E2ETestHelpers.validate(E2ETestHelpers.with_object_overrides(data, "lg", insert_threshold=3)), 0)
        self.check_property("index_uniqueness", Outcome.FAIL)
