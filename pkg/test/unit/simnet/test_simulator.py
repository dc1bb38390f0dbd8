"""
Unit tests for the message path of the `Simulator`.
"""

from unittest.mock import patch

from bdso_simulator.models.messages import decode_message
from bdso_simulator.schemas.scenario import load_scenario
from bdso_simulator.simnet.history import Deliver, History
from bdso_simulator.simnet.simulator import run_scenario


class SimulatorDSL:
    """Base class for tests inspecting a run of the bundled basic grow-only set scenario."""

    _history: History
    _decode_calls: int

    def call_run(self, seed: int = 0) -> None:
        """
        Runs the scenario while counting payload decodes.

        :param seed: The seed.
        """
        with patch("bdso_simulator.simnet.simulator.decode_message", wraps=decode_message) as decode:
            self._history = run_scenario(load_scenario("bdso_basic"), seed=seed)
        self._decode_calls = decode.call_count

    def dispatched(self) -> list[Deliver]:
        """Delivery events of a prior call to `call_run` whose message reached its recipient."""
        return [event for event in self._history.of_kind(Deliver) if event.dispatched]


class TestMessagePath(SimulatorDSL):
    """Tests for the work done per delivered envelope."""

    def test_each_payload_decoded_once(self):
        """Test a payload delivered to several recipients is decoded a single time."""
        self.call_run()
        payloads = {event.envelope.payload for event in self.dispatched()}
        assert self._decode_calls == len(payloads)
        assert self._decode_calls < len(self.dispatched())

    def test_group_send_signed_once(self):
        """Test the copies of a message sent to a group share their payload and tag."""
        self.call_run()
        copies: dict[tuple, set] = {}
        for event in self._history.of_kind(Deliver):
            envelope = event.envelope
            copies.setdefault((envelope.sender, envelope.payload), set()).add(envelope.tag)
        assert all(len(tags) == 1 for tags in copies.values())

    def test_trace_round_trip(self):
        """Test a trace of envelopes built by the simulator reads back as the same history."""
        self.call_run(seed=1)
        text = self._history.to_jsonl()
        assert History.from_jsonl(text).to_jsonl() == text
