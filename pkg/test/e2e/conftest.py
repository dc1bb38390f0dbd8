"""
Module providing test fixtures for the e2e tests.
"""

import json
from pathlib import Path
from typing import Any

import pytest

from bdso_simulator.schemas.scenario import ScenarioConfig, bundled_scenario_path


@pytest.fixture(name="trace_dir")
def fixture_trace_dir(tmp_path: Path) -> Path:
    """
    Fixture for the directory the traces of a test are written to.

    :return: The directory path, not yet created.
    """
    return tmp_path / "traces"


class E2ETestHelpers:
    """
    A utility class containing common helper methods for e2e tests

    This class provides a set of static methods that encapsulate common functionality frequently used in the e2e tests
    """

    @staticmethod
    def bundled_scenario_data(name: str) -> dict:
        """Reads the raw data of a bundled scenario.

        :param name: Name of the bundled scenario.
        :return: The scenario data as it is in the file.
        """
        return json.loads(bundled_scenario_path(name).read_text(encoding="utf-8"))

    @staticmethod
    def with_object_overrides(data: dict, object_id: str, **overrides: Any) -> dict:
        """Returns a copy of scenario data with fields of one object replaced.

        :param data: The scenario data.
        :param object_id: ID of the object to change.
        :param overrides: Fields to set on the object.
        :return: The changed scenario data.
        """
        objects = [{**spec, **overrides} if spec["id"] == object_id else spec for spec in data["objects"]]
        return {**data, "objects": objects}

    @staticmethod
    def validate(data: dict) -> ScenarioConfig:
        """Validates scenario data.

        :param data: The scenario data.
        :return: The validated scenario.
        """
        return ScenarioConfig.model_validate(data)

    @staticmethod
    def write_scenario(directory: Path, data: dict) -> Path:
        """Writes scenario data to a file.

        :param directory: Directory to write the file into.
        :param data: The scenario data.
        :return: Path of the written file.
        """
        path = directory / f"{data['name']}.json"
        path.write_text(json.dumps(data), encoding="utf-8")
        return path
