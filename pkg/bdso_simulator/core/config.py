"""
Module for the overall configuration for the simulator.
"""

from bdso_simulator.core.compat import StrEnum
from pathlib import Path

from pydantic import BaseModel, Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class SchedulerPolicy(StrEnum):
    """
    Enumeration for the policies the scheduler can use to pick the next step.
    """

    FAIR = "fair"
    FIFO = "fifo"
    ADVERSARY = "adversary"


class SimulatorConfig(BaseModel):
    """
    Configuration model for the defaults of a simulation run. Scenario files and command line flags override these.
    """

    step_limit: int = Field(default=500_000, gt=0)
    policy: SchedulerPolicy = SchedulerPolicy.FAIR
    # Fairness window is this multiple of the pending queue length when an envelope is enqueued
    fairness_multiplier: int = Field(default=4, gt=0)
    strict_bounds: bool = True


class RunnerConfig(BaseModel):
    """
    Configuration model for the scenario runner.
    """

    out_dir: Path = Path("traces")
    workers: int = Field(default=1, gt=0)


class Config(BaseSettings):
    """
    Overall configuration model for the simulator.

    It includes attributes for the simulator and runner configurations. The class inherits from `BaseSettings` and
    automatically reads environment variables. If values are not passed in form of system environment variables at
    runtime, it will attempt to read them from the .env file.
    """

    simulator: SimulatorConfig = SimulatorConfig()
    runner: RunnerConfig = RunnerConfig()
    model_config = SettingsConfigDict(
        env_file=Path(__file__).parent.parent / ".env",
        env_file_encoding="utf-8",
        env_nested_delimiter="__",
        hide_input_in_errors=True,
    )


config = Config()
