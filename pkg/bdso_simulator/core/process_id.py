"""
Module for providing the `ProcessId` type identifying simulated servers and clients.
"""

import re
from bdso_simulator.core.compat import StrEnum
from typing import Any

from pydantic import GetCoreSchemaHandler
from pydantic_core import CoreSchema, core_schema

from bdso_simulator.core.exceptions import InvalidProcessIdError


class Role(StrEnum):
    """
    Enumeration for the roles a simulated process can have. The value is the prefix used when rendering an ID.
    """

    SERVER = "S"
    CLIENT = "C"


class ProcessId(str):
    """
    Identifier of a simulated process, rendered as its role prefix followed by its index e.g. `S3` or `C1`.

    Being a `str` keeps IDs hashable, cheap to compare and rendered verbatim in traces.
    """

    _PATTERN = re.compile(r"^([SC])(0|[1-9][0-9]*)$")

    def __new__(cls, value: str):
        """
        Construct a `ProcessId` from a string.

        :param value: The string value to be validated, representing the process ID.
        :raises InvalidProcessIdError: If the string value is an invalid process ID.
        """
        if not isinstance(value, str):
            raise InvalidProcessIdError(f"Process ID value '{value}' must be a string")

        if not cls._PATTERN.match(value):
            raise InvalidProcessIdError(f"Invalid process ID value '{value}'")

        return super().__new__(cls, value)

    @classmethod
    def of(cls, role: Role, index: int) -> "ProcessId":
        """
        Construct a `ProcessId` from a role and an index.

        :param role: Role of the process.
        :param index: Non-negative index of the process within its role.
        :return: The constructed `ProcessId`.
        """
        return cls(f"{role.value}{index}")

    @property
    def role(self) -> Role:
        """Role of the process."""
        return Role(self[0])

    @property
    def index(self) -> int:
        """Index of the process within its role."""
        return int(self[1:])

    @property
    def sort_key(self) -> tuple[str, int]:
        """Key ordering IDs by role and then numerically by index, so `S2` sorts before `S10`."""
        return (self[0], int(self[1:]))

    @classmethod
    def __get_pydantic_core_schema__(cls, _source_type: Any, _handler: GetCoreSchemaHandler) -> CoreSchema:
        return core_schema.with_info_plain_validator_function(
            cls.validate, serialization=core_schema.to_string_ser_schema()
        )

    @classmethod
    def validate(cls, value: Any, _: core_schema.ValidationInfo) -> "ProcessId":
        """
        Validate if the value is a valid process ID.

        :param value: The value to be validated.
        :param _: Unused
        :return: The validated `ProcessId`.
        """
        if isinstance(value, ProcessId):
            return value
        return cls(value)


def sorted_ids(process_ids) -> list[ProcessId]:
    """
    Sort process IDs by role and index.

    :param process_ids: Iterable of process IDs.
    :return: The sorted list.
    """
    return sorted(process_ids, key=lambda process_id: process_id.sort_key)


def server_ids(start: int, count: int) -> list[ProcessId]:
    """
    Build a contiguous block of server IDs.

    :param start: Index of the first server.
    :param count: Number of servers in the block.
    :return: List of server IDs `S{start}` to `S{start + count - 1}`.
    """
    return [ProcessId.of(Role.SERVER, index) for index in range(start, start + count)]
