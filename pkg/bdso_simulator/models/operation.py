"""
Module for defining references to client operations.
"""

from pydantic import BaseModel, ConfigDict, Field

from bdso_simulator.core.process_id import ProcessId


class OpRef(BaseModel):
    """
    Model identifying one operation: the `c`-th operation a client invoked on an object.
    """

    model_config = ConfigDict(frozen=True)

    object_id: str
    client: ProcessId
    c: int = Field(ge=1)

    def __str__(self) -> str:
        return f"{self.client}:{self.object_id}#{self.c}"
