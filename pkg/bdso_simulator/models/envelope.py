"""
Module for defining the authenticated envelopes that carry messages between simulated processes.
"""

from pydantic import BaseModel, ConfigDict, Field

from bdso_simulator.core.process_id import ProcessId


class AuthTag(BaseModel):
    """
    Model for the authenticity tag attached to every envelope.
    """

    model_config = ConfigDict(frozen=True)

    signer: ProcessId
    # 64 bit fingerprint of the signed payload
    digest: int = Field(ge=0)


class Envelope(BaseModel):
    """
    Model for a message in flight between two processes.
    """

    model_config = ConfigDict(frozen=True, ser_json_bytes="base64", val_json_bytes="base64")

    seq: int = Field(ge=0)
    sender: ProcessId
    recipient: ProcessId
    payload: bytes
    tag: AuthTag
    enqueue_step: int = Field(ge=0)
