"""
Module for defining the records stored in grow-only sets and ledgers.
"""

from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from bdso_simulator.auth.authenticator import content_digest
from bdso_simulator.core.consts import MAX_RECORD_PAYLOAD_BYTES
from bdso_simulator.core.process_id import ProcessId


class Record(BaseModel):
    """
    Model for an opaque record. Two records are equal only if both their creator and payload are equal.
    """

    model_config = ConfigDict(frozen=True, ser_json_bytes="base64", val_json_bytes="base64")

    creator: ProcessId
    payload: bytes = Field(min_length=1, max_length=MAX_RECORD_PAYLOAD_BYTES)

    @property
    def sort_key(self) -> tuple:
        """Key giving records a deterministic order."""
        return (self.creator.sort_key, self.payload)


class IndexedRecord(BaseModel):
    """
    Model for a ledger record paired with its 1-based index.
    """

    model_config = ConfigDict(frozen=True, ser_json_bytes="base64", val_json_bytes="base64")

    k: int = Field(ge=1)
    rho: bytes = Field(min_length=1, max_length=MAX_RECORD_PAYLOAD_BYTES)

    @property
    def sort_key(self) -> tuple[int, bytes]:
        """Key ordering records by index and then payload."""
        return (self.k, self.rho)


def sorted_records(records) -> list:
    """
    Sort records or indexed records into their deterministic order.

    :param records: Iterable of `Record` or `IndexedRecord`.
    :return: The sorted list.
    """
    return sorted(records, key=lambda record: record.sort_key)


class AtomicRequestRecord(BaseModel):
    """
    Model for the request a client adds to a smart G-Set to ask for one half of an atomic pair.
    """

    model_config = ConfigDict(frozen=True, ser_json_bytes="base64", val_json_bytes="base64")

    requester: ProcessId
    group: tuple[ProcessId, ProcessId]
    own_record: Record
    target: str = Field(min_length=1)
    counterpart_record: Record

    @field_validator("group")
    @classmethod
    def validate_group(cls, group: tuple[ProcessId, ProcessId]) -> tuple[ProcessId, ProcessId]:
        """
        Validator for the `group` field that puts it in canonical order.

        :param group: The two members of the group.
        :raises ValueError: If both members are the same process.
        :return: The members sorted by role and index.
        """
        if group[0] == group[1]:
            raise ValueError("An atomic group must contain two distinct processes")
        first, second = sorted(group, key=lambda process_id: process_id.sort_key)
        return (first, second)

    @model_validator(mode="after")
    def validate_membership(self) -> "AtomicRequestRecord":
        """
        Validator checking that the requester belongs to the group and that each record was created by the matching
        member.

        :raises ValueError: If any of the checks fail.
        :return: The validated model.
        """
        if self.requester not in self.group:
            raise ValueError("The requester must be a member of the group")
        if self.own_record.creator != self.requester:
            raise ValueError("The requester's record must be created by the requester")
        if self.counterpart_record.creator != self.partner:
            raise ValueError("The counterpart record must be created by the partner")
        return self

    @property
    def partner(self) -> ProcessId:
        """The other member of the group."""
        return self.group[1] if self.group[0] == self.requester else self.group[0]

    def encode(self) -> bytes:
        """Canonical byte encoding, used as the payload of the smart G-Set record."""
        return self.model_dump_json().encode()

    @property
    def digest(self) -> int:
        """Content digest of the canonical encoding."""
        return content_digest(self.encode())

    def to_record(self) -> Record:
        """
        Wrap the request into the record added to the smart G-Set.

        :return: A record created by the requester whose payload is the encoded request.
        """
        return Record(creator=self.requester, payload=self.encode())

    @classmethod
    def from_record(cls, record: Record) -> Optional["AtomicRequestRecord"]:
        """
        Decode a smart G-Set record back into an atomic request.

        :param record: A record from a smart G-Set replica.
        :return: The request, or `None` if the record does not carry a well formed request of its creator.
        """
        try:
            request = cls.model_validate_json(record.payload)
        except ValidationError:
            return None
        if request.requester != record.creator:
            return None
        return request

    @property
    def match_key(self) -> tuple:
        """Key shared by a request and its mirror image."""
        return (self.group, tuple(sorted([self.own_record.sort_key, self.counterpart_record.sort_key])))

    def mirrors(self, other: "AtomicRequestRecord") -> bool:
        """
        Check whether another request is the partner's half of the same atomic pair.

        :param other: The candidate request.
        :return: Whether `other` was issued by the partner for the same two records.
        """
        return (
            other.requester == self.partner
            and other.group == self.group
            and other.own_record == self.counterpart_record
            and other.counterpart_record == self.own_record
        )


def pair_id(first: AtomicRequestRecord, second: AtomicRequestRecord) -> str:
    """
    Identity of a matched pair, independent of the order of its two requests.

    :param first: One request of the pair.
    :param second: The mirror request.
    :return: The two request digests in hex, sorted and joined.
    """
    return "-".join(sorted(f"{request.digest:016x}" for request in (first, second)))
