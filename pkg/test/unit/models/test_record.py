"""
Unit tests for the record models.
"""

from test.mock_data import RECORD_DATA_A, RECORD_DATA_B, RECORD_DATA_C1

import pytest
from pydantic import ValidationError

from bdso_simulator.models.record import AtomicRequestRecord, IndexedRecord, Record, pair_id, sorted_records


def make_request(requester: str = "C0", own: dict = None, counterpart: dict = None) -> AtomicRequestRecord:
    """
    Build an atomic request of `C0` and `C1`.

    :param requester: The requesting member.
    :param own: Data of the requester's record.
    :param counterpart: Data of the partner's record.
    :return: The request.
    """
    return AtomicRequestRecord(
        requester=requester,
        group=("C1", "C0"),
        own_record=Record(**(own or RECORD_DATA_A)),
        target="L1",
        counterpart_record=Record(**(counterpart or RECORD_DATA_C1)),
    )


def test_record_equality():
    """
    Test records are equal only if both creator and payload are equal.
    """
    assert Record(**RECORD_DATA_A) == Record(**RECORD_DATA_A)
    assert Record(**RECORD_DATA_A) != Record(**RECORD_DATA_B)
    assert Record(**RECORD_DATA_A) != Record(creator="C1", payload=b"a")


def test_empty_payload():
    """
    Test a record cannot have an empty payload.
    """
    with pytest.raises(ValidationError):
        Record(creator="C0", payload=b"")


def test_sorted_records():
    """
    Test indexed records sort by index and then payload.
    """
    records = [IndexedRecord(k=2, rho=b"a"), IndexedRecord(k=1, rho=b"z"), IndexedRecord(k=1, rho=b"b")]
    assert [(record.k, record.rho) for record in sorted_records(records)] == [(1, b"b"), (1, b"z"), (2, b"a")]


class TestAtomicRequestRecord:
    """Tests for `AtomicRequestRecord`."""

    def test_group_is_canonical(self):
        """Test the group is sorted whatever the order it is given in."""
        request = make_request()
        assert request.group == ("C0", "C1")
        assert request.partner == "C1"

    def test_requester_outside_group(self):
        """Test a requester outside the group is rejected."""
        with pytest.raises(ValidationError):
            make_request(requester="C2", own={"creator": "C2", "payload": b"a"})

    def test_counterpart_created_by_requester(self):
        """Test a counterpart record not created by the partner is rejected."""
        with pytest.raises(ValidationError):
            make_request(counterpart=RECORD_DATA_B)

    def test_record_round_trip(self):
        """Test a request survives wrapping into a smart G-Set record."""
        request = make_request()
        record = request.to_record()
        assert record.creator == "C0"
        assert AtomicRequestRecord.from_record(record) == request

    def test_from_record_of_other_creator(self):
        """Test a request wrapped into a record of another creator is not decoded."""
        record = Record(creator="C1", payload=make_request().encode())
        assert AtomicRequestRecord.from_record(record) is None

    def test_from_record_not_a_request(self):
        """Test an ordinary record is not decoded."""
        assert AtomicRequestRecord.from_record(Record(**RECORD_DATA_A)) is None

    def test_mirrors(self):
        """Test a request and the partner's mirror match, and share the same pair id in either order."""
        request = make_request()
        mirror = AtomicRequestRecord(
            requester="C1",
            group=("C0", "C1"),
            own_record=Record(**RECORD_DATA_C1),
            target="L2",
            counterpart_record=Record(**RECORD_DATA_A),
        )
        assert request.mirrors(mirror)
        assert mirror.mirrors(request)
        assert request.match_key == mirror.match_key
        assert pair_id(request, mirror) == pair_id(mirror, request)

    def test_does_not_mirror_other_records(self):
        """Test a request of the partner for other records does not match."""
        request = make_request()
        other = AtomicRequestRecord(
            requester="C1",
            group=("C0", "C1"),
            own_record=Record(creator="C1", payload=b"other"),
            target="L2",
            counterpart_record=Record(**RECORD_DATA_A),
        )
        assert not request.mirrors(other)
