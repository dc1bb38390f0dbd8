"""
Unit tests for the sequential reference objects.
"""

from test.mock_data import RECORD_DATA_A, RECORD_DATA_B

import pytest

from bdso_simulator.models.record import Record
from bdso_simulator.protocols.sequential import (
    ACK,
    SequentialGSet,
    SequentialLedger,
    seq_gset_apply,
    seq_ledger_apply,
)
from bdso_simulator.schemas.scenario import OperationKind


def test_gset_add_is_idempotent():
    """
    Test adding a record twice leaves one copy.
    """
    gset = SequentialGSet()
    assert gset.add(Record(**RECORD_DATA_B)) == ACK
    gset.add(Record(**RECORD_DATA_A))
    gset.add(Record(**RECORD_DATA_B))
    assert gset.get() == [Record(**RECORD_DATA_A), Record(**RECORD_DATA_B)]


def test_gset_state_is_immutable():
    """
    Test applying an add returns a new state and leaves the old one alone.
    """
    state = frozenset()
    new_state, _ = seq_gset_apply(state, OperationKind.ADD, Record(**RECORD_DATA_A))
    assert not state
    assert new_state == {Record(**RECORD_DATA_A)}


def test_gset_unsupported_operation():
    """
    Test a grow-only set rejects appends.
    """
    with pytest.raises(ValueError, match="not supported by a grow-only set"):
        seq_gset_apply(frozenset(), OperationKind.APPEND)


def test_ledger_keeps_append_order():
    """
    Test a ledger returns payloads in append order, duplicates included.
    """
    ledger = SequentialLedger()
    for payload in [b"beta", b"alpha", b"beta"]:
        assert ledger.append(payload) == ACK
    assert ledger.get() == [b"beta", b"alpha", b"beta"]


def test_ledger_unsupported_operation():
    """
    Test a ledger rejects adds.
    """
    with pytest.raises(ValueError, match="not supported by a ledger"):
        seq_ledger_apply((), OperationKind.ADD)
