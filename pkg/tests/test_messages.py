import pytest

from lngossip.messages import (
    DEFAULT_WIRE_SIZES,
    dedup_key,
    make_channel_announcement,
    make_node_announcement,
    make_update,
    supersedes,
    wire_size,
)
from tests.conftest import policy


def upd(msg_id, ts, scid=7, direction=0, origin=0):
    return make_update(msg_id, origin, 0.0, scid, direction, policy(ts=ts))


def test_wire_sizes_per_kind():
    assert wire_size(upd(1, 100)) == 128
    assert wire_size(make_node_announcement(2, 0, 0.0, 3, 100)) == 140
    assert wire_size(make_channel_announcement(3, 0, 0.0, 7, 0, 1)) == 430
    assert DEFAULT_WIRE_SIZES.inventory_entry == 8


def test_supersedes_strictly_newer():
    assert supersedes(upd(1, 200), upd(2, 100))
    assert not supersedes(upd(1, 100), upd(2, 200))
    # equal timestamps are duplicates, the incumbent wins
    assert not supersedes(upd(1, 100), upd(2, 100))


def test_supersedes_rejects_mismatched_keys():
    with pytest.raises(ValueError):
        supersedes(upd(1, 200, scid=7), upd(2, 100, scid=8))
    with pytest.raises(ValueError):
        supersedes(upd(1, 200, direction=0), upd(2, 100, direction=1))


def test_dedup_keys_by_kind():
    assert dedup_key(upd(1, 100, scid=9, direction=1)) == ("upd", 9, 1)
    assert dedup_key(make_node_announcement(2, 0, 0.0, 5, 100)) == ("node", 5)
    assert dedup_key(make_channel_announcement(3, 0, 0.0, 9, 0, 1)) == ("chan", 9)


def test_supersedes_is_strict_partial_order():
    msgs = [upd(i, ts) for i, ts in enumerate((100, 200, 300))]
    for a in msgs:
        assert not supersedes(a, a)  # irreflexive
    assert supersedes(msgs[2], msgs[1]) and supersedes(msgs[1], msgs[0])
    assert supersedes(msgs[2], msgs[0])  # transitive on distinct timestamps
