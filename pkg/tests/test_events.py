import pytest

from coldboost.events import EventRecord, read_events, write_events


def test_paid_implies_clicked():
    ev = EventRecord(slot=0, user_id=1, item_id=2, channel="natural", clicked=False, paid=True, gmv_value=5.0)
    with pytest.raises(ValueError):
        ev.validate()


def test_gmv_iff_paid():
    ev = EventRecord(slot=0, user_id=1, item_id=2, channel="natural", clicked=True, paid=False, gmv_value=3.0)
    with pytest.raises(ValueError):
        ev.validate()
    ok = EventRecord(slot=0, user_id=1, item_id=2, channel="natural", clicked=True, paid=True, gmv_value=3.0)
    ok.validate()


def test_bid_price_only_on_boost():
    ev = EventRecord(
        slot=0, user_id=1, item_id=2, channel="natural", clicked=False, paid=False, bid=0.1, price=0.05
    )
    with pytest.raises(ValueError):
        ev.validate()


def test_json_roundtrip(tmp_path):
    events = [
        EventRecord(slot=-2, user_id=1, item_id=2, channel="natural", clicked=True, paid=True, gmv_value=12.5),
        EventRecord(
            slot=3, user_id=4, item_id=5, channel="boost", clicked=False, paid=False,
            bid=0.21, price=0.2, stage_at_event=2,
        ),
    ]
    path = tmp_path / "events.jsonl"
    write_events(path, events)
    back = list(read_events(path))
    assert back == events


def test_serialization_is_byte_stable(tmp_path):
    ev = EventRecord(slot=1, user_id=2, item_id=3, channel="boost", clicked=True, paid=False,
                     bid=0.123456789012345, price=0.1, stage_at_event=1)
    assert ev.to_json() == ev.to_json()
    p1, p2 = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    write_events(p1, [ev])
    write_events(p2, [ev])
    assert p1.read_bytes() == p2.read_bytes()
