"""Exposure/click/pay event records and their line-delimited persistence.

One EventRecord per exposure is the unit of persistence; every metric is a
pure function of a list of these records. Files are JSON lines with a fixed
key order so a rerun of the same scenario produces byte-identical logs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

CHANNEL_NATURAL = "natural"
CHANNEL_BOOST = "boost"


@dataclass(frozen=True)
class EventRecord:
    slot: int
    user_id: int
    item_id: int
    channel: str  # "natural" | "boost"
    clicked: bool
    paid: bool
    gmv_value: float = 0.0
    bid: float | None = None
    price: float | None = None
    stage_at_event: int | None = None

    def validate(self) -> None:
        if self.paid and not self.clicked:
            raise ValueError("paid implies clicked")
        if (self.gmv_value > 0.0) != self.paid:
            raise ValueError("gmv_value > 0 iff paid")
        if self.channel not in (CHANNEL_NATURAL, CHANNEL_BOOST):
            raise ValueError(f"unknown channel {self.channel!r}")
        if self.channel == CHANNEL_NATURAL and (
            self.bid is not None or self.price is not None or self.stage_at_event is not None
        ):
            raise ValueError("bid/price/stage are boost-channel fields")

    def to_json(self) -> str:
        rec: dict = {
            "slot": self.slot,
            "user_id": self.user_id,
            "item_id": self.item_id,
            "channel": self.channel,
            "clicked": self.clicked,
            "paid": self.paid,
            "gmv_value": self.gmv_value,
        }
        if self.bid is not None:
            rec["bid"] = self.bid
        if self.price is not None:
            rec["price"] = self.price
        if self.stage_at_event is not None:
            rec["stage_at_event"] = self.stage_at_event
        return json.dumps(rec, separators=(",", ":"))

    @staticmethod
    def from_json(line: str) -> "EventRecord":
        rec = json.loads(line)
        return EventRecord(
            slot=rec["slot"],
            user_id=rec["user_id"],
            item_id=rec["item_id"],
            channel=rec["channel"],
            clicked=rec["clicked"],
            paid=rec["paid"],
            gmv_value=rec.get("gmv_value", 0.0),
            bid=rec.get("bid"),
            price=rec.get("price"),
            stage_at_event=rec.get("stage_at_event"),
        )


def write_events(path: str | Path, events: Iterable[EventRecord]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ev in events:
            fh.write(ev.to_json())
            fh.write("\n")


def read_events(path: str | Path) -> Iterator[EventRecord]:
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                yield EventRecord.from_json(line)
