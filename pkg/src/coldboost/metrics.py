"""Effectiveness and growth metrics, all pure functions of the event log.

Every function takes a columnar view of EventRecords plus item metadata
(upload slots and categories), so a persisted log replays to a bitwise
identical report.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from .events import CHANNEL_BOOST, EventRecord


@dataclass
class EventFrame:
    """Column-oriented event log for vectorized metric computation."""

    slot: np.ndarray
    user_id: np.ndarray
    item_id: np.ndarray
    is_boost: np.ndarray
    clicked: np.ndarray
    paid: np.ndarray
    gmv: np.ndarray

    @staticmethod
    def from_events(events: list[EventRecord]) -> "EventFrame":
        return EventFrame(
            slot=np.array([e.slot for e in events], dtype=np.int64),
            user_id=np.array([e.user_id for e in events], dtype=np.int64),
            item_id=np.array([e.item_id for e in events], dtype=np.int64),
            is_boost=np.array([e.channel == CHANNEL_BOOST for e in events], dtype=bool),
            clicked=np.array([e.clicked for e in events], dtype=bool),
            paid=np.array([e.paid for e in events], dtype=bool),
            gmv=np.array([e.gmv_value for e in events], dtype=np.float64),
        )

    def __len__(self) -> int:
        return len(self.slot)

    def select(self, mask: np.ndarray) -> "EventFrame":
        return EventFrame(
            slot=self.slot[mask],
            user_id=self.user_id[mask],
            item_id=self.item_id[mask],
            is_boost=self.is_boost[mask],
            clicked=self.clicked[mask],
            paid=self.paid[mask],
            gmv=self.gmv[mask],
        )

    def window(self, lo: int, hi: int) -> "EventFrame":
        """Events with lo <= slot <= hi."""
        return self.select((self.slot >= lo) & (self.slot <= hi))


def cold_event_mask(frame: EventFrame, item_upload_slot: np.ndarray, cold_window: int) -> np.ndarray:
    """True where the exposed item was cold at event time."""
    age = frame.slot - item_upload_slot[frame.item_id]
    return (age >= 0) & (age < cold_window)


def age_cohort_mask(
    frame: EventFrame, item_upload_slot: np.ndarray, max_age: int, min_age: int = 0
) -> np.ndarray:
    """Events whose item age at event time is in [min_age, max_age]."""
    age = frame.slot - item_upload_slot[frame.item_id]
    return (age >= min_age) & (age <= max_age)


def compute_effectiveness(frame: EventFrame, mask: np.ndarray | None = None) -> dict[str, float]:
    """PV, CTR (percent), Click, Pay, GMV over the (optionally masked) frame."""
    f = frame if mask is None else frame.select(mask)
    pv = len(f)
    clicks = int(f.clicked.sum())
    return {
        "PV": float(pv),
        "CTR": (clicks / pv * 100.0) if pv > 0 else 0.0,
        "Click": float(clicks),
        "Pay": float(f.paid.sum()),
        "GMV": float(f.gmv.sum()),
    }


def compute_traffic_share(frame: EventFrame, cold_mask: np.ndarray) -> float:
    """Cold-item share of total PV, in percent."""
    total = len(frame)
    if total == 0:
        return 0.0
    return float(cold_mask.sum()) / total * 100.0


def compute_roi(frame: EventFrame, cold_mask: np.ndarray) -> float | None:
    """Natural cold PV per boost cold PV; None when nothing was boosted."""
    boost_pv = int((cold_mask & frame.is_boost).sum())
    if boost_pv == 0:
        return None
    natural_pv = int((cold_mask & ~frame.is_boost).sum())
    return natural_pv / boost_pv


def per_slot_pv(frame: EventFrame, n_items: int) -> tuple[np.ndarray, np.ndarray]:
    """(slots, counts) where counts[t, i] is item i's PV in the t-th listed slot."""
    if len(frame) == 0:
        return np.array([], dtype=np.int64), np.zeros((0, n_items), dtype=np.int64)
    slots = np.unique(frame.slot)
    counts = np.zeros((len(slots), n_items), dtype=np.int64)
    rows = np.searchsorted(slots, frame.slot)
    np.add.at(counts, (rows, frame.item_id), 1)
    return slots, counts


def count_hot_items(frame: EventFrame, n_items: int, threshold: float) -> int:
    """Items whose PV strictly exceeds ``threshold`` in at least one slot."""
    if threshold <= 0:
        raise ConfigurationError("hot-item threshold must be positive")
    _, counts = per_slot_pv(frame, n_items)
    if counts.size == 0:
        return 0
    return int((counts.max(axis=0) > threshold).sum())


def estimate_amplification(
    frame: EventFrame,
    boosted_ids: np.ndarray,
    control_ids: np.ndarray,
    item_category: np.ndarray,
    item_upload_slot: np.ndarray,
    n_buckets: int = 3,
) -> list[dict[str, float]]:
    """Amplified-exposure ratio per boost-CTR bucket.

    For each boosted item, controls are the held-out items sharing its
    category and upload slot; the ratio is (natural PV of boosted items
    minus natural PV of matched controls) over boost PV, aggregated within
    buckets of boost-period CTR. Buckets come out sorted by CTR; empty
    buckets are omitted.
    """
    boosted_ids = np.asarray(boosted_ids, dtype=np.int64)
    control_ids = np.asarray(control_ids, dtype=np.int64)
    n_items = len(item_category)
    nat_pv = np.zeros(n_items, dtype=np.int64)
    np.add.at(nat_pv, frame.item_id[~frame.is_boost], 1)
    boost_pv = np.zeros(n_items, dtype=np.int64)
    np.add.at(boost_pv, frame.item_id[frame.is_boost], 1)
    boost_clicks = np.zeros(n_items, dtype=np.int64)
    np.add.at(boost_clicks, frame.item_id[frame.is_boost & frame.clicked], 1)

    control_key: dict[tuple[int, int], list[int]] = {}
    for i in control_ids:
        control_key.setdefault((int(item_category[i]), int(item_upload_slot[i])), []).append(int(i))

    rows = []
    for i in boosted_ids:
        if boost_pv[i] == 0:
            continue
        matches = control_key.get((int(item_category[i]), int(item_upload_slot[i])))
        if not matches:
            continue
        ctrl_mean = float(np.mean([nat_pv[j] for j in matches]))
        rows.append((boost_clicks[i] / boost_pv[i], float(nat_pv[i]) - ctrl_mean, float(boost_pv[i])))
    if not rows:
        return []
    rows.sort(key=lambda r: r[0])
    out = []
    splits = np.array_split(np.arange(len(rows)), n_buckets)
    for chunk in splits:
        if len(chunk) == 0:
            continue
        ctrs = [rows[j][0] for j in chunk]
        excess = sum(rows[j][1] for j in chunk)
        spend = sum(rows[j][2] for j in chunk)
        out.append(
            {
                "ctr_low": float(min(ctrs)),
                "ctr_high": float(max(ctrs)),
                "mean_ctr": float(np.mean(ctrs)),
                "alpha_hat": excess / spend,
                "n_items": float(len(chunk)),
            }
        )
    return out


def topk_retention(
    frame: EventFrame, n_items: int, k: int, lags: list[int], slot_lo: int, slot_hi: int
) -> dict[int, float]:
    """Share of each slot's top-k (by per-slot PV) still top-k ``lag`` slots later.

    Averaged over every base slot with a valid partner inside the range;
    raises if the range cannot accommodate the largest lag.
    """
    if k < 1:
        raise ConfigurationError("k must be >= 1")
    span = slot_hi - slot_lo
    if not lags or span < max(lags):
        raise ConfigurationError("slot range shorter than the largest lag")
    sub = frame.window(slot_lo, slot_hi)
    counts = np.zeros((span + 1, n_items), dtype=np.int64)
    np.add.at(counts, (sub.slot - slot_lo, sub.item_id), 1)
    # top-k per slot with deterministic ties: sort by (-pv, item_id)
    order = np.lexsort((np.tile(np.arange(n_items), (span + 1, 1)), -counts), axis=1)
    topk = order[:, :k]
    topsets = [frozenset(row.tolist()) for row in topk]
    out: dict[int, float] = {}
    for lag in lags:
        overlaps = [
            len(topsets[t] & topsets[t + lag]) / k * 100.0 for t in range(0, span + 1 - lag)
        ]
        out[lag] = float(np.mean(overlaps))
    return out


def roc_auc(labels: np.ndarray, scores: np.ndarray) -> float:
    """Tie-aware area under the ROC curve (rank statistic form)."""
    y = np.asarray(labels, dtype=bool)
    s = np.asarray(scores, dtype=np.float64)
    n_pos = int(y.sum())
    n_neg = len(y) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ConfigurationError("AUC needs both classes")
    order = np.argsort(s, kind="mergesort")
    s_sorted = s[order]
    ranks_sorted = np.empty(len(s), dtype=np.float64)
    boundaries = np.concatenate(([0], np.flatnonzero(np.diff(s_sorted) != 0) + 1, [len(s)]))
    for a, b in zip(boundaries[:-1], boundaries[1:]):
        ranks_sorted[a:b] = 0.5 * (a + b - 1) + 1.0
    ranks = np.empty(len(s), dtype=np.float64)
    ranks[order] = ranks_sorted
    return float((ranks[y].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def gini(values: np.ndarray) -> float:
    """Gini coefficient of a non-negative array (0 = equal, 1 = concentrated)."""
    v = np.sort(np.asarray(values, dtype=np.float64))
    if v.size == 0 or v.sum() <= 0:
        return 0.0
    n = v.size
    return float((2.0 * np.sum(np.arange(1, n + 1) * v) - (n + 1) * v.sum()) / (n * v.sum()))
