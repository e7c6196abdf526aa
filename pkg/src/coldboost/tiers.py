"""Tiered boosting: per-stage budgets, category benchmarks, promote/exit.

Each admitted item runs a ladder of stages with strictly growing exposure
budgets and strictly growing promotion thresholds. A stage ends when its
budget is spent or a slot timeout passes; the item is then promoted iff its
stage CTR beats the safety factor times its category's rolling natural CTR,
and exits otherwise. Ablation modes remap what happens after a decision but
never change the decision rule itself.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import AdmissionError, ConfigurationError, LedgerOverflowError
from .events import CHANNEL_NATURAL, EventRecord
from .stacking import PotentialGrade

DECISION_STAY = "stay"
DECISION_PROMOTE = "promote"
DECISION_EXIT = "exit"
DECISION_GRADUATE = "graduate"

TRANSITION_ADVANCE = "advance"
TRANSITION_RESTART = "restart"
TRANSITION_EXIT = "exit"
TRANSITION_GRADUATE = "graduate"

STATUS_ACTIVE = "active"
STATUS_EXITED = "exited"
STATUS_GRADUATED = "graduated"

DEFAULT_BUDGETS = (40, 120, 360)
DEFAULT_GAMMAS = (1.05, 1.20, 1.35)


@dataclass(frozen=True)
class StageConfig:
    budgets: tuple[int, ...] = DEFAULT_BUDGETS  # exposures per item per stage
    gammas: tuple[float, ...] = DEFAULT_GAMMAS  # safety factors, each >= 1
    min_eval_exposures: int = 20
    max_stage_slots: int = 10

    def __post_init__(self) -> None:
        if len(self.budgets) == 0 or len(self.budgets) != len(self.gammas):
            raise ConfigurationError("budgets and gammas must be non-empty and aligned")
        if any(b <= 0 for b in self.budgets):
            raise ConfigurationError("stage budgets must be positive")
        if any(b2 <= b1 for b1, b2 in zip(self.budgets, self.budgets[1:])):
            raise ConfigurationError("stage budgets must be strictly increasing")
        if any(g < 1.0 for g in self.gammas):
            raise ConfigurationError("safety factors must be >= 1")
        if any(g2 <= g1 for g1, g2 in zip(self.gammas, self.gammas[1:])):
            raise ConfigurationError("safety factors must be strictly increasing")
        if self.min_eval_exposures < 0 or self.max_stage_slots < 1:
            raise ConfigurationError("invalid evaluation thresholds")

    @property
    def n_stages(self) -> int:
        return len(self.budgets)


@dataclass(frozen=True)
class StageDecisionRecord:
    slot: int
    stage: int
    decision: str  # promote / exit / graduate (raw rule outcome)
    applied: str  # advance / restart / exit / graduate (what the book did)
    observed_ctr: float | None
    benchmark: float
    gamma: float


@dataclass
class BoostLedger:
    item_id: int
    current_stage: int  # 1..K while active
    entered_slot: int  # slot the current stage was entered (deliveries start next slot)
    admitted_stage: int
    status: str = STATUS_ACTIVE
    stage_pv: int = 0
    stage_clicks: int = 0
    history: list[StageDecisionRecord] = field(default_factory=list)

    @property
    def is_active(self) -> bool:
        return self.status == STATUS_ACTIVE


@dataclass
class CategoryBenchmark:
    """Rolling natural-channel CTR for one category over a trailing window."""

    category_id: int
    window_slots: int
    rolling_ctr: float = 0.0
    slot_counts: list[tuple[int, int, int]] = field(default_factory=list)  # (slot, pv, clicks)


def admit_item(
    book: dict[int, BoostLedger], item_id: int, grade: PotentialGrade, slot: int, config: StageConfig
) -> BoostLedger:
    """Open a ledger at the graded stage (clamped to the configured ladder)."""
    if item_id in book:
        raise AdmissionError(f"item {item_id} already admitted")
    stage = min(grade.stage, config.n_stages)
    ledger = BoostLedger(item_id=item_id, current_stage=stage, entered_slot=slot, admitted_stage=stage)
    book[item_id] = ledger
    return ledger


def record_boost_event(ledger: BoostLedger, event: EventRecord, config: StageConfig) -> BoostLedger:
    """Count one boost exposure against the current stage budget."""
    if event.channel != "boost" or event.item_id != ledger.item_id:
        raise ConfigurationError("event does not belong to this ledger")
    if not ledger.is_active:
        raise LedgerOverflowError(f"item {ledger.item_id} is {ledger.status}, not boosting")
    if ledger.stage_pv >= config.budgets[ledger.current_stage - 1]:
        raise LedgerOverflowError(
            f"item {ledger.item_id} exceeded stage {ledger.current_stage} budget"
        )
    ledger.stage_pv += 1
    ledger.stage_clicks += int(event.clicked)
    return ledger


def evaluate_stage(
    ledger: BoostLedger, benchmark: CategoryBenchmark, config: StageConfig, slot: int
) -> str:
    """Stage decision at end of ``slot``: stay, promote, exit or graduate.

    Evaluation triggers on budget exhaustion or the stage slot timeout.
    An item that could not reach min_eval_exposures exits (no demand).
    Promotion needs stage CTR >= gamma * category benchmark (inclusive);
    promotion out of the last stage graduates the item to the natural
    channel.
    """
    if not ledger.is_active:
        raise ConfigurationError(f"item {ledger.item_id} is not active")
    k = ledger.current_stage
    budget = config.budgets[k - 1]
    if ledger.stage_pv < budget and slot - ledger.entered_slot < config.max_stage_slots:
        return DECISION_STAY
    if ledger.stage_pv < config.min_eval_exposures:
        return DECISION_EXIT
    ctr = ledger.stage_clicks / ledger.stage_pv
    if ctr >= config.gammas[k - 1] * benchmark.rolling_ctr:
        return DECISION_GRADUATE if k == config.n_stages else DECISION_PROMOTE
    return DECISION_EXIT


def apply_decision(
    ledger: BoostLedger,
    decision: str,
    benchmark: CategoryBenchmark,
    config: StageConfig,
    slot: int,
    disable_exit: bool = False,
    disable_promotion: bool = False,
) -> StageDecisionRecord | None:
    """Transition the ledger for a non-stay decision and record it.

    Ablations remap transitions: with exit disabled a failing item restarts
    its current stage on a fresh budget; with promotion disabled a passing
    item restarts instead of advancing. Returns the audit record (None for
    stay).
    """
    if decision == DECISION_STAY:
        return None
    ctr = ledger.stage_clicks / ledger.stage_pv if ledger.stage_pv > 0 else None
    gamma = config.gammas[ledger.current_stage - 1]
    stage = ledger.current_stage

    if decision == DECISION_EXIT:
        applied = TRANSITION_RESTART if disable_exit else TRANSITION_EXIT
    elif decision == DECISION_PROMOTE:
        applied = TRANSITION_RESTART if disable_promotion else TRANSITION_ADVANCE
    elif decision == DECISION_GRADUATE:
        applied = TRANSITION_RESTART if disable_promotion else TRANSITION_GRADUATE
    else:
        raise ConfigurationError(f"unknown decision {decision!r}")

    record = StageDecisionRecord(
        slot=slot,
        stage=stage,
        decision=decision,
        applied=applied,
        observed_ctr=ctr,
        benchmark=benchmark.rolling_ctr,
        gamma=gamma,
    )
    ledger.history.append(record)
    if applied == TRANSITION_EXIT:
        ledger.status = STATUS_EXITED
    elif applied == TRANSITION_GRADUATE:
        ledger.status = STATUS_GRADUATED
    else:
        if applied == TRANSITION_ADVANCE:
            ledger.current_stage += 1
        ledger.entered_slot = slot
        ledger.stage_pv = 0
        ledger.stage_clicks = 0
    return record


def total_boost_budget(ledger: BoostLedger, config: StageConfig) -> int:
    """Exposure budget granted so far: one stage budget per stage entry.

    Every admission, advance and restart grants that stage's budget; this is
    what delivery may actually spend. See ``passed_stage_budget`` for the
    strict met-the-threshold indicator sum.
    """
    granted = config.budgets[ledger.admitted_stage - 1]
    for rec in ledger.history:
        if rec.applied == TRANSITION_ADVANCE:
            granted += config.budgets[rec.stage]  # rec.stage is 1-based; next stage budget
        elif rec.applied == TRANSITION_RESTART:
            granted += config.budgets[rec.stage - 1]
    return granted


def passed_stage_budget(ledger: BoostLedger, config: StageConfig) -> int:
    """Indicator-sum budget: stage budgets counted only where the threshold was met."""
    met_stages = {
        rec.stage
        for rec in ledger.history
        if rec.decision in (DECISION_PROMOTE, DECISION_GRADUATE)
    }
    return sum(config.budgets[k - 1] for k in met_stages)


def remaining_stage_budget(ledger: BoostLedger, config: StageConfig) -> int:
    return config.budgets[ledger.current_stage - 1] - ledger.stage_pv


def update_benchmark(
    benchmark: CategoryBenchmark, events: list[EventRecord], slot: int
) -> CategoryBenchmark:
    """Fold one slot of natural-channel category events into the rolling CTR.

    The window covers the trailing ``window_slots`` slots; a window with zero
    exposures keeps the previous value.
    """
    pv = 0
    clicks = 0
    for ev in events:
        if ev.channel != CHANNEL_NATURAL:
            raise ConfigurationError("benchmark updates take natural-channel events only")
        pv += 1
        clicks += int(ev.clicked)
    benchmark.slot_counts.append((slot, pv, clicks))
    cutoff = slot - benchmark.window_slots
    benchmark.slot_counts = [(s, p, c) for (s, p, c) in benchmark.slot_counts if s > cutoff]
    total_pv = sum(p for (_, p, _) in benchmark.slot_counts)
    if total_pv > 0:
        total_clicks = sum(c for (_, _, c) in benchmark.slot_counts)
        benchmark.rolling_ctr = total_clicks / total_pv
    return benchmark


def active_item_ids(book: dict[int, BoostLedger]) -> np.ndarray:
    """Ids of currently boosting items in ascending order."""
    return np.array(sorted(i for i, l in book.items() if l.is_active), dtype=np.int64)
