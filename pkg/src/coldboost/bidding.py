"""Item-oriented bidding: per-request delivery decisions and pacing.

A cold item is delivered to a user when its bid (the stacked predictor's
CTR for the pair) exceeds the user's ideal price

    price = P40 * speed_factor * user_factor.

The speed factor is a smoothed ratio of actual to target delivery speed
(raising the price when the item over-delivers and vice versa); the user
factor raises the price for fatigued and low-activity users. Prices are
recalculated once per slot.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, NumericError
from .tiers import BoostLedger, StageConfig, remaining_stage_budget
from .world import UserProfile

DEFAULT_DELTAS = (0.6, 0.3, 0.1)


@dataclass(frozen=True)
class PacingConfig:
    deltas: tuple[float, float, float] = DEFAULT_DELTAS  # weights for E_t, E_{t-1}, E_{t-2}
    speed_factor_min: float = 0.1
    speed_factor_max: float = 10.0
    error_floor: float = 0.01  # speed error reported when nothing was delivered
    slate_size: int = 10  # max boost deliveries per session

    def __post_init__(self) -> None:
        if len(self.deltas) != 3 or any(d < 0 for d in self.deltas) or sum(self.deltas) <= 0:
            raise ConfigurationError("deltas must be three non-negative weights with positive sum")
        if not (0 < self.speed_factor_min <= self.speed_factor_max):
            raise ConfigurationError("invalid speed factor clamp")
        if self.error_floor <= 0:
            raise ConfigurationError("error_floor must be positive")
        if self.slate_size < 1:
            raise ConfigurationError("slate_size must be >= 1")


@dataclass
class PacingState:
    item_id: int
    target_speed: float  # exposures per slot for the current stage
    error_history: list[float] = field(default_factory=list)  # most recent first, up to 3
    speed_factor: float = 1.0
    deliveries_this_slot: int = 0


@dataclass(frozen=True)
class PriceQuote:
    user_id: int
    item_id: int
    slot: int
    base_p40: float
    speed_factor: float
    user_factor: float
    price: float


def compute_user_factor(user: UserProfile) -> float:
    """Fatigue/activity multiplier: ln(fatigue + e) / sqrt(activity grade).

    The +e offset keeps the factor finite and equal to 1 at zero fatigue
    (a bare logarithm would price fresh users at zero). Monotone increasing
    in fatigue, decreasing in activity.
    """
    if user.fatigue_counter < 0:
        raise ConfigurationError("fatigue counter must be >= 0")
    if not 1 <= user.activity_grade <= 10:
        raise ConfigurationError("activity grade must be in 1..10")
    return math.log(user.fatigue_counter + math.e) * user.activity_grade**-0.5


def user_factor_array(fatigue: np.ndarray, activity: np.ndarray) -> np.ndarray:
    """Vectorized compute_user_factor over fatigue/activity arrays."""
    return np.log(fatigue + math.e) / np.sqrt(activity)


def compute_speed_error(actual: float, target: float, error_floor: float = 0.01) -> float:
    """Actual-over-target delivery ratio; floored when nothing was delivered."""
    if target <= 0:
        raise ConfigurationError("target speed must be positive")
    if actual < 0:
        raise ConfigurationError("actual speed must be >= 0")
    if actual == 0:
        return error_floor
    return actual / target


def update_speed_factor(
    state: PacingState,
    new_error: float,
    deltas: tuple[float, float, float] = DEFAULT_DELTAS,
    speed_factor_min: float = 0.1,
    speed_factor_max: float = 10.0,
) -> PacingState:
    """Push a speed error and recompute the smoothed, clamped speed factor.

    The three delta weights apply to the newest/middle/oldest error and are
    renormalized over however much history exists, so the first update
    reduces to S = E.
    """
    if new_error <= 0:
        raise ConfigurationError("speed error must be positive")
    state.error_history = ([new_error] + state.error_history)[:3]
    weights = deltas[: len(state.error_history)]
    s = sum(w * e for w, e in zip(weights, state.error_history)) / sum(weights)
    state.speed_factor = min(max(s, speed_factor_min), speed_factor_max)
    return state


def quote_price(
    p40: float,
    state: PacingState,
    user_factor: float,
    user_id: int = -1,
    slot: int = -1,
) -> PriceQuote:
    """Ideal price for a (user, item) pair: P40 x speed factor x user factor."""
    price = p40 * state.speed_factor * user_factor
    if not (math.isfinite(p40) and math.isfinite(user_factor) and math.isfinite(price)):
        raise NumericError("non-finite price inputs")
    return PriceQuote(
        user_id=user_id,
        item_id=state.item_id,
        slot=slot,
        base_p40=p40,
        speed_factor=state.speed_factor,
        user_factor=user_factor,
        price=price,
    )


def decide_delivery(bid: float, quote: PriceQuote) -> bool:
    """Deliver iff the bid strictly exceeds the ideal price."""
    return bid > quote.price


def select_boost_slate(
    candidates: list[tuple[int, float, PriceQuote]], n: int
) -> list[tuple[int, float, PriceQuote]]:
    """Keep the top-n candidates by bid, ties broken by ascending item id."""
    ranked = sorted(candidates, key=lambda c: (-c[1], c[0]))
    return ranked[: max(n, 0)]


def make_pacing_state(item_id: int, ledger: BoostLedger, stage_config: StageConfig) -> PacingState:
    """Fresh pacing state on stage entry: uniform spend target, neutral factor."""
    budget = stage_config.budgets[ledger.current_stage - 1]
    return PacingState(item_id=item_id, target_speed=budget / stage_config.max_stage_slots)


def end_of_slot_repricing(
    pacing: dict[int, PacingState],
    book: dict[int, BoostLedger],
    stage_config: StageConfig,
    pacing_config: PacingConfig,
    slot: int,
    skip: set[int] = frozenset(),
) -> dict[int, PacingState]:
    """Close the slot: fold delivery speeds into factors, set next targets.

    The actual speed is measured over the trailing slot. The next target is
    the remaining stage budget spread uniformly over the remaining stage
    slots. ``skip`` holds items that changed stage this slot (their fresh
    pacing state starts next slot; this slot's deliveries belonged to the
    old stage).
    """
    for item_id in sorted(pacing.keys()):
        if item_id in skip:
            continue
        state = pacing[item_id]
        ledger = book.get(item_id)
        if ledger is None or not ledger.is_active:
            continue
        err = compute_speed_error(state.deliveries_this_slot, state.target_speed, pacing_config.error_floor)
        update_speed_factor(
            state,
            err,
            pacing_config.deltas,
            pacing_config.speed_factor_min,
            pacing_config.speed_factor_max,
        )
        remaining_slots = (ledger.entered_slot + stage_config.max_stage_slots) - slot
        remaining = remaining_stage_budget(ledger, stage_config)
        if remaining_slots >= 1:
            state.target_speed = max(remaining, 0) / remaining_slots if remaining > 0 else state.target_speed
        state.deliveries_this_slot = 0
    return pacing
