"""Seeded synthetic marketplace: users, items, ground-truth behavior.

The ground-truth click model contains a log-popularity term and the natural
ranker rewards accumulated page views, so popular items mechanically attract
ever more exposure. Nothing imposes that amplification from outside; it
emerges from the feedback loop, which is exactly the dynamic the boosting
machinery is built to counteract.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import rng as hrng
from .errors import ConfigurationError, EntityLookupError
from .events import CHANNEL_BOOST, CHANNEL_NATURAL, EventRecord


@dataclass
class WorldConfig:
    n_users: int = 400
    n_warm_items: int = 250
    latent_dim: int = 8
    n_categories: int = 8
    cold_window: int = 30  # items younger than this many slots are cold
    cold_uploads_per_slot: int = 3
    upload_horizon: int = 120  # cold uploads are pre-generated for this many slots
    arrival_rate_mean: float = 0.25  # expected sessions per user per slot
    arrival_rate_sigma: float = 0.8  # lognormal spread of per-user rates
    # ground-truth click model
    weight_pref: float = 1.6
    weight_pop: float = 0.05
    weight_quality: float = 2.0
    click_bias: float = -3.4
    pay_scale: float = 0.35
    gmv_sigma: float = 0.6
    # natural ranker
    rank_found_weight: float = 4.0
    rank_pop_weight: float = 0.5
    rank_noise_scale: float = 0.8

    def validate(self) -> None:
        if self.n_users <= 0 or self.n_warm_items <= 0:
            raise ConfigurationError("user and warm-item counts must be positive")
        if self.latent_dim < 1:
            raise ConfigurationError("latent_dim must be >= 1")
        if self.n_categories < 1:
            raise ConfigurationError("n_categories must be >= 1")
        if self.cold_window < 1 or self.upload_horizon < 1:
            raise ConfigurationError("cold_window and upload_horizon must be >= 1")
        if self.cold_uploads_per_slot < 0:
            raise ConfigurationError("cold_uploads_per_slot must be >= 0")
        if not (0.0 < self.pay_scale <= 1.0):
            raise ConfigurationError("pay_scale must be in (0, 1]")
        if self.arrival_rate_mean < 0:
            raise ConfigurationError("arrival_rate_mean must be >= 0")


@dataclass(frozen=True)
class GroundTruthModel:
    weight_pref: float
    weight_pop: float
    weight_quality: float
    click_bias: float
    pay_scale: float
    seed: int


@dataclass(frozen=True)
class UserProfile:
    user_id: int
    latent_pref: np.ndarray
    activity_grade: int  # 1..10, deciles of arrival_rate
    fatigue_counter: int  # consecutive cold-item exposures without a click
    arrival_rate: float


@dataclass(frozen=True)
class ItemProfile:
    item_id: int
    category_id: int
    latent_attr: np.ndarray
    content_features: np.ndarray  # category one-hot, scaled upload slot, quality
    upload_slot: int
    intrinsic_quality: float
    is_cold: bool


@dataclass
class WorldState:
    """Array-backed population and mutable counters for one simulation run."""

    config: WorldConfig
    seed: int
    truth: GroundTruthModel
    user_latent: np.ndarray  # (n_users, d)
    user_activity: np.ndarray  # (n_users,) int in 1..10
    user_arrival_rate: np.ndarray  # (n_users,)
    user_fatigue: np.ndarray  # (n_users,) mutable int
    item_latent: np.ndarray  # (n_items, d) warm items first, then the cold stream
    item_category: np.ndarray  # (n_items,) int
    item_quality: np.ndarray  # (n_items,)
    item_upload_slot: np.ndarray  # (n_items,) int; warm items < 0
    category_gmv_median: np.ndarray  # (n_categories,)
    item_pv: np.ndarray = field(init=False)  # cumulative exposures, both channels
    item_click_total: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        n = self.n_items
        self.item_pv = np.zeros(n, dtype=np.int64)
        self.item_click_total = np.zeros(n, dtype=np.int64)

    @property
    def n_users(self) -> int:
        return self.user_latent.shape[0]

    @property
    def n_items(self) -> int:
        return self.item_latent.shape[0]

    def check_user(self, user_id: int) -> None:
        if not 0 <= user_id < self.n_users:
            raise EntityLookupError(f"unknown user {user_id}")

    def check_item(self, item_id: int) -> None:
        if not 0 <= item_id < self.n_items:
            raise EntityLookupError(f"unknown item {item_id}")

    def uploaded_item_ids(self, slot: int) -> np.ndarray:
        """Items visible at ``slot`` (uploaded at or before it)."""
        return np.flatnonzero(self.item_upload_slot <= slot)

    def is_cold(self, item_id: int | np.ndarray, slot: int) -> bool | np.ndarray:
        age = slot - self.item_upload_slot[item_id]
        out = (age >= 0) & (age < self.config.cold_window)
        return bool(out) if np.ndim(out) == 0 else out

    def get_user(self, user_id: int) -> UserProfile:
        self.check_user(user_id)
        return UserProfile(
            user_id=user_id,
            latent_pref=self.user_latent[user_id],
            activity_grade=int(self.user_activity[user_id]),
            fatigue_counter=int(self.user_fatigue[user_id]),
            arrival_rate=float(self.user_arrival_rate[user_id]),
        )

    def get_item(self, item_id: int, slot: int = 0) -> ItemProfile:
        self.check_item(item_id)
        return ItemProfile(
            item_id=item_id,
            category_id=int(self.item_category[item_id]),
            latent_attr=self.item_latent[item_id],
            content_features=self.item_content_features(np.array([item_id]))[0],
            upload_slot=int(self.item_upload_slot[item_id]),
            intrinsic_quality=float(self.item_quality[item_id]),
            is_cold=bool(self.is_cold(item_id, slot)),
        )

    def item_content_features(self, item_ids: np.ndarray) -> np.ndarray:
        """Observable content vector: category one-hot, upload slot / 100, quality."""
        n_cat = self.config.n_categories
        out = np.zeros((len(item_ids), n_cat + 2))
        out[np.arange(len(item_ids)), self.item_category[item_ids]] = 1.0
        out[:, n_cat] = self.item_upload_slot[item_ids] / 100.0
        out[:, n_cat + 1] = self.item_quality[item_ids]
        return out

    def user_static_features(self, user_ids: np.ndarray) -> np.ndarray:
        """Observable user vector: activity grade / 10, log arrival rate."""
        out = np.zeros((len(user_ids), 2))
        out[:, 0] = self.user_activity[user_ids] / 10.0
        out[:, 1] = np.log1p(self.user_arrival_rate[user_ids])
        return out


def generate_world(config: WorldConfig, seed: int) -> WorldState:
    """Deterministically build the population for (config, seed).

    The full cold-upload stream for ``upload_horizon`` slots is generated up
    front, so runs that share a seed see identical items regardless of what
    the boosting policy later does with them.
    """
    config.validate()
    gen = np.random.default_rng(seed)
    d = config.latent_dim

    n_u = config.n_users
    user_latent = gen.normal(0.0, 1.0 / np.sqrt(d), size=(n_u, d))
    raw = gen.lognormal(mean=0.0, sigma=config.arrival_rate_sigma, size=n_u)
    user_arrival = raw * (config.arrival_rate_mean / raw.mean()) if raw.mean() > 0 else raw
    order = np.lexsort((np.arange(n_u), user_arrival))
    ranks = np.empty(n_u, dtype=np.int64)
    ranks[order] = np.arange(n_u)
    activity = np.minimum(10, 1 + (ranks * 10) // n_u).astype(np.int64)

    n_cold = config.cold_uploads_per_slot * config.upload_horizon
    n_i = config.n_warm_items + n_cold
    item_latent = gen.normal(0.0, 1.0 / np.sqrt(d), size=(n_i, d))
    item_category = gen.integers(0, config.n_categories, size=n_i)
    item_quality = gen.uniform(0.0, 1.0, size=n_i)

    upload = np.empty(n_i, dtype=np.int64)
    # warm items predate every slot a run can touch (warmups up to 60 slots),
    # so they are never inside the cold window
    lo = -(config.cold_window + 240)
    hi = -(config.cold_window + 61)
    upload[: config.n_warm_items] = gen.integers(lo, hi + 1, size=config.n_warm_items)
    cold_slots = np.repeat(np.arange(config.upload_horizon), config.cold_uploads_per_slot)
    upload[config.n_warm_items :] = cold_slots

    truth = GroundTruthModel(
        weight_pref=config.weight_pref,
        weight_pop=config.weight_pop,
        weight_quality=config.weight_quality,
        click_bias=config.click_bias,
        pay_scale=config.pay_scale,
        seed=seed,
    )
    return WorldState(
        config=config,
        seed=seed,
        truth=truth,
        user_latent=user_latent,
        user_activity=activity,
        user_arrival_rate=user_arrival,
        user_fatigue=np.zeros(n_u, dtype=np.int64),
        item_latent=item_latent,
        item_category=item_category,
        item_quality=item_quality,
        item_upload_slot=upload,
        category_gmv_median=gen.uniform(20.0, 80.0, size=config.n_categories),
    )


def click_prob_for_user(
    world: WorldState, user_id: int, item_ids: np.ndarray, pv: np.ndarray | None = None
) -> np.ndarray:
    """Ground-truth click probabilities for one user against many items.

    ``pv`` overrides the popularity counts (callers that freeze popularity at
    slot boundaries pass a snapshot); defaults to the live counters.
    """
    world.check_user(user_id)
    t = world.truth
    if pv is None:
        pv = world.item_pv[item_ids]
    logit = (
        t.weight_pref * (world.item_latent[item_ids] @ world.user_latent[user_id])
        + t.weight_pop * np.log1p(pv)
        + t.weight_quality * world.item_quality[item_ids]
        + t.click_bias
    )
    return 1.0 / (1.0 + np.exp(-logit))


def true_click_prob(world: WorldState, user_id: int, item_id: int, slot: int = 0) -> float:
    """Scalar ground-truth click probability, always strictly inside (0, 1)."""
    world.check_item(item_id)
    return float(click_prob_for_user(world, user_id, np.array([item_id]))[0])


def natural_recommend(
    world: WorldState,
    user_id: int,
    slot: int,
    k: int,
    foundation_scores: np.ndarray | None = None,
    candidate_ids: np.ndarray | None = None,
    pv_snapshot: np.ndarray | None = None,
) -> np.ndarray:
    """Rank the visible catalog for one user and return the top-k item ids.

    Score = foundation CTR score (when a trained scorer is available)
    plus a log-popularity feature plus deterministic exploration noise.
    Cold items compete with no special treatment. ``foundation_scores``
    aligns with ``candidate_ids`` (both default to the visible catalog);
    ``pv_snapshot`` freezes the popularity feature at a slot boundary.
    """
    if k < 1:
        raise ConfigurationError("k must be >= 1")
    world.check_user(user_id)
    cfg = world.config
    if candidate_ids is None:
        candidate_ids = world.uploaded_item_ids(slot)
    pv = world.item_pv if pv_snapshot is None else pv_snapshot
    score = cfg.rank_pop_weight * np.log1p(pv[candidate_ids]).astype(np.float64)
    if foundation_scores is not None:
        score = score + cfg.rank_found_weight * foundation_scores
    if cfg.rank_noise_scale > 0.0:
        noise = hrng.normal(world.seed, hrng.STREAM_RANK_NOISE, slot, user_id, candidate_ids)
        score = score + cfg.rank_noise_scale * noise
    order = np.lexsort((candidate_ids, -score))
    return candidate_ids[order[: min(k, len(candidate_ids))]]


def natural_rank_block(
    world: WorldState,
    user_ids: np.ndarray,
    slot: int,
    k: int,
    foundation_block: np.ndarray | None,
    candidate_ids: np.ndarray,
    pv_snapshot: np.ndarray,
) -> np.ndarray:
    """Vectorized natural_recommend for a block of users; same ranking rule.

    Returns an (len(user_ids), k) array of item ids (k clamped to the
    catalog). Agrees element-for-element with per-user natural_recommend
    calls on the same snapshot.
    """
    cfg = world.config
    k = min(k, len(candidate_ids))
    base = cfg.rank_pop_weight * np.log1p(pv_snapshot[candidate_ids]).astype(np.float64)
    scores = np.tile(base, (len(user_ids), 1))
    if foundation_block is not None:
        scores += cfg.rank_found_weight * foundation_block
    if cfg.rank_noise_scale > 0.0:
        noise = hrng.normal(
            world.seed, hrng.STREAM_RANK_NOISE, slot, user_ids[:, None], candidate_ids[None, :]
        )
        scores += cfg.rank_noise_scale * noise
    out = np.empty((len(user_ids), k), dtype=np.int64)
    for row in range(len(user_ids)):
        order = np.lexsort((candidate_ids, -scores[row]))
        out[row] = candidate_ids[order[:k]]
    return out


@dataclass(frozen=True)
class BoostDelivery:
    """One boost-channel delivery decision attached to a session."""

    item_id: int
    stage: int
    bid: float | None = None
    price: float | None = None


def simulate_session(
    world: WorldState,
    user_id: int,
    slot: int,
    natural_items: Sequence[int],
    boost_items: Sequence[BoostDelivery] = (),
    pv_snapshot: np.ndarray | None = None,
    session_key: int = 0,
) -> list[EventRecord]:
    """Expose one session's slates and sample clicks/pays/GMV.

    Items appearing in both slates are exposed once and credited to the
    boost channel. Click draws key on (slot, user, session, item) so
    identical exposures across runs of the same world consume identical
    randomness. Updates popularity counters and the user's fatigue counter
    in place.
    """
    world.check_user(user_id)
    boost_ids = [d.item_id for d in boost_items]
    boost_set = set(boost_ids)
    nat_ids = [i for i in natural_items if i not in boost_set]
    exposed = np.asarray(nat_ids + boost_ids, dtype=np.int64)
    if len(exposed) == 0:
        return []
    if len(boost_set) != len(boost_ids):
        raise ConfigurationError("duplicate items in boost slate")
    for i in exposed:
        world.check_item(int(i))

    probs = click_prob_for_user(
        world, user_id, exposed, pv=None if pv_snapshot is None else pv_snapshot[exposed]
    )
    clicked = hrng.bernoulli(probs, world.seed, hrng.STREAM_CLICK, slot, user_id, session_key, exposed)
    pay_p = world.truth.pay_scale * world.item_quality[exposed]
    paid = clicked & hrng.bernoulli(pay_p, world.seed, hrng.STREAM_PAY, slot, user_id, session_key, exposed)
    med = world.category_gmv_median[world.item_category[exposed]]
    gmv = med * np.exp(
        world.config.gmv_sigma
        * hrng.normal(world.seed, hrng.STREAM_GMV, slot, user_id, session_key, exposed)
    )
    gmv = np.where(paid, gmv, 0.0)

    events: list[EventRecord] = []
    n_nat = len(nat_ids)
    for pos, item in enumerate(exposed):
        if pos < n_nat:
            ev = EventRecord(
                slot=slot,
                user_id=user_id,
                item_id=int(item),
                channel=CHANNEL_NATURAL,
                clicked=bool(clicked[pos]),
                paid=bool(paid[pos]),
                gmv_value=float(gmv[pos]),
            )
        else:
            d = boost_items[pos - n_nat]
            ev = EventRecord(
                slot=slot,
                user_id=user_id,
                item_id=int(item),
                channel=CHANNEL_BOOST,
                clicked=bool(clicked[pos]),
                paid=bool(paid[pos]),
                gmv_value=float(gmv[pos]),
                bid=d.bid,
                price=d.price,
                stage_at_event=d.stage,
            )
        events.append(ev)

    # counter updates: popularity, then fatigue in exposure order
    np.add.at(world.item_pv, exposed, 1)
    np.add.at(world.item_click_total, exposed, clicked.astype(np.int64))
    cold = world.is_cold(exposed, slot)
    for pos in range(len(exposed)):
        if cold[pos]:
            if clicked[pos]:
                world.user_fatigue[user_id] = 0
            else:
                world.user_fatigue[user_id] += 1
    return events


def sample_arrivals(world: WorldState, slot: int) -> np.ndarray:
    """User ids arriving this slot, one entry per session, ascending user id."""
    counts = hrng.poisson(
        world.user_arrival_rate, world.seed, hrng.STREAM_ARRIVAL, slot, np.arange(world.n_users)
    )
    return np.repeat(np.arange(world.n_users), counts)
