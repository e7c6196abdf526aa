"""Scenario runner: slot-loop orchestration, ablations, persistence.

A scenario is fully resolved from (config, seed): a warmup phase generates
warm interactions, the foundation scorer is trained once and frozen, and the
main loop then interleaves natural recommendations, bid-gated boost
deliveries, ledger/benchmark/pacing updates, incremental fine-tuning of the
stacked predictor, and per-slot regrading/admissions. Every artifact a run
writes is reproducible byte-for-byte from its persisted config and seed.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import rng as hrng
from .bidding import (
    PacingConfig,
    PacingState,
    end_of_slot_repricing,
    make_pacing_state,
)
from .errors import ConfigurationError
from .events import CHANNEL_BOOST, EventRecord, read_events, write_events
from .foundation import FoundationModel, TrainConfig, train_foundation
from .metrics import (
    EventFrame,
    age_cohort_mask,
    cold_event_mask,
    compute_effectiveness,
    compute_roi,
    compute_traffic_share,
    count_hot_items,
    estimate_amplification,
    per_slot_pv,
    roc_auc,
    topk_retention,
)
from .stacking import (
    EnrichedSample,
    StackConfig,
    StackModel,
    build_stack_matrix,
    fine_tune,
    init_stack_model,
    percentile_p40,
    rank_and_grade,
    stack_predict_batch,
)
from .tiers import (
    BoostLedger,
    CategoryBenchmark,
    StageConfig,
    active_item_ids,
    admit_item,
    apply_decision,
    evaluate_stage,
    passed_stage_budget,
    record_boost_event,
    remaining_stage_budget,
    total_boost_budget,
    update_benchmark,
)
from .world import (
    BoostDelivery,
    WorldConfig,
    click_prob_for_user,
    generate_world,
    natural_rank_block,
    sample_arrivals,
    simulate_session,
)

BASE_BUDGETS = (40, 120, 360, 1080)
BASE_GAMMAS = (1.05, 1.20, 1.35, 1.50)


def stage_ladder(stage_count: int, min_eval_exposures: int = 20, max_stage_slots: int = 10) -> StageConfig:
    """Budget/threshold ladder for 1..4 stages (geometric budgets, rising gammas)."""
    if not 1 <= stage_count <= 4:
        raise ConfigurationError("stage_count must be in 1..4")
    return StageConfig(
        budgets=BASE_BUDGETS[:stage_count],
        gammas=BASE_GAMMAS[:stage_count],
        min_eval_exposures=min_eval_exposures,
        max_stage_slots=max_stage_slots,
    )


@dataclass
class ScenarioConfig:
    seed: int = 0
    slots: int = 60
    warmup_slots: int = 20
    world: WorldConfig = field(default_factory=WorldConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    stack: StackConfig = field(default_factory=StackConfig)
    pacing: PacingConfig = field(default_factory=PacingConfig)
    stage_count: int = 3
    min_eval_exposures: int = 20
    max_stage_slots: int = 10
    benchmark_window: int = 10
    stats_window: int = 5  # trailing slots for realtime natural features
    natural_k: int = 10
    boosting_enabled: bool = True
    boost_holdout_fraction: float = 0.0
    # ablation toggles (independent)
    disable_exit: bool = False
    disable_promotion: bool = False
    disable_bidding: bool = False
    disable_speed_factor: bool = False
    disable_user_factor: bool = False
    # reporting
    retention_k: int = 20
    retention_lags: tuple[int, ...] = (7, 14, 21, 30)
    hot_threshold: float | None = None  # None -> 99th percentile of per-slot PV
    cohort_ages: tuple[int, ...] = (3, 7, 30)
    # instrumentation
    probe_users: int = 0  # per-slot probe sample size; 0 disables the probe
    pacing_trace: bool = False

    def validate(self) -> None:
        if self.slots < 1 or self.warmup_slots < 0:
            raise ConfigurationError("slots must be >= 1 and warmup_slots >= 0")
        if self.warmup_slots > 60:
            raise ConfigurationError("warmup_slots is capped at 60 (warm-item upload margin)")
        if not 0.0 <= self.boost_holdout_fraction < 1.0:
            raise ConfigurationError("boost_holdout_fraction must be in [0, 1)")
        if self.natural_k < 1:
            raise ConfigurationError("natural_k must be >= 1")
        if self.stats_window < 1 or self.benchmark_window < 1:
            raise ConfigurationError("windows must be >= 1")
        if self.slots > self.world.upload_horizon:
            raise ConfigurationError("world.upload_horizon must cover the run length")
        self.world.validate()
        stage_ladder(self.stage_count, self.min_eval_exposures, self.max_stage_slots)

    def stage_config(self) -> StageConfig:
        return stage_ladder(self.stage_count, self.min_eval_exposures, self.max_stage_slots)


def config_to_dict(config: ScenarioConfig) -> dict:
    return dataclasses.asdict(config)


_SUBCONFIGS = {
    "world": WorldConfig,
    "train": TrainConfig,
    "stack": StackConfig,
    "pacing": PacingConfig,
}


def config_from_dict(raw: dict) -> ScenarioConfig:
    """Build a fully-resolved ScenarioConfig from a (possibly partial) dict."""
    if not isinstance(raw, dict):
        raise ConfigurationError("config root must be an object")
    kwargs: dict = {}
    top_fields = {f.name: f for f in dataclasses.fields(ScenarioConfig)}
    for key, value in raw.items():
        if key not in top_fields:
            raise ConfigurationError(f"unknown config key {key!r}")
        if key in _SUBCONFIGS:
            sub_cls = _SUBCONFIGS[key]
            sub_fields = {f.name for f in dataclasses.fields(sub_cls)}
            unknown = set(value) - sub_fields
            if unknown:
                raise ConfigurationError(f"unknown {key} config keys: {sorted(unknown)}")
            value = {k: (tuple(v) if isinstance(v, list) else v) for k, v in value.items()}
            kwargs[key] = sub_cls(**value)
        else:
            kwargs[key] = tuple(value) if isinstance(value, list) else value
    config = ScenarioConfig(**kwargs)
    config.validate()
    return config


@dataclass
class RunResult:
    config: ScenarioConfig
    world: object
    foundation: FoundationModel
    stack: StackModel
    events: list[EventRecord]
    frame: EventFrame
    book: dict[int, BoostLedger]
    admissions: list[dict]
    transitions: list[dict]
    grades_log: list[dict]
    report: dict
    probe: dict[str, np.ndarray] | None
    pacing_log: list[dict]
    out_dir: Path | None


class ScenarioRunner:
    """One sequential slot loop over a generated world."""

    def __init__(self, config: ScenarioConfig):
        config.validate()
        self.config = config
        self.stage_config = config.stage_config()
        self.world = generate_world(config.world, config.seed)
        n_items = self.world.n_items
        self.book: dict[int, BoostLedger] = {}
        self.pacing: dict[int, PacingState] = {}
        self.item_p40: dict[int, float] = {}
        self.benchmarks: dict[int, CategoryBenchmark] = {
            c: CategoryBenchmark(category_id=c, window_slots=config.benchmark_window)
            for c in range(config.world.n_categories)
        }
        # realtime per-item tallies
        self.nat_pv_by_slot: list[tuple[int, np.ndarray, np.ndarray]] = []  # (slot, pv, clicks)
        self.boost_pv_total = np.zeros(n_items, dtype=np.int64)
        self.boost_clicks_total = np.zeros(n_items, dtype=np.int64)
        # logs
        self.events: list[EventRecord] = []
        self.admissions: list[dict] = []
        self.transitions: list[dict] = []
        self.grades_log: list[dict] = []
        self.pacing_log: list[dict] = []
        self.probe_rows: dict[str, list] = {"slot": [], "item": [], "phase": [], "label": [], "y_foun": [], "y_cold": []}
        self.foundation: FoundationModel | None = None
        self.stack: StackModel | None = None
        if config.boost_holdout_fraction > 0.0:
            h = hrng.uniform(config.seed, hrng.STREAM_HOLDOUT, np.arange(n_items))
            self.holdout_mask = h < config.boost_holdout_fraction
        else:
            self.holdout_mask = np.zeros(n_items, dtype=bool)

    # -- realtime feature state ------------------------------------------

    def _natural_window_stats(self, slot: int) -> tuple[np.ndarray, np.ndarray]:
        lo = slot - self.config.stats_window
        pv = np.zeros(self.world.n_items, dtype=np.int64)
        clicks = np.zeros(self.world.n_items, dtype=np.int64)
        for s, p, c in self.nat_pv_by_slot:
            if s > lo:
                pv += p
                clicks += c
        return pv, clicks

    def _stage_vector(self) -> np.ndarray:
        stage = np.zeros(self.world.n_items, dtype=np.int64)
        for item_id, ledger in self.book.items():
            if ledger.is_active:
                stage[item_id] = ledger.current_stage
        return stage

    def _cold_item_ids(self, slot: int) -> np.ndarray:
        upload = self.world.item_upload_slot
        return np.flatnonzero((upload <= slot) & (slot - upload < self.config.world.cold_window))

    def _stack_scores(
        self, user_ids: np.ndarray, item_ids: np.ndarray, slot: int
    ) -> tuple[np.ndarray, np.ndarray]:
        """(bids, features) for a user block x item block at current realtime state."""
        nat_pv, nat_clicks = self._natural_window_stats(slot)
        stage = self._stage_vector()
        x = build_stack_matrix(
            self.stack,
            self.foundation,
            self.world,
            user_ids,
            item_ids,
            slot,
            nat_pv[item_ids],
            nat_clicks[item_ids],
            self.boost_pv_total[item_ids],
            self.boost_clicks_total[item_ids],
            stage[item_ids],
        )
        flat = x.reshape(-1, self.stack.feature_dim)
        bids = stack_predict_batch(self.stack, flat).reshape(len(user_ids), len(item_ids))
        return bids, x

    # -- phases ------------------------------------------------------------

    def run_warmup(self) -> None:
        cfg = self.config
        for slot in range(-cfg.warmup_slots, 0):
            arrivals = sample_arrivals(self.world, slot)
            slot_events = self._run_sessions(slot, arrivals, boosting=False)
            self._end_of_slot_bookkeeping(slot, slot_events)

    def train_models(self) -> None:
        warm_events = [e for e in self.events if e.slot < 0]
        self.foundation = train_foundation(warm_events, self.world, self.config.train, trained_on_slot=0)
        clicks = sum(e.clicked for e in warm_events)
        prior = clicks / len(warm_events) if warm_events else 0.1
        self.stack = init_stack_model(self.world, self.foundation, self.config.stack, prior_ctr=prior)

    def run_main(self) -> None:
        for slot in range(self.config.slots):
            self.run_slot(slot)

    def run_slot(self, slot: int) -> None:
        cfg = self.config
        try:
            arrivals = sample_arrivals(self.world, slot)
            slot_events = self._run_sessions(slot, arrivals, boosting=cfg.boosting_enabled)
            self._end_of_slot_bookkeeping(slot, slot_events)
            transitioned = self._evaluate_stages(slot)
            end_of_slot_repricing(
                self.pacing, self.book, self.stage_config, cfg.pacing, slot, skip=transitioned
            )
            self._fine_tune_slot(slot, slot_events)
            if cfg.boosting_enabled:
                self._regrade_and_admit(slot)
            if cfg.probe_users > 0:
                self._run_probe(slot)
        except Exception as exc:
            raise type(exc)(f"[slot {slot}] {exc}").with_traceback(exc.__traceback__) from None

    # -- slot internals ----------------------------------------------------

    def _run_sessions(self, slot: int, arrivals: np.ndarray, boosting: bool) -> list[EventRecord]:
        cfg = self.config
        world = self.world
        visible = world.uploaded_item_ids(slot)
        uniq_users = np.unique(arrivals)
        self._slot_sample_features: list[np.ndarray] = []
        self._slot_samples: list[EnrichedSample] = []
        slot_events: list[EventRecord] = []
        if len(uniq_users) == 0:
            return slot_events
        pv_snapshot = world.item_pv.copy()
        found_block = None
        if self.foundation is not None:
            found_block = self.foundation.score_block(world, uniq_users, visible)
        nat_block = natural_rank_block(
            world, uniq_users, slot, cfg.natural_k, found_block, visible, pv_snapshot
        )

        # boost-side slot state, aligned with cold_ids
        cold_ids = self._cold_item_ids(slot) if boosting else np.array([], dtype=np.int64)
        feat_block = None
        bid_block = None
        cold_index: dict[int, int] = {}
        n_cold = len(cold_ids)
        boostable = np.zeros(n_cold, dtype=bool)
        remaining = np.zeros(n_cold, dtype=np.int64)
        stage_arr = np.zeros(n_cold, dtype=np.int64)
        p40_arr = np.zeros(n_cold)
        speed_arr = np.ones(n_cold)
        if n_cold > 0:
            bid_block, feat_block = self._stack_scores(uniq_users, cold_ids, slot)
            cold_index = {int(i): j for j, i in enumerate(cold_ids)}
            for j, item in enumerate(cold_ids):
                ledger = self.book.get(int(item))
                if ledger is None or not ledger.is_active:
                    continue
                p40 = self.item_p40.get(int(item))
                if p40 is None:
                    continue
                boostable[j] = True
                remaining[j] = remaining_stage_budget(ledger, self.stage_config)
                stage_arr[j] = ledger.current_stage
                p40_arr[j] = p40
                state = self.pacing.get(int(item))
                if state is not None and not cfg.disable_speed_factor:
                    speed_arr[j] = state.speed_factor

        user_row = {int(u): j for j, u in enumerate(uniq_users)}
        static_act = world.user_activity
        rep_count: dict[int, int] = {}
        for uid in arrivals:
            uid = int(uid)
            rep = rep_count.get(uid, 0)
            rep_count[uid] = rep + 1
            row = user_row[uid]
            deliveries: list[BoostDelivery] = []
            if n_cold > 0:
                elig = boostable & (remaining > 0)
                if elig.any():
                    bids = bid_block[row]
                    if cfg.disable_bidding:
                        cand = np.flatnonzero(elig)
                        cand_prices = None
                    else:
                        if cfg.disable_user_factor:
                            u_factor = 1.0
                        else:
                            u_factor = float(
                                np.log(world.user_fatigue[uid] + np.e) / np.sqrt(static_act[uid])
                            )
                        prices = p40_arr * speed_arr * u_factor
                        cand = np.flatnonzero(elig & (bids > prices))
                        cand_prices = prices
                    if len(cand) > 0:
                        order = np.lexsort((cold_ids[cand], -bids[cand]))
                        take = cand[order[: cfg.pacing.slate_size]]
                        for j in take:
                            item = int(cold_ids[j])
                            bid = None if cfg.disable_bidding else float(bids[j])
                            price = None if cand_prices is None else float(cand_prices[j])
                            deliveries.append(
                                BoostDelivery(item_id=item, stage=int(stage_arr[j]), bid=bid, price=price)
                            )
                            if cfg.pacing_trace:
                                self.pacing_log.append(
                                    {"slot": slot, "user_id": uid, "item_id": item, "bid": bid, "price": price}
                                )
            events = simulate_session(
                world, uid, slot, nat_block[row].tolist(), deliveries, pv_snapshot, session_key=rep
            )
            for ev in events:
                if ev.channel == CHANNEL_BOOST:
                    ledger = self.book[ev.item_id]
                    record_boost_event(ledger, ev, self.stage_config)
                    j = cold_index[ev.item_id]
                    remaining[j] -= 1
                    state = self.pacing.get(ev.item_id)
                    if state is not None:
                        state.deliveries_this_slot += 1
                # every cold exposure becomes an enriched training sample
                j = cold_index.get(ev.item_id)
                if j is not None:
                    self._slot_samples.append(
                        EnrichedSample(ev.user_id, ev.item_id, int(ev.clicked), ev.channel, slot)
                    )
                    self._slot_sample_features.append(feat_block[row, j])
            slot_events.extend(events)
        self.events.extend(slot_events)
        return slot_events

    def _end_of_slot_bookkeeping(self, slot: int, slot_events: list[EventRecord]) -> None:
        n_items = self.world.n_items
        nat_pv = np.zeros(n_items, dtype=np.int64)
        nat_clicks = np.zeros(n_items, dtype=np.int64)
        by_category: dict[int, list[EventRecord]] = {c: [] for c in self.benchmarks}
        for ev in slot_events:
            if ev.channel == CHANNEL_BOOST:
                self.boost_pv_total[ev.item_id] += 1
                self.boost_clicks_total[ev.item_id] += int(ev.clicked)
            else:
                nat_pv[ev.item_id] += 1
                nat_clicks[ev.item_id] += int(ev.clicked)
                by_category[int(self.world.item_category[ev.item_id])].append(ev)
        self.nat_pv_by_slot.append((slot, nat_pv, nat_clicks))
        cutoff = slot - max(self.config.stats_window, self.config.benchmark_window)
        self.nat_pv_by_slot = [(s, p, c) for (s, p, c) in self.nat_pv_by_slot if s > cutoff]
        for c in sorted(self.benchmarks):
            update_benchmark(self.benchmarks[c], by_category[c], slot)

    def _evaluate_stages(self, slot: int) -> set[int]:
        cfg = self.config
        sc = self.stage_config
        transitioned: set[int] = set()
        for item_id in active_item_ids(self.book):
            ledger = self.book[item_id]
            category = int(self.world.item_category[item_id])
            benchmark = self.benchmarks[category]
            decision = evaluate_stage(ledger, benchmark, sc, slot)
            if not self.world.is_cold(item_id, slot + 1):
                # leaving the cold window ends boosting in every mode: run a
                # final threshold check on whatever the stage accumulated
                passed = (
                    ledger.stage_pv >= sc.min_eval_exposures
                    and ledger.stage_clicks / ledger.stage_pv
                    >= sc.gammas[ledger.current_stage - 1] * benchmark.rolling_ctr
                )
                decision = "graduate" if passed else "exit"
                record = apply_decision(ledger, decision, benchmark, sc, slot)
            else:
                record = apply_decision(
                    ledger,
                    decision,
                    benchmark,
                    sc,
                    slot,
                    disable_exit=cfg.disable_exit,
                    disable_promotion=cfg.disable_promotion,
                )
            if record is not None:
                self.transitions.append(
                    {
                        "slot": record.slot,
                        "item_id": item_id,
                        "stage": record.stage,
                        "decision": record.decision,
                        "applied": record.applied,
                        "ctr": record.observed_ctr,
                        "benchmark": record.benchmark,
                        "gamma": record.gamma,
                    }
                )
                if ledger.is_active:
                    self.pacing[item_id] = make_pacing_state(item_id, ledger, self.stage_config)
                    transitioned.add(item_id)
                else:
                    self.pacing.pop(item_id, None)
        return transitioned

    def _fine_tune_slot(self, slot: int, slot_events: list[EventRecord]) -> None:
        if not self._slot_samples:
            return
        features = np.asarray(self._slot_sample_features)
        fine_tune(
            self.stack,
            self._slot_samples,
            features,
            learning_rate=self.config.stack.learning_rate,
            steps=self.config.stack.steps_per_slot,
            embedding_lr=self.config.stack.embedding_lr,
        )

    def _regrade_and_admit(self, slot: int) -> None:
        cfg = self.config
        grade_ids = sorted(
            set(int(i) for i in active_item_ids(self.book))
            | set(
                int(i)
                for i in np.flatnonzero(self.world.item_upload_slot == slot)
                if not self.holdout_mask[i] and int(i) not in self.book
            )
        )
        if not grade_ids:
            return
        n_sample = min(cfg.stack.potential_sample_size, self.world.n_users)
        hashes = hrng.uniform(cfg.seed, hrng.STREAM_SAMPLE_USERS, slot, np.arange(self.world.n_users))
        user_sample = np.sort(np.argsort(hashes, kind="stable")[:n_sample])
        item_arr = np.array(grade_ids, dtype=np.int64)
        bids, _ = self._stack_scores(user_sample, item_arr, slot)
        p40_all: dict[int, float] = {}
        for j, item in enumerate(grade_ids):
            p40_all[item] = percentile_p40(bids[:, j])
        grades = rank_and_grade(p40_all)
        self.item_p40.update(p40_all)
        for item in grade_ids:
            g = grades[item]
            self.grades_log.append(
                {
                    "slot": slot,
                    "item_id": item,
                    "p40": g.ctr_distribution_p40,
                    "rank_percent": g.rank_percent,
                    "stage": g.stage,
                }
            )
            if item not in self.book:
                ledger = admit_item(self.book, item, g, slot, self.stage_config)
                self.pacing[item] = make_pacing_state(item, ledger, self.stage_config)
                self.admissions.append({"slot": slot, "item_id": item, "stage": ledger.current_stage})

    def _run_probe(self, slot: int) -> None:
        """Score both predictors on hashed user samples against every cold item.

        Probes bucket by the item's interaction count so far: phase 1 while
        the item's first three interactions are still being predicted
        (fewer than 3 prior exposures), phase 2 from the fourth interaction
        on. Labels come from a deterministic ground-truth draw.
        """
        cfg = self.config
        cold_ids = self._cold_item_ids(slot)
        if len(cold_ids) == 0:
            return
        hashes = hrng.uniform(cfg.seed, hrng.STREAM_PROBE_USERS, slot, np.arange(self.world.n_users))
        users = np.sort(np.argsort(hashes, kind="stable")[: min(cfg.probe_users, self.world.n_users)])
        prior = self.world.item_pv[cold_ids]
        phases = np.where(prior >= 3, 2, 1)
        items = cold_ids
        found_block = self.foundation.score_block(self.world, users, items)
        bids, _ = self._stack_scores(users, items, slot)
        for u_idx, uid in enumerate(users):
            p_true = click_prob_for_user(self.world, int(uid), items)
            labels = hrng.bernoulli(
                p_true, self.world.seed, hrng.STREAM_PROBE_LABEL, slot, int(uid), items
            )
            n = len(items)
            self.probe_rows["slot"].extend([slot] * n)
            self.probe_rows["item"].extend(items.tolist())
            self.probe_rows["phase"].extend(phases.tolist())
            self.probe_rows["label"].extend(labels.astype(np.int64).tolist())
            self.probe_rows["y_foun"].extend(found_block[u_idx].tolist())
            self.probe_rows["y_cold"].extend(bids[u_idx].tolist())

    # -- reporting -----------------------------------------------------------

    def build_report(self) -> dict:
        cfg = self.config
        frame = EventFrame.from_events(self.events)
        main = frame.window(0, cfg.slots - 1)
        upload = self.world.item_upload_slot
        cold = cold_event_mask(main, upload, cfg.world.cold_window)
        report: dict = {
            "overall": compute_effectiveness(main),
            "cold": compute_effectiveness(main, cold),
            "traffic_share_percent": compute_traffic_share(main, cold),
            "roi": compute_roi(main, cold),
            "cohorts": {},
        }
        # both cohort views: cumulative (age <= N) and disjoint launch-age buckets
        prev = -1
        for age in cfg.cohort_ages:
            cum = age_cohort_mask(main, upload, max_age=age)
            dis = age_cohort_mask(main, upload, max_age=age, min_age=prev + 1)
            report["cohorts"][f"age<={age}"] = compute_effectiveness(main, cum)
            report["cohorts"][f"age {prev + 1}..{age}"] = compute_effectiveness(main, dis)
            prev = age
        threshold = cfg.hot_threshold
        if threshold is None:
            _, counts = per_slot_pv(main, self.world.n_items)
            threshold = float(np.percentile(counts.max(axis=0), 99)) if counts.size else 1.0
            threshold = max(threshold, 1.0)
        report["hot_threshold"] = threshold
        report["hot_item_count"] = count_hot_items(main, self.world.n_items, threshold)
        span = cfg.slots - 1
        if span >= max(cfg.retention_lags):
            report["topk_retention"] = {
                str(lag): val
                for lag, val in topk_retention(
                    main, self.world.n_items, cfg.retention_k, list(cfg.retention_lags), 0, cfg.slots - 1
                ).items()
            }
        if cfg.boost_holdout_fraction > 0.0:
            cold_item = np.flatnonzero(upload >= 0)
            boosted = np.array([i for i in cold_item if not self.holdout_mask[i]], dtype=np.int64)
            controls = np.array([i for i in cold_item if self.holdout_mask[i]], dtype=np.int64)
            report["amplification"] = estimate_amplification(
                main, boosted, controls, self.world.item_category, upload
            )
        report["budget"] = self._budget_summary()
        if self.probe_rows["slot"]:
            report["probe_auc"] = self.probe_summary()
        return report

    def _budget_summary(self) -> dict:
        granted = 0
        passed = 0
        spent = 0
        for item_id in sorted(self.book):
            ledger = self.book[item_id]
            granted += total_boost_budget(ledger, self.stage_config)
            passed += passed_stage_budget(ledger, self.stage_config)
            spent += int(self.boost_pv_total[item_id])
        return {
            "items_admitted": len(self.book),
            "granted_total": granted,
            "passed_stage_total": passed,
            "spent_total": spent,
            "overflow_errors": 0,  # any overflow raises and aborts the run
        }

    def probe_summary(self) -> dict:
        out: dict = {}
        phase = np.array(self.probe_rows["phase"])
        label = np.array(self.probe_rows["label"])
        y_f = np.array(self.probe_rows["y_foun"])
        y_c = np.array(self.probe_rows["y_cold"])
        for ph in (1, 2):
            m = phase == ph
            if m.sum() == 0 or label[m].min() == label[m].max():
                continue
            out[f"phase{ph}"] = {
                "n": int(m.sum()),
                "foundation_auc": roc_auc(label[m], y_f[m]),
                "stack_auc": roc_auc(label[m], y_c[m]),
            }
        return out

    def result(self, report: dict, out_dir: Path | None) -> RunResult:
        probe = None
        if self.probe_rows["slot"]:
            probe = {k: np.array(v) for k, v in self.probe_rows.items()}
        return RunResult(
            config=self.config,
            world=self.world,
            foundation=self.foundation,
            stack=self.stack,
            events=self.events,
            frame=EventFrame.from_events(self.events),
            book=self.book,
            admissions=self.admissions,
            transitions=self.transitions,
            grades_log=self.grades_log,
            report=report,
            probe=probe,
            pacing_log=self.pacing_log,
            out_dir=out_dir,
        )


def run_scenario(config: ScenarioConfig, out_dir: str | Path | None = None) -> RunResult:
    """Execute one scenario; optionally persist the full artifact set."""
    runner = ScenarioRunner(config)
    runner.run_warmup()
    runner.train_models()
    runner.run_main()
    report = runner.build_report()
    path = Path(out_dir) if out_dir is not None else None
    if path is not None:
        write_run_artifacts(runner, report, path)
    return runner.result(report, path)


def _write_jsonl(path: Path, rows: list[dict]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, separators=(",", ":"), sort_keys=True))
            fh.write("\n")


def write_run_artifacts(runner: ScenarioRunner, report: dict, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    write_events(out_dir / "events.jsonl", runner.events)
    items = [
        {
            "item_id": int(i),
            "category_id": int(runner.world.item_category[i]),
            "upload_slot": int(runner.world.item_upload_slot[i]),
            "quality": float(runner.world.item_quality[i]),
        }
        for i in range(runner.world.n_items)
    ]
    _write_jsonl(out_dir / "items.jsonl", items)
    (out_dir / "config.resolved.json").write_text(
        json.dumps(config_to_dict(runner.config), indent=2, sort_keys=True), encoding="utf-8"
    )
    runner.foundation.save(out_dir / "foundation.checkpoint.json")
    runner.stack.save(out_dir / "stack.checkpoint.json")
    _write_jsonl(out_dir / "grading.jsonl", runner.grades_log)
    _write_jsonl(out_dir / "transitions.jsonl", runner.transitions)
    _write_jsonl(out_dir / "admissions.jsonl", runner.admissions)
    if runner.config.pacing_trace:
        _write_jsonl(out_dir / "pacing.jsonl", runner.pacing_log)
    write_report_files(report, out_dir)


def write_report_files(report: dict, out_dir: Path) -> None:
    (out_dir / "report.json").write_text(
        json.dumps(report, indent=2, sort_keys=True), encoding="utf-8"
    )
    rows = report_rows(report)
    with open(out_dir / "report.csv", "w", encoding="utf-8") as fh:
        fh.write("section,metric,value\n")
        for section, metric, value in rows:
            fh.write(f"{section},{metric},{value}\n")


def report_rows(report: dict) -> list[tuple[str, str, str]]:
    rows: list[tuple[str, str, str]] = []

    def walk(prefix: str, node) -> None:
        if isinstance(node, dict):
            for key in sorted(node):
                walk(f"{prefix}.{key}" if prefix else str(key), node[key])
        elif isinstance(node, list):
            for idx, sub in enumerate(node):
                walk(f"{prefix}[{idx}]", sub)
        else:
            head, _, metric = prefix.rpartition(".")
            rows.append((head or prefix, metric or prefix, repr(node)))

    walk("", report)
    return rows


def recompute_report(run_dir: str | Path) -> dict:
    """Rebuild the metrics report from a persisted run directory."""
    run_dir = Path(run_dir)
    config = config_from_dict(json.loads((run_dir / "config.resolved.json").read_text(encoding="utf-8")))
    events = list(read_events(run_dir / "events.jsonl"))
    items = [json.loads(l) for l in (run_dir / "items.jsonl").read_text(encoding="utf-8").splitlines() if l]
    n_items = len(items)
    upload = np.zeros(n_items, dtype=np.int64)
    for row in items:
        upload[row["item_id"]] = row["upload_slot"]
    frame = EventFrame.from_events(events)
    main = frame.window(0, config.slots - 1)
    cold = cold_event_mask(main, upload, config.world.cold_window)
    report: dict = {
        "overall": compute_effectiveness(main),
        "cold": compute_effectiveness(main, cold),
        "traffic_share_percent": compute_traffic_share(main, cold),
        "roi": compute_roi(main, cold),
    }
    threshold = config.hot_threshold
    if threshold is None:
        _, counts = per_slot_pv(main, n_items)
        threshold = float(np.percentile(counts.max(axis=0), 99)) if counts.size else 1.0
        threshold = max(threshold, 1.0)
    report["hot_threshold"] = threshold
    report["hot_item_count"] = count_hot_items(main, n_items, threshold)
    if config.slots - 1 >= max(config.retention_lags):
        report["topk_retention"] = {
            str(lag): val
            for lag, val in topk_retention(
                main, n_items, config.retention_k, list(config.retention_lags), 0, config.slots - 1
            ).items()
        }
    return report


# -- ablation suites ---------------------------------------------------------

SUITES = {
    "rules": {
        "base": {},
        "no_exit": {"disable_exit": True},
        "no_promotion": {"disable_promotion": True},
    },
    "levels": {
        "stage_1": {"stage_count": 1},
        "stage_2": {"stage_count": 2},
        "stage_3": {"stage_count": 3},
        "stage_4": {"stage_count": 4},
    },
    "bidding": {
        "base": {},
        "no_bidding": {"disable_bidding": True},
        "no_speed_factor": {"disable_speed_factor": True},
        "no_user_factor": {"disable_user_factor": True},
    },
}

SUITE_BASELINE = {"rules": "base", "levels": "stage_1", "bidding": "base"}


def headline_metrics(result: RunResult) -> dict[str, float | None]:
    """Cold-item headline metrics used for ablation deltas."""
    cfg = result.config
    main = result.frame.window(0, cfg.slots - 1)
    upload = result.world.item_upload_slot
    cold = cold_event_mask(main, upload, cfg.world.cold_window)
    eff = compute_effectiveness(main, cold)
    return {
        "CTR": eff["CTR"],
        "PAY": eff["Pay"],
        "GMV": eff["GMV"],
        "TrafficShare": compute_traffic_share(main, cold),
        "ROI": compute_roi(main, cold),
    }


def run_ablation_suite(
    base: ScenarioConfig, suite: str, out_dir: str | Path | None = None
) -> dict:
    """Run one named ablation suite on matched seeds and report relative deltas."""
    if suite not in SUITES:
        raise ConfigurationError(f"unknown suite {suite!r}; choose from {sorted(SUITES)}")
    arms = SUITES[suite]
    results: dict[str, dict] = {}
    for arm, overrides in arms.items():
        config = dataclasses.replace(base, **overrides)
        res = run_scenario(config)
        results[arm] = headline_metrics(res)
    baseline = SUITE_BASELINE[suite]
    deltas: dict[str, dict] = {}
    for arm, vals in results.items():
        if arm == baseline:
            continue
        deltas[arm] = {}
        for metric, val in vals.items():
            ref = results[baseline][metric]
            if val is None or ref in (None, 0):
                deltas[arm][metric] = None
            else:
                deltas[arm][metric] = (val - ref) / abs(ref) * 100.0
    out = {"suite": suite, "baseline": baseline, "arms": results, "deltas_percent": deltas}
    if out_dir is not None:
        path = Path(out_dir)
        path.mkdir(parents=True, exist_ok=True)
        (path / f"ablation_{suite}.json").write_text(
            json.dumps(out, indent=2, sort_keys=True), encoding="utf-8"
        )
    return out
