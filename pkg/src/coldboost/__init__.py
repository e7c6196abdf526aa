"""Cold-item boosting simulator.

A deterministic synthetic marketplace in which popularity feeds on itself,
plus the machinery that counteracts it: tiered exposure budgets with
promotion/exit rules, a stacked cold-CTR predictor fine-tuned online over a
frozen foundation model, and a paced, bid-gated delivery channel.
"""

from .bidding import (
    PacingConfig,
    PacingState,
    PriceQuote,
    compute_speed_error,
    compute_user_factor,
    decide_delivery,
    end_of_slot_repricing,
    quote_price,
    select_boost_slate,
    update_speed_factor,
)
from .errors import (
    AdmissionError,
    ColdBoostError,
    ConfigurationError,
    EntityLookupError,
    FeatureError,
    LedgerOverflowError,
    NumericError,
    TrainingError,
)
from .events import EventRecord, read_events, write_events
from .foundation import FoundationModel, TrainConfig, foundation_predict, train_foundation
from .harness import (
    RunResult,
    ScenarioConfig,
    config_from_dict,
    config_to_dict,
    recompute_report,
    run_ablation_suite,
    run_scenario,
)
from .metrics import (
    EventFrame,
    compute_effectiveness,
    compute_roi,
    compute_traffic_share,
    count_hot_items,
    estimate_amplification,
    gini,
    roc_auc,
    topk_retention,
)
from .stacking import (
    EnrichedSample,
    PotentialGrade,
    RealtimeStats,
    StackConfig,
    StackFeatureVector,
    StackModel,
    build_stack_features,
    fine_tune,
    percentile_p40,
    potential_distribution,
    rank_and_grade,
    stack_loss,
    stack_predict,
)
from .tiers import (
    BoostLedger,
    CategoryBenchmark,
    StageConfig,
    admit_item,
    evaluate_stage,
    passed_stage_budget,
    record_boost_event,
    total_boost_budget,
    update_benchmark,
)
from .world import (
    GroundTruthModel,
    ItemProfile,
    UserProfile,
    WorldConfig,
    WorldState,
    generate_world,
    natural_recommend,
    simulate_session,
    true_click_prob,
)

__version__ = "0.1.0"
