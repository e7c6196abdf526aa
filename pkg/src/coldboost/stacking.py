"""Stacked cold-item CTR predictor and potential grading.

A small MLP scores a fixed-order feature vector built on top of the frozen
foundation scorer:

    [foundation score, user embedding, user features,
     cold item embedding, boost-side item features, realtime natural stats]

The cold embeddings and MLP weights are fine-tuned incrementally from the
slot stream; the foundation receives no gradient. Per-item potential is the
40th percentile of the predicted CTR distribution over a sampled user set,
turned into a 1..3 stage grade by percentile rank over all graded items.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, FeatureError, TrainingError
from .foundation import FoundationModel
from .nets import MLP, PRED_CLIP, DenseLayer, sigmoid
from .world import WorldState

FEATURE_VERSION = 1
RANK_CUTOFF_MID = 70.0  # rank percent below this -> stage 1
RANK_CUTOFF_HIGH = 90.0  # rank percent at/above this -> stage 3


@dataclass
class StackConfig:
    cold_dim: int = 8
    hidden_dim: int = 32
    learning_rate: float = 0.1
    embedding_lr: float = 0.5
    steps_per_slot: int = 12
    regularization_coeff: float = 1e-5
    source_weights: dict[str, float] = field(default_factory=lambda: {"natural": 1.0, "boost": 1.0})
    potential_sample_size: int = 1000
    seed: int = 0


@dataclass(frozen=True)
class RealtimeStats:
    """Realtime per-item state captured at feature-build time."""

    natural_pv_window: int = 0
    natural_clicks_window: int = 0
    boost_pv: int = 0
    boost_clicks: int = 0
    stage: int = 0  # 0 when the item is not currently boosting


@dataclass(frozen=True)
class EnrichedSample:
    user_id: int
    item_id: int
    label: int  # 0/1
    source: str  # data-source tag, e.g. "natural" / "boost"
    slot: int


@dataclass(frozen=True)
class PotentialGrade:
    item_id: int
    ctr_distribution_p40: float
    rank_percent: float  # in [0, 100]
    stage: int  # 1..3


@dataclass(frozen=True)
class StackFeatureVector:
    foundation_score: float
    user_embedding: np.ndarray
    user_features: np.ndarray
    cold_embedding: np.ndarray
    boost_features: np.ndarray
    natural_features: np.ndarray

    def concat(self) -> np.ndarray:
        return np.concatenate(
            [
                np.array([self.foundation_score]),
                self.user_embedding,
                self.user_features,
                self.cold_embedding,
                self.boost_features,
                self.natural_features,
            ]
        )


@dataclass
class StackModel:
    mlp: MLP
    cold_emb: np.ndarray  # (n_items, cold_dim); rows for cold items are trained
    regularization_coeff: float
    source_weights: dict[str, float]
    n_categories: int
    user_embed_dim: int
    cold_dim: int
    n_user_feats: int = 2
    feature_version: int = FEATURE_VERSION

    @property
    def n_boost_feats(self) -> int:
        # category one-hot, upload recency, quality, stage, boost pv, boost clicks
        return self.n_categories + 5

    @property
    def n_natural_feats(self) -> int:
        return 3

    @property
    def feature_dim(self) -> int:
        return 1 + self.user_embed_dim + self.n_user_feats + self.cold_dim + self.n_boost_feats + self.n_natural_feats

    @property
    def cold_offset(self) -> int:
        return 1 + self.user_embed_dim + self.n_user_feats

    def copy(self) -> "StackModel":
        return StackModel(
            mlp=self.mlp.copy(),
            cold_emb=self.cold_emb.copy(),
            regularization_coeff=self.regularization_coeff,
            source_weights=dict(self.source_weights),
            n_categories=self.n_categories,
            user_embed_dim=self.user_embed_dim,
            cold_dim=self.cold_dim,
            n_user_feats=self.n_user_feats,
            feature_version=self.feature_version,
        )

    def save(self, path: str | Path) -> None:
        payload = {
            "version": self.feature_version,
            "regularization_coeff": self.regularization_coeff,
            "source_weights": self.source_weights,
            "n_categories": self.n_categories,
            "user_embed_dim": self.user_embed_dim,
            "cold_dim": self.cold_dim,
            "n_user_feats": self.n_user_feats,
            "cold_emb": self.cold_emb.tolist(),
            "layers": [
                {"weights": l.weights.tolist(), "bias": l.bias.tolist(), "activation": l.activation}
                for l in self.mlp.layers
            ],
        }
        Path(path).write_text(json.dumps(payload, separators=(",", ":")), encoding="utf-8")

    @staticmethod
    def load(path: str | Path) -> "StackModel":
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        mlp = MLP(
            [
                DenseLayer(
                    np.array(l["weights"], dtype=np.float64),
                    np.array(l["bias"], dtype=np.float64),
                    l["activation"],
                )
                for l in payload["layers"]
            ]
        )
        return StackModel(
            mlp=mlp,
            cold_emb=np.array(payload["cold_emb"], dtype=np.float64),
            regularization_coeff=float(payload["regularization_coeff"]),
            source_weights=dict(payload["source_weights"]),
            n_categories=int(payload["n_categories"]),
            user_embed_dim=int(payload["user_embed_dim"]),
            cold_dim=int(payload["cold_dim"]),
            n_user_feats=int(payload["n_user_feats"]),
            feature_version=int(payload["version"]),
        )


def init_stack_model(
    world: WorldState,
    foundation: FoundationModel,
    config: StackConfig,
    prior_ctr: float | None = None,
) -> StackModel:
    """Fresh stack model; output bias starts at the base-rate logit.

    Anchoring the bias at the observed platform CTR keeps predictions for
    feature regions the fine-tuning stream has not reached yet (freshly
    uploaded items in particular) near the prior instead of near 0.5.
    """
    gen = np.random.default_rng(config.seed + 1)
    user_embed_dim = foundation.user_emb.shape[1]
    model = StackModel(
        mlp=MLP([]),
        cold_emb=gen.uniform(-0.05, 0.05, size=(world.n_items, config.cold_dim)),
        regularization_coeff=config.regularization_coeff,
        source_weights=dict(config.source_weights),
        n_categories=world.config.n_categories,
        user_embed_dim=user_embed_dim,
        cold_dim=config.cold_dim,
    )
    model.mlp = MLP.init([model.feature_dim, config.hidden_dim, 1], gen)
    if prior_ctr is not None:
        p = min(max(prior_ctr, 1e-4), 1.0 - 1e-4)
        model.mlp.layers[-1].bias[:] = np.log(p / (1.0 - p))
    return model


def _boost_natural_blocks(
    model: StackModel,
    world: WorldState,
    item_ids: np.ndarray,
    slot: int,
    nat_pv: np.ndarray,
    nat_clicks: np.ndarray,
    boost_pv: np.ndarray,
    boost_clicks: np.ndarray,
    stage: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    n_cat = model.n_categories
    fb = np.zeros((len(item_ids), model.n_boost_feats))
    fb[np.arange(len(item_ids)), world.item_category[item_ids]] = 1.0
    recency = (slot - world.item_upload_slot[item_ids]) / max(1, world.config.cold_window)
    fb[:, n_cat] = recency
    fb[:, n_cat + 1] = world.item_quality[item_ids]
    fb[:, n_cat + 2] = stage / 3.0
    fb[:, n_cat + 3] = np.log1p(boost_pv)
    fb[:, n_cat + 4] = np.log1p(boost_clicks)
    fn = np.zeros((len(item_ids), model.n_natural_feats))
    fn[:, 0] = np.log1p(nat_pv)
    fn[:, 1] = np.log1p(nat_clicks)
    with np.errstate(invalid="ignore", divide="ignore"):
        ctr = np.where(nat_pv > 0, nat_clicks / np.maximum(nat_pv, 1), 0.0)
    fn[:, 2] = ctr
    return fb, fn


def build_stack_matrix(
    model: StackModel,
    foundation: FoundationModel,
    world: WorldState,
    user_ids: np.ndarray,
    item_ids: np.ndarray,
    slot: int,
    nat_pv: np.ndarray,
    nat_clicks: np.ndarray,
    boost_pv: np.ndarray,
    boost_clicks: np.ndarray,
    stage: np.ndarray,
    foundation_block: np.ndarray | None = None,
) -> np.ndarray:
    """(len(user_ids), len(item_ids), feature_dim) stacked feature tensor.

    Realtime arrays align with ``item_ids``. ``foundation_block`` lets a
    caller reuse an already-computed foundation score matrix.
    """
    u_n, i_n = len(user_ids), len(item_ids)
    if foundation_block is None:
        foundation_block = foundation.score_block(world, user_ids, item_ids)
    if foundation_block.shape != (u_n, i_n):
        raise FeatureError("foundation block shape mismatch")
    fb, fn = _boost_natural_blocks(model, world, item_ids, slot, nat_pv, nat_clicks, boost_pv, boost_clicks, stage)
    out = np.zeros((u_n, i_n, model.feature_dim))
    out[:, :, 0] = foundation_block
    pos = 1
    out[:, :, pos : pos + model.user_embed_dim] = foundation.user_emb[user_ids][:, None, :]
    pos += model.user_embed_dim
    out[:, :, pos : pos + model.n_user_feats] = world.user_static_features(user_ids)[:, None, :]
    pos += model.n_user_feats
    out[:, :, pos : pos + model.cold_dim] = model.cold_emb[item_ids][None, :, :]
    pos += model.cold_dim
    out[:, :, pos : pos + model.n_boost_feats] = fb[None, :, :]
    pos += model.n_boost_feats
    out[:, :, pos:] = fn[None, :, :]
    return out


def build_stack_features(
    model: StackModel,
    foundation: FoundationModel,
    world: WorldState,
    user_id: int,
    item_id: int,
    realtime: RealtimeStats,
    slot: int,
) -> StackFeatureVector:
    """Deterministic feature vector for one (user, item) pair."""
    world.check_user(user_id)
    world.check_item(item_id)
    uid = np.array([user_id])
    iid = np.array([item_id])
    fb, fn = _boost_natural_blocks(
        model,
        world,
        iid,
        slot,
        np.array([realtime.natural_pv_window]),
        np.array([realtime.natural_clicks_window]),
        np.array([realtime.boost_pv]),
        np.array([realtime.boost_clicks]),
        np.array([realtime.stage]),
    )
    return StackFeatureVector(
        foundation_score=float(foundation.score_pairs(world, uid, iid)[0]),
        user_embedding=foundation.user_emb[user_id].copy(),
        user_features=world.user_static_features(uid)[0],
        cold_embedding=model.cold_emb[item_id].copy(),
        boost_features=fb[0],
        natural_features=fn[0],
    )


def stack_predict(model: StackModel, x: np.ndarray) -> float:
    """Predicted cold CTR in (0, 1) for a single feature vector."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != model.feature_dim:
        raise FeatureError(f"expected feature dim {model.feature_dim}, got {x.shape}")
    return float(sigmoid(model.mlp.forward(x[None, :])[0]))


def stack_predict_batch(model: StackModel, x: np.ndarray) -> np.ndarray:
    """Predicted cold CTRs for an (N, feature_dim) batch."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.feature_dim:
        raise FeatureError(f"expected (N, {model.feature_dim}) features, got {x.shape}")
    return sigmoid(model.mlp.forward(x))


@dataclass
class StackGradients:
    layer_grads: list[tuple[np.ndarray, np.ndarray]]
    cold_emb_rows: dict[int, np.ndarray]  # touched item id -> gradient row


def stack_loss(
    model: StackModel,
    batch: list[EnrichedSample],
    features: np.ndarray,
) -> tuple[float, StackGradients]:
    """Source-weighted BCE over the batch plus an L2 term, with gradients.

    loss = sum_s omega_s * BCE(y_s, yhat_s)
         + reg * (||mlp params||^2 + ||touched cold-embedding rows||^2)

    Gradients cover the MLP parameters and exactly the cold-embedding rows
    of items present in the batch; the foundation model is upstream of the
    captured features and receives nothing.
    """
    if len(batch) == 0:
        raise TrainingError("empty batch")
    features = np.asarray(features, dtype=np.float64)
    if features.shape != (len(batch), model.feature_dim):
        raise FeatureError(f"features must be ({len(batch)}, {model.feature_dim}), got {features.shape}")
    y = np.array([s.label for s in batch], dtype=np.float64)
    w = np.array([model.source_weights.get(s.source, 1.0) for s in batch], dtype=np.float64)
    item_ids = np.array([s.item_id for s in batch], dtype=np.int64)

    logits, acts = model.mlp.forward_cached(features)
    p = sigmoid(logits)
    p_clipped = np.clip(p, PRED_CLIP, 1.0 - PRED_CLIP)
    loss = float(np.sum(w * (-y * np.log(p_clipped) - (1.0 - y) * np.log(1.0 - p_clipped))))

    dlogit = w * (p - y)
    layer_grads, dx = model.mlp.backward(acts, dlogit)

    reg = model.regularization_coeff
    touched = np.unique(item_ids)
    if reg > 0.0:
        for layer in model.mlp.layers:
            loss += reg * (float(np.sum(layer.weights**2)) + float(np.sum(layer.bias**2)))
        for (dw, db), layer in zip(layer_grads, model.mlp.layers):
            dw += 2.0 * reg * layer.weights
            db += 2.0 * reg * layer.bias
        loss += reg * float(np.sum(model.cold_emb[touched] ** 2))

    cold_slice = dx[:, model.cold_offset : model.cold_offset + model.cold_dim]
    rows: dict[int, np.ndarray] = {}
    for iid in touched:
        mask = item_ids == iid
        g = cold_slice[mask].sum(axis=0)
        if reg > 0.0:
            g = g + 2.0 * reg * model.cold_emb[iid]
        rows[int(iid)] = g
    return loss, StackGradients(layer_grads=layer_grads, cold_emb_rows=rows)


def fine_tune(
    model: StackModel,
    samples: list[EnrichedSample],
    features: np.ndarray,
    learning_rate: float,
    steps: int = 1,
    embedding_lr: float | None = None,
) -> StackModel:
    """Incremental gradient steps on one slot's enriched samples, in place.

    Features are the vectors captured when each sample's event happened
    (realtime stats are not reconstructible later). Empty input is a no-op.
    Shared parameters step with the batch-mean gradient; each cold-embedding
    row steps with the mean over its own item's samples, so sparse rows are
    not starved by slot traffic. ``embedding_lr`` defaults to the shared
    learning rate.
    """
    if len(samples) == 0 or steps <= 0:
        return model
    if embedding_lr is None:
        embedding_lr = learning_rate
    scale = learning_rate / len(samples)
    item_counts: dict[int, int] = {}
    for s in samples:
        item_counts[s.item_id] = item_counts.get(s.item_id, 0) + 1
    for _ in range(steps):
        _, grads = stack_loss(model, samples, features)
        for (dw, db), layer in zip(grads.layer_grads, model.mlp.layers):
            layer.weights -= scale * dw
            layer.bias -= scale * db
        for iid, g in grads.cold_emb_rows.items():
            model.cold_emb[iid] -= embedding_lr * g / item_counts[iid]
    return model


def potential_distribution(
    model: StackModel,
    foundation: FoundationModel,
    world: WorldState,
    item_id: int,
    user_sample: np.ndarray,
    realtime: RealtimeStats,
    slot: int,
) -> np.ndarray:
    """Predicted CTR for one item across a sampled user set, in sample order."""
    if len(user_sample) == 0:
        raise ConfigurationError("user sample must be non-empty")
    world.check_item(item_id)
    x = build_stack_matrix(
        model,
        foundation,
        world,
        np.asarray(user_sample),
        np.array([item_id]),
        slot,
        np.array([realtime.natural_pv_window]),
        np.array([realtime.natural_clicks_window]),
        np.array([realtime.boost_pv]),
        np.array([realtime.boost_clicks]),
        np.array([realtime.stage]),
    )
    return stack_predict_batch(model, x[:, 0, :])


def percentile_p40(distribution: np.ndarray | list[float]) -> float:
    """Nearest-rank 40th percentile: sorted ascending, 1-based index ceil(0.4 N)."""
    values = np.asarray(distribution, dtype=np.float64)
    if values.size == 0:
        raise ConfigurationError("empty distribution")
    idx = (2 * values.size + 4) // 5  # ceil(0.4 n) in exact integer arithmetic
    return float(np.sort(values)[idx - 1])


def rank_and_grade(p40_all: dict[int, float]) -> dict[int, PotentialGrade]:
    """Percentile-rank all items by P40 and map ranks to stages 1..3.

    rank r = share of items with P40 <= own P40, in percent;
    stage 1 for r < 70, stage 2 for 70 <= r < 90, stage 3 for r >= 90.
    """
    if not p40_all:
        raise ConfigurationError("no items to grade")
    ids = list(p40_all.keys())
    vals = np.array([p40_all[i] for i in ids], dtype=np.float64)
    sorted_vals = np.sort(vals)
    counts = np.searchsorted(sorted_vals, vals, side="right")
    out: dict[int, PotentialGrade] = {}
    n = len(ids)
    for i, item in enumerate(ids):
        r = counts[i] * 100.0 / n
        stage = 1 if r < RANK_CUTOFF_MID else (2 if r < RANK_CUTOFF_HIGH else 3)
        out[item] = PotentialGrade(item_id=item, ctr_distribution_p40=float(vals[i]), rank_percent=float(r), stage=stage)
    return out
