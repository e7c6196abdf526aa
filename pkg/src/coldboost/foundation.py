"""Platform foundation CTR scorer, trained on warm-item interactions only.

The scorer is an embedding model with a one-hidden-layer head:

    logit(u, i) = w2 . tanh(Wu @ [e_u, f_u] + Wi @ [e_i, f_i] + b1) + b2

Items absent from the training data keep a zero embedding (the fallback
path), which is what makes its cold-item performance deterministically
worse than its warm performance. The model is frozen after training; the
additive user/item split of the first layer lets slot loops score a whole
user-by-item block with two small matmuls.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import EntityLookupError, TrainingError
from .events import EventRecord
from .world import WorldState

CHECKPOINT_VERSION = 1


@dataclass
class TrainConfig:
    embed_dim: int = 16
    hidden_dim: int = 32
    learning_rate: float = 0.02
    epochs: int = 60
    l2: float = 1e-6
    holdout_every: int = 5  # every n-th sample is held out for the AUC check
    seed: int = 0


@dataclass
class FoundationModel:
    user_emb: np.ndarray  # (n_users, d_e)
    item_emb: np.ndarray  # (n_items, d_e); untrained rows stay exactly zero
    w_user: np.ndarray  # (d_e + n_user_feats, hidden)
    w_item: np.ndarray  # (d_e + n_item_feats, hidden)
    b_hidden: np.ndarray  # (hidden,)
    w_out: np.ndarray  # (hidden,)
    b_out: np.ndarray  # shape (1,)
    trained_on_slot: int
    holdout_auc: float = float("nan")

    def user_side(self, world: WorldState, user_ids: np.ndarray) -> np.ndarray:
        x = np.concatenate([self.user_emb[user_ids], world.user_static_features(user_ids)], axis=1)
        return x @ self.w_user

    def item_side(self, world: WorldState, item_ids: np.ndarray) -> np.ndarray:
        x = np.concatenate([self.item_emb[item_ids], world.item_content_features(item_ids)], axis=1)
        return x @ self.w_item

    def score_block(self, world: WorldState, user_ids: np.ndarray, item_ids: np.ndarray) -> np.ndarray:
        """(len(user_ids), len(item_ids)) matrix of predicted CTRs."""
        u = self.user_side(world, user_ids)
        i = self.item_side(world, item_ids)
        h = np.tanh(u[:, None, :] + i[None, :, :] + self.b_hidden)
        return 1.0 / (1.0 + np.exp(-(h @ self.w_out + self.b_out)))

    def score_pairs(self, world: WorldState, user_ids: np.ndarray, item_ids: np.ndarray) -> np.ndarray:
        """Predicted CTR for aligned (user, item) pairs."""
        u = self.user_side(world, user_ids)
        i = self.item_side(world, item_ids)
        h = np.tanh(u + i + self.b_hidden)
        return 1.0 / (1.0 + np.exp(-(h @ self.w_out + self.b_out)))

    def param_vector(self) -> np.ndarray:
        return np.concatenate(
            [
                self.user_emb.ravel(),
                self.item_emb.ravel(),
                self.w_user.ravel(),
                self.w_item.ravel(),
                self.b_hidden.ravel(),
                self.w_out.ravel(),
                self.b_out.ravel(),
            ]
        )

    def set_param_vector(self, vec: np.ndarray) -> None:
        parts = [self.user_emb, self.item_emb, self.w_user, self.w_item, self.b_hidden, self.w_out, self.b_out]
        pos = 0
        for arr in parts:
            arr[...] = vec[pos : pos + arr.size].reshape(arr.shape)
            pos += arr.size

    def save(self, path: str | Path) -> None:
        """Structured-text checkpoint of every parameter table."""
        payload = {
            "version": CHECKPOINT_VERSION,
            "trained_on_slot": self.trained_on_slot,
            "holdout_auc": self.holdout_auc,
            "b_out": self.b_out.tolist(),
            "user_emb": self.user_emb.tolist(),
            "item_emb": self.item_emb.tolist(),
            "w_user": self.w_user.tolist(),
            "w_item": self.w_item.tolist(),
            "b_hidden": self.b_hidden.tolist(),
            "w_out": self.w_out.tolist(),
        }
        Path(path).write_text(json.dumps(payload, separators=(",", ":")), encoding="utf-8")

    @staticmethod
    def load(path: str | Path) -> "FoundationModel":
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        if payload["version"] != CHECKPOINT_VERSION:
            raise TrainingError(f"unsupported checkpoint version {payload['version']}")
        return FoundationModel(
            user_emb=np.array(payload["user_emb"], dtype=np.float64),
            item_emb=np.array(payload["item_emb"], dtype=np.float64),
            w_user=np.array(payload["w_user"], dtype=np.float64),
            w_item=np.array(payload["w_item"], dtype=np.float64),
            b_hidden=np.array(payload["b_hidden"], dtype=np.float64),
            w_out=np.array(payload["w_out"], dtype=np.float64),
            b_out=np.array(payload["b_out"], dtype=np.float64),
            trained_on_slot=int(payload["trained_on_slot"]),
            holdout_auc=float(payload["holdout_auc"]),
        )


def foundation_predict(model: FoundationModel, world: WorldState, user_id: int, item_id: int) -> float:
    """Predicted CTR in (0, 1) for one pair; pure, cold items use the zero embedding."""
    world.check_user(user_id)
    world.check_item(item_id)
    return float(model.score_pairs(world, np.array([user_id]), np.array([item_id]))[0])


def foundation_loss_and_grads(
    model: FoundationModel,
    world: WorldState,
    user_ids: np.ndarray,
    item_ids: np.ndarray,
    labels: np.ndarray,
    l2: float = 0.0,
) -> tuple[float, dict[str, np.ndarray]]:
    """Mean BCE (+ L2 on weights/embeddings) and analytic gradients.

    Embedding gradients are returned as dense per-row tables scattered from
    the batch, matching what central finite differences over the parameter
    vector see.
    """
    n = len(labels)
    if n == 0:
        raise TrainingError("empty batch")
    y = np.asarray(labels, dtype=np.float64)
    fu = world.user_static_features(user_ids)
    fi = world.item_content_features(item_ids)
    xu = np.concatenate([model.user_emb[user_ids], fu], axis=1)
    xi = np.concatenate([model.item_emb[item_ids], fi], axis=1)
    z = xu @ model.w_user + xi @ model.w_item + model.b_hidden
    h = np.tanh(z)
    logit = h @ model.w_out + model.b_out
    p = 1.0 / (1.0 + np.exp(-logit))
    eps = 1e-12
    loss = float(np.mean(-y * np.log(p + eps) - (1.0 - y) * np.log(1.0 - p + eps)))
    d_e = model.user_emb.shape[1]

    dlogit = (p - y) / n
    dw_out = h.T @ dlogit
    db_out = np.array([dlogit.sum()])
    dh = dlogit[:, None] * model.w_out
    dz = dh * (1.0 - h * h)
    dw_user = xu.T @ dz
    dw_item = xi.T @ dz
    db_hidden = dz.sum(axis=0)
    dxu = dz @ model.w_user.T
    dxi = dz @ model.w_item.T
    duser_emb = np.zeros_like(model.user_emb)
    np.add.at(duser_emb, user_ids, dxu[:, :d_e])
    ditem_emb = np.zeros_like(model.item_emb)
    np.add.at(ditem_emb, item_ids, dxi[:, :d_e])

    if l2 > 0.0:
        loss += l2 * (
            float(np.sum(model.w_user**2))
            + float(np.sum(model.w_item**2))
            + float(np.sum(model.w_out**2))
            + float(np.sum(model.user_emb**2))
            + float(np.sum(model.item_emb**2))
        )
        dw_user += 2.0 * l2 * model.w_user
        dw_item += 2.0 * l2 * model.w_item
        dw_out += 2.0 * l2 * model.w_out
        duser_emb += 2.0 * l2 * model.user_emb
        ditem_emb += 2.0 * l2 * model.item_emb

    grads = {
        "user_emb": duser_emb,
        "item_emb": ditem_emb,
        "w_user": dw_user,
        "w_item": dw_item,
        "b_hidden": db_hidden,
        "w_out": dw_out,
        "b_out": db_out,
    }
    return loss, grads


class _Adam:
    def __init__(self, shapes: dict[str, tuple], lr: float):
        self.lr = lr
        self.t = 0
        self.m = {k: np.zeros(s) for k, s in shapes.items()}
        self.v = {k: np.zeros(s) for k, s in shapes.items()}

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        b1, b2, eps = 0.9, 0.999, 1e-8
        corr1 = 1.0 - b1**self.t
        corr2 = 1.0 - b2**self.t
        for k, g in grads.items():
            self.m[k] = b1 * self.m[k] + (1 - b1) * g
            self.v[k] = b2 * self.v[k] + (1 - b2) * g * g
            params[k] -= self.lr * (self.m[k] / corr1) / (np.sqrt(self.v[k] / corr2) + eps)


def train_foundation(
    events: list[EventRecord],
    world: WorldState,
    hyper: TrainConfig,
    trained_on_slot: int = 0,
) -> FoundationModel:
    """Fit embeddings and head on warm (exposure, clicked) pairs; freeze after.

    Raises TrainingError on an empty stream or if any event's item was
    uploaded at/after the training cutoff slot.
    """
    if not events:
        raise TrainingError("no training events")
    user_ids = np.array([e.user_id for e in events], dtype=np.int64)
    item_ids = np.array([e.item_id for e in events], dtype=np.int64)
    labels = np.array([e.clicked for e in events], dtype=np.float64)
    if np.any(world.item_upload_slot[item_ids] >= trained_on_slot):
        raise TrainingError("training stream contains items uploaded at/after the cutoff")

    gen = np.random.default_rng(hyper.seed)
    d_e = hyper.embed_dim
    n_user_feats = world.user_static_features(np.array([0])).shape[1]
    n_item_feats = world.item_content_features(np.array([0])).shape[1]
    model = FoundationModel(
        user_emb=np.zeros((world.n_users, d_e)),
        item_emb=np.zeros((world.n_items, d_e)),
        w_user=gen.normal(0.0, 0.2 / np.sqrt(d_e + n_user_feats), size=(d_e + n_user_feats, hyper.hidden_dim)),
        w_item=gen.normal(0.0, 0.2 / np.sqrt(d_e + n_item_feats), size=(d_e + n_item_feats, hyper.hidden_dim)),
        b_hidden=np.zeros(hyper.hidden_dim),
        w_out=gen.normal(0.0, 0.2 / np.sqrt(hyper.hidden_dim), size=hyper.hidden_dim),
        b_out=np.zeros(1),
        trained_on_slot=trained_on_slot,
    )
    # only ids present in the data get a (small random) trainable embedding;
    # everything else keeps the zero fallback row
    seen_users = np.unique(user_ids)
    seen_items = np.unique(item_ids)
    model.user_emb[seen_users] = gen.normal(0.0, 0.05, size=(len(seen_users), d_e))
    model.item_emb[seen_items] = gen.normal(0.0, 0.05, size=(len(seen_items), d_e))

    holdout = np.zeros(len(labels), dtype=bool)
    holdout[:: hyper.holdout_every] = True
    tr = ~holdout
    params = {
        "user_emb": model.user_emb,
        "item_emb": model.item_emb,
        "w_user": model.w_user,
        "w_item": model.w_item,
        "b_hidden": model.b_hidden,
        "w_out": model.w_out,
        "b_out": model.b_out,
    }
    opt = _Adam({k: v.shape for k, v in params.items()}, hyper.learning_rate)
    for _ in range(hyper.epochs):
        _, grads = foundation_loss_and_grads(
            model, world, user_ids[tr], item_ids[tr], labels[tr], l2=hyper.l2
        )
        opt.step(params, grads)

    from .metrics import roc_auc  # local import: metrics also stands alone

    ho_scores = model.score_pairs(world, user_ids[holdout], item_ids[holdout])
    if labels[holdout].min() != labels[holdout].max():
        model.holdout_auc = roc_auc(labels[holdout], ho_scores)
    return model
