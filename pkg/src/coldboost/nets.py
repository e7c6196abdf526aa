"""Small dense networks in numpy with analytic gradients.

Both predictors (the frozen foundation scorer and the stacked cold scorer)
are tiny feed-forward nets. They are written out by hand, with explicit
backward passes, so that training gradients can be checked against central
finite differences.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import FeatureError

PRED_CLIP = 1e-7  # predictions are clamped to [PRED_CLIP, 1-PRED_CLIP] before logs


def sigmoid(z: np.ndarray | float) -> np.ndarray | float:
    return 1.0 / (1.0 + np.exp(-np.asarray(z, dtype=np.float64)))


def weighted_bce(labels: np.ndarray, preds: np.ndarray, weights: np.ndarray | float = 1.0) -> float:
    """Sum of per-sample weighted binary cross-entropy, with prediction clamping."""
    y = np.asarray(labels, dtype=np.float64)
    p = np.clip(np.asarray(preds, dtype=np.float64), PRED_CLIP, 1.0 - PRED_CLIP)
    w = np.broadcast_to(np.asarray(weights, dtype=np.float64), y.shape)
    return float(np.sum(w * (-y * np.log(p) - (1.0 - y) * np.log(1.0 - p))))


@dataclass
class DenseLayer:
    weights: np.ndarray  # (n_in, n_out)
    bias: np.ndarray  # (n_out,)
    activation: str = "tanh"  # "tanh" or "identity"

    def copy(self) -> "DenseLayer":
        return DenseLayer(self.weights.copy(), self.bias.copy(), self.activation)


def _activate(z: np.ndarray, kind: str) -> np.ndarray:
    if kind == "tanh":
        return np.tanh(z)
    if kind == "identity":
        return z
    raise FeatureError(f"unknown activation {kind!r}")


def _activate_grad(post: np.ndarray, kind: str) -> np.ndarray:
    if kind == "tanh":
        return 1.0 - post * post
    if kind == "identity":
        return np.ones_like(post)
    raise FeatureError(f"unknown activation {kind!r}")


@dataclass
class MLP:
    """Plain multi-layer perceptron producing one logit per row.

    The last layer must use the identity activation; the logistic squashing
    to (0, 1) is applied by callers so the logit stays available.
    """

    layers: list[DenseLayer] = field(default_factory=list)

    @staticmethod
    def init(dims: list[int], rng: np.random.Generator, scale: float = 0.3) -> "MLP":
        """Build layers for dims [n_in, h1, ..., 1]; hidden layers use tanh."""
        if len(dims) < 2 or dims[-1] != 1:
            raise FeatureError("dims must end in a single output unit")
        layers = []
        for i in range(len(dims) - 1):
            w = rng.normal(0.0, scale / np.sqrt(dims[i]), size=(dims[i], dims[i + 1]))
            b = np.zeros(dims[i + 1])
            act = "identity" if i == len(dims) - 2 else "tanh"
            layers.append(DenseLayer(w, b, act))
        return MLP(layers)

    @property
    def n_in(self) -> int:
        return self.layers[0].weights.shape[0]

    def forward(self, x: np.ndarray) -> np.ndarray:
        """Logits for a (N, n_in) batch; returns shape (N,)."""
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.n_in:
            raise FeatureError(f"expected (N, {self.n_in}) input, got {x.shape}")
        h = x
        for layer in self.layers:
            h = _activate(h @ layer.weights + layer.bias, layer.activation)
        return h[:, 0]

    def forward_cached(self, x: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
        """Like forward, but keeps post-activation values for backprop."""
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.n_in:
            raise FeatureError(f"expected (N, {self.n_in}) input, got {x.shape}")
        acts = [x]
        h = x
        for layer in self.layers:
            h = _activate(h @ layer.weights + layer.bias, layer.activation)
            acts.append(h)
        return h[:, 0], acts

    def backward(
        self, acts: list[np.ndarray], dlogit: np.ndarray
    ) -> tuple[list[tuple[np.ndarray, np.ndarray]], np.ndarray]:
        """Gradients of sum(dlogit * logit) w.r.t. layer params and the input.

        Returns ([(dW, db) per layer], dX).
        """
        delta = np.asarray(dlogit, dtype=np.float64)[:, None]
        grads: list[tuple[np.ndarray, np.ndarray]] = [None] * len(self.layers)  # type: ignore[list-item]
        for idx in range(len(self.layers) - 1, -1, -1):
            layer = self.layers[idx]
            delta = delta * _activate_grad(acts[idx + 1], layer.activation)
            grads[idx] = (acts[idx].T @ delta, delta.sum(axis=0))
            delta = delta @ layer.weights.T
        return grads, delta

    def param_vector(self) -> np.ndarray:
        return np.concatenate([np.concatenate([l.weights.ravel(), l.bias.ravel()]) for l in self.layers])

    def set_param_vector(self, vec: np.ndarray) -> None:
        pos = 0
        for layer in self.layers:
            n = layer.weights.size
            layer.weights = vec[pos : pos + n].reshape(layer.weights.shape).copy()
            pos += n
            n = layer.bias.size
            layer.bias = vec[pos : pos + n].copy()
            pos += n
        if pos != vec.size:
            raise FeatureError("parameter vector size mismatch")

    def copy(self) -> "MLP":
        return MLP([l.copy() for l in self.layers])
