import numpy as np
import pytest

from coldboost.errors import FeatureError
from coldboost.nets import MLP, sigmoid, weighted_bce


def finite_difference(f, vec, h=1e-6):
    """Central-difference gradient oracle over a flat parameter vector."""
    grad = np.zeros_like(vec)
    for i in range(len(vec)):
        up = vec.copy()
        up[i] += h
        down = vec.copy()
        down[i] -= h
        grad[i] = (f(up) - f(down)) / (2 * h)
    return grad


def rel_err(a, b):
    return np.abs(a - b) / (np.abs(a) + np.abs(b) + 1e-8)


def test_sigmoid_known_values():
    assert sigmoid(0.0) == pytest.approx(0.5)
    assert sigmoid(1.0) == pytest.approx(0.7310585786300049, rel=1e-12)


def test_weighted_bce_known_values():
    assert weighted_bce(np.array([1.0]), np.array([0.5])) == pytest.approx(np.log(2.0), rel=1e-12)
    assert weighted_bce(np.array([1.0]), np.array([0.5]), 2.0) == pytest.approx(2 * np.log(2.0), rel=1e-12)


def test_mlp_zero_params_give_zero_logit():
    gen = np.random.default_rng(0)
    mlp = MLP.init([4, 3, 1], gen)
    mlp.set_param_vector(np.zeros_like(mlp.param_vector()))
    x = gen.normal(size=(5, 4))
    assert np.allclose(mlp.forward(x), 0.0)


def test_mlp_shape_validation():
    gen = np.random.default_rng(0)
    mlp = MLP.init([4, 3, 1], gen)
    with pytest.raises(FeatureError):
        mlp.forward(np.zeros((2, 5)))


def test_param_vector_roundtrip():
    gen = np.random.default_rng(1)
    mlp = MLP.init([6, 4, 1], gen)
    vec = mlp.param_vector()
    other = MLP.init([6, 4, 1], np.random.default_rng(2))
    other.set_param_vector(vec)
    x = gen.normal(size=(3, 6))
    assert np.array_equal(mlp.forward(x), other.forward(x))


def test_backward_matches_finite_differences():
    gen = np.random.default_rng(3)
    mlp = MLP.init([5, 4, 1], gen, scale=0.7)
    x = gen.normal(size=(10, 5))
    y = gen.integers(0, 2, size=10).astype(np.float64)

    def loss_at(vec):
        probe = mlp.copy()
        probe.set_param_vector(vec)
        p = sigmoid(probe.forward(x))
        return weighted_bce(y, p)

    logits, acts = mlp.forward_cached(x)
    p = sigmoid(logits)
    grads, _ = mlp.backward(acts, p - y)
    flat = np.concatenate([np.concatenate([dw.ravel(), db.ravel()]) for dw, db in grads])
    fd = finite_difference(loss_at, mlp.param_vector())
    assert rel_err(flat, fd).max() < 1e-4


def test_backward_input_gradient_matches_finite_differences():
    gen = np.random.default_rng(4)
    mlp = MLP.init([4, 3, 1], gen, scale=0.7)
    x0 = gen.normal(size=(6, 4))
    y = gen.integers(0, 2, size=6).astype(np.float64)

    def loss_at_x(flat_x):
        p = sigmoid(mlp.forward(flat_x.reshape(6, 4)))
        return weighted_bce(y, p)

    logits, acts = mlp.forward_cached(x0)
    p = sigmoid(logits)
    _, dx = mlp.backward(acts, p - y)
    fd = finite_difference(loss_at_x, x0.ravel())
    assert rel_err(dx.ravel(), fd).max() < 1e-4
