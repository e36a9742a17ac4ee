"""Unit checks for the dense/normalization layers and their gradients."""

import numpy as np
import pytest

from polynet.errors import PolyNetError
from polynet.nn.layers import (
    BatchNorm,
    Dense,
    InstanceNorm,
    global_average_pool,
    global_average_pool_backward,
    relu_backward,
    relu_forward,
    tanh_backward,
    tanh_forward,
)


def fd_check(value_fn, x, analytic, h=1e-6, tol=1e-7):
    numeric = np.empty_like(analytic)
    for idx in np.ndindex(x.shape):
        bumped = x.copy()
        bumped[idx] += h
        up = value_fn(bumped)
        bumped[idx] -= 2 * h
        numeric[idx] = (up - value_fn(bumped)) / (2 * h)
    assert analytic == pytest.approx(numeric, abs=tol)


def test_instance_norm_centers_and_scales_each_channel():
    rng = np.random.default_rng(0)
    layer = InstanceNorm(3)
    params = np.concatenate([np.full(3, 2.0), np.full(3, -1.0)])
    x = rng.normal(5.0, 4.0, size=(50, 3))
    out, _ = layer.forward(params, x)
    assert out.mean(axis=0) == pytest.approx(-1.0, abs=1e-12)
    assert out.std(axis=0) == pytest.approx(2.0, rel=1e-4)


def test_instance_norm_hand_example():
    layer = InstanceNorm(1, eps=0.0)
    params = layer.init_params()
    x = np.array([[1.0], [3.0]])
    out, _ = layer.forward(params, x)
    assert out[:, 0] == pytest.approx([-1.0, 1.0])


def test_instance_norm_gradients():
    rng = np.random.default_rng(1)
    layer = InstanceNorm(2)
    params = rng.normal(1.0, 0.2, size=4)
    x = rng.normal(size=(7, 2))
    weights = rng.normal(size=(7, 2))
    _, cache = layer.forward(params, x)
    g_params, g_x = layer.backward(cache, weights)

    fd_check(lambda p: float((weights * layer.forward(p, x)[0]).sum()), params, g_params)
    fd_check(lambda v: float((weights * layer.forward(params, v)[0]).sum()), x, g_x)


def test_batch_norm_symmetric_batch_maps_to_unit_values():
    layer = BatchNorm(1, eps=0.0)
    params = layer.init_params()
    out, _ = layer.forward(params, np.array([[-3.0], [3.0]]), train=True)
    assert out[:, 0] == pytest.approx([-1.0, 1.0])


def test_batch_norm_running_statistics_follow_torch_convention():
    layer = BatchNorm(1)
    params = layer.init_params()
    x = np.array([[1.0], [3.0]])
    layer.forward(params, x, train=True)
    # one step of momentum 0.1 from (mean 0, var 1); the running variance
    # uses the unbiased batch variance 2.0
    assert layer.running_mean[0] == pytest.approx(0.1 * 2.0)
    assert layer.running_var[0] == pytest.approx(0.9 * 1.0 + 0.1 * 2.0)


def test_batch_norm_eval_uses_running_statistics_and_keeps_them():
    rng = np.random.default_rng(2)
    layer = BatchNorm(2)
    params = layer.init_params()
    layer.forward(params, rng.normal(size=(8, 2)), train=True)
    mean_before = layer.running_mean.copy()
    var_before = layer.running_var.copy()
    x = rng.normal(size=(4, 2))
    out, cache = layer.forward(params, x, train=False)
    assert cache is None
    expected = (x - mean_before) / np.sqrt(var_before + layer.eps)
    assert out == pytest.approx(expected)
    assert np.array_equal(layer.running_mean, mean_before)
    assert np.array_equal(layer.running_var, var_before)


def test_batch_norm_rejects_single_sample_training_batches():
    layer = BatchNorm(2)
    with pytest.raises(PolyNetError, match="two samples"):
        layer.forward(layer.init_params(), np.ones((1, 2)), train=True)


def test_batch_norm_backward_requires_a_training_cache():
    layer = BatchNorm(2)
    _, cache = layer.forward(layer.init_params(), np.ones((3, 2)), train=False)
    with pytest.raises(PolyNetError, match="tape"):
        layer.backward(cache, np.ones((3, 2)))


def test_batch_norm_gradients():
    rng = np.random.default_rng(3)
    layer = BatchNorm(2)
    params = rng.normal(1.0, 0.2, size=4)
    x = rng.normal(size=(6, 2))
    weights = rng.normal(size=(6, 2))

    def value(p, v):
        saved = (layer.running_mean.copy(), layer.running_var.copy())
        out, _ = layer.forward(p, v, train=True)
        layer.running_mean[...], layer.running_var[...] = saved
        return float((weights * out).sum())

    _, cache = layer.forward(params, x, train=True)
    g_params, g_x = layer.backward(cache, weights)
    fd_check(lambda p: value(p, x), params, g_params)
    fd_check(lambda v: value(params, v), x, g_x)


def test_dense_forward_and_gradients():
    rng = np.random.default_rng(4)
    layer = Dense(3, 2)
    params = layer.init_params(rng)
    w, b = layer.split(params)
    x = rng.normal(size=(5, 3))
    out, cache = layer.forward(params, x)
    assert out == pytest.approx(x @ w + b)

    weights = rng.normal(size=(5, 2))
    g_params, g_x = layer.backward(params, cache, weights)
    fd_check(lambda p: float((weights * layer.forward(p, x)[0]).sum()), params, g_params)
    fd_check(
        lambda v: float((weights * layer.forward(params, v)[0]).sum()), x, g_x
    )


def test_activations_and_pooling_gradients():
    rng = np.random.default_rng(5)
    x = rng.normal(size=(6, 3))
    weights = rng.normal(size=(6, 3))

    out, cache = tanh_forward(x)
    assert out == pytest.approx(np.tanh(x))
    fd_check(
        lambda v: float((weights * tanh_forward(v)[0]).sum()),
        x,
        tanh_backward(cache, weights),
    )

    out, cache = relu_forward(x)
    assert out == pytest.approx(np.maximum(x, 0.0))
    fd_check(
        lambda v: float((weights * relu_forward(v)[0]).sum()),
        x,
        relu_backward(cache, weights),
    )

    pooled, n = global_average_pool(x)
    assert pooled == pytest.approx(x.mean(axis=0))
    w_vec = rng.normal(size=3)
    fd_check(
        lambda v: float((w_vec * global_average_pool(v)[0]).sum()),
        x,
        global_average_pool_backward(n, w_vec),
    )
