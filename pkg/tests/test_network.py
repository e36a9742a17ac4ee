"""End-to-end network behavior: shapes, gradients, checkpoints, training."""

import json

import numpy as np
import pytest

from polynet.errors import PolyNetError, ShapeMismatchError
from polynet.nn import (
    Adam,
    NetConfig,
    Network,
    NetworkInput,
    check_network_gradients,
    cross_entropy,
    load_checkpoint,
    save_checkpoint,
    synthesize_sample,
)

SMALL = NetConfig(
    num_classes=3,
    in_channels=2,
    conv_channels=(3, 4, 5),
    fc_channels=(4,),
    pools=2,
    seed=7,
)


def small_batch(config=SMALL, n=3, seed=11, n_finest=12):
    rng = np.random.default_rng(seed)
    return [
        synthesize_sample(rng, config, n_finest=n_finest, label=int(rng.integers(config.num_classes)))
        for _ in range(n)
    ]


# ---- configuration ---------------------------------------------------------


def test_config_round_trips_through_dict():
    config = NetConfig(num_classes=10, variant="squeezed", seed=3)
    assert NetConfig.from_dict(config.to_dict()) == config


def test_config_rejects_inconsistent_settings():
    with pytest.raises(PolyNetError):
        NetConfig(num_classes=1)
    with pytest.raises(PolyNetError):
        NetConfig(num_classes=4, variant="dense")
    with pytest.raises(PolyNetError):
        NetConfig(num_classes=4, conv_channels=(8, 8), pools=3)


def test_conv_parameter_counts_for_the_digit_architecture():
    # three convolution blocks 3 -> 256 -> 256 -> 256 at degree 2
    base = dict(
        num_classes=10,
        in_channels=3,
        conv_channels=(256, 256, 256),
        fc_channels=(256, 128),
        pools=2,
    )
    full = Network(NetConfig(variant="unsqueezed", **base))
    slim = Network(NetConfig(variant="squeezed", **base))
    assert full.conv_param_count == 791040
    assert slim.conv_param_count == 135698
    assert slim.conv_param_count < 0.18 * full.conv_param_count


def test_parameter_vector_is_flat_and_views_are_bound():
    net = Network(SMALL)
    assert net.params.dtype == np.float64
    assert net.params.ndim == 1
    total = sum(hi - lo for lo, hi in net._slices.values())
    assert total == net.param_count
    view = net.view("fc_out")
    view[-1] = 123.0
    assert net.params[-1] == 123.0


def test_initialization_is_deterministic_in_the_seed():
    a = Network(SMALL)
    b = Network(SMALL)
    assert np.array_equal(a.params, b.params)
    c = Network(NetConfig(**{**SMALL.to_dict(), "seed": 8}))
    assert not np.array_equal(a.params, c.params)


# ---- forward/backward ------------------------------------------------------


def test_forward_shapes_and_determinism():
    net = Network(SMALL)
    batch = small_batch()
    logits = net.forward(batch, train=False)
    assert logits.shape == (3, 3)
    assert np.array_equal(logits, net.forward(batch, train=False))
    emb = net.embed(batch[0])
    assert emb.shape == (SMALL.conv_channels[-1],)


def test_evaluation_forward_leaves_no_tape():
    net = Network(SMALL)
    batch = small_batch()
    net.forward(batch, train=False)
    with pytest.raises(PolyNetError, match="tape"):
        net.backward(np.zeros((3, 3)))


def test_backward_consumes_the_tape():
    net = Network(SMALL)
    batch = small_batch()
    net.forward(batch, train=True)
    net.backward(np.zeros((3, 3)))
    with pytest.raises(PolyNetError, match="tape"):
        net.backward(np.zeros((3, 3)))


def test_training_forward_updates_batch_norm_buffers_but_eval_does_not():
    net = Network(SMALL)
    batch = small_batch()
    before = net.buffer_state()
    net.forward(batch, train=False)
    after_eval = net.buffer_state()
    for name in before:
        assert np.array_equal(before[name], after_eval[name])
    net.forward(batch, train=True)
    after_train = net.buffer_state()
    assert any(
        not np.array_equal(before[name], after_train[name]) for name in before
    )


@pytest.mark.parametrize("variant", ["unsqueezed", "squeezed"])
def test_whole_network_gradients_against_finite_differences(variant):
    assert check_network_gradients(variant=variant, degree=2, seed=0) < 1e-4


def test_whole_network_gradients_degree4():
    assert check_network_gradients(variant="unsqueezed", degree=4, seed=0) < 1e-4


def test_flat_graph_network_stacks_convolutions_without_pooling():
    # graph samples carry a single adjacency and no pooling maps
    config = NetConfig(
        num_classes=4,
        in_channels=3,
        conv_channels=(5, 6, 7),
        fc_channels=(6,),
        pools=0,
        seed=3,
    )
    net = Network(config)
    batch = small_batch(config, seed=4, n_finest=9)
    assert len(batch[0].adjacencies) == 1
    assert len(batch[0].pools) == 0
    logits = net.forward(batch, train=True)
    assert logits.shape == (3, 4)
    labels = np.array([s.label for s in batch])
    buffers = net.buffer_state()
    _, grad_logits = cross_entropy(logits, labels)
    grad = net.backward(grad_logits)
    net.set_buffer_state(buffers)

    rng = np.random.default_rng(1)
    h = 1e-5
    for k in rng.choice(net.param_count, size=25, replace=False):
        net.params[k] += h
        net.set_buffer_state(buffers)
        up, _ = cross_entropy(net.forward(batch, train=True), labels)
        net._tape = None
        net.params[k] -= 2 * h
        net.set_buffer_state(buffers)
        down, _ = cross_entropy(net.forward(batch, train=True), labels)
        net._tape = None
        net.params[k] += h
        net.set_buffer_state(buffers)
        assert grad[k] == pytest.approx((up - down) / (2 * h), abs=1e-6, rel=1e-4)


def test_gradients_with_pooling_after_activation():
    config = NetConfig(
        num_classes=3,
        in_channels=2,
        conv_channels=(3, 4),
        fc_channels=(4,),
        pools=1,
        tanh_before_pool=False,
        seed=5,
    )
    net = Network(config)
    batch = small_batch(config, seed=6)
    labels = np.array([s.label for s in batch])
    buffers = net.buffer_state()
    logits = net.forward(batch, train=True)
    _, grad_logits = cross_entropy(logits, labels)
    grad = net.backward(grad_logits)
    net.set_buffer_state(buffers)

    rng = np.random.default_rng(0)
    h = 1e-5
    for k in rng.choice(net.param_count, size=25, replace=False):
        net.params[k] += h
        net.set_buffer_state(buffers)
        up, _ = cross_entropy(net.forward(batch, train=True), labels)
        net._tape = None
        net.params[k] -= 2 * h
        net.set_buffer_state(buffers)
        down, _ = cross_entropy(net.forward(batch, train=True), labels)
        net._tape = None
        net.params[k] += h
        net.set_buffer_state(buffers)
        assert grad[k] == pytest.approx((up - down) / (2 * h), abs=1e-6, rel=1e-4)


def test_forward_rejects_inconsistent_samples():
    net = Network(SMALL)
    batch = small_batch()
    good = batch[0]
    with pytest.raises(ShapeMismatchError, match="shape mismatch"):
        net.forward(
            [NetworkInput(good.features[:, :1], good.adjacencies, good.pools)]
        )
    with pytest.raises(ShapeMismatchError, match="shape mismatch"):
        net.forward(
            [NetworkInput(good.features, good.adjacencies[:-1], good.pools)]
        )
    with pytest.raises(ShapeMismatchError, match="shape mismatch"):
        net.forward([NetworkInput(good.features, good.adjacencies, good.pools[:-1])])
    with pytest.raises(ShapeMismatchError, match="shape mismatch"):
        net.forward(
            [NetworkInput(good.features[:-1], good.adjacencies, good.pools)]
        )
    with pytest.raises(PolyNetError):
        net.forward([])


def test_head_forward_validates_embedding_width():
    net = Network(SMALL)
    with pytest.raises(ShapeMismatchError, match="shape mismatch"):
        net.head_forward(np.zeros((2, 99)))


# ---- optimizer --------------------------------------------------------------


def test_adam_first_step_is_signed_learning_rate():
    params = np.zeros(4)
    grad = np.array([0.3, -2.0, 5.0, -1e-4])
    opt = Adam(4, lr=0.1)
    assert opt.step(params, grad)
    assert params == pytest.approx(-0.1 * np.sign(grad), rel=1e-3)


def test_adam_skips_non_finite_gradients():
    params = np.ones(3)
    opt = Adam(3, lr=0.1)
    grad = np.array([1.0, np.nan, 0.0])
    assert not opt.step(params, grad)
    assert np.array_equal(params, np.ones(3))
    assert opt.t == 0
    assert not opt.step(params, np.array([np.inf, 0.0, 0.0]))
    assert opt.t == 0


def test_adam_state_round_trip():
    rng = np.random.default_rng(9)
    params = rng.normal(size=5)
    opt = Adam(5, lr=0.01)
    for _ in range(3):
        opt.step(params, rng.normal(size=5))
    clone = Adam.from_state(opt.state_dict())
    p1, p2 = params.copy(), params.copy()
    grad = rng.normal(size=5)
    opt.step(p1, grad)
    clone.step(p2, grad)
    assert np.array_equal(p1, p2)


# ---- checkpoints -------------------------------------------------------------


def test_checkpoint_round_trip_is_bitwise(tmp_path):
    net = Network(SMALL)
    batch = small_batch()
    labels = np.array([s.label for s in batch])
    opt = Adam(net.param_count, lr=1e-3)
    for _ in range(3):
        logits = net.forward(batch, train=True)
        _, grad_logits = cross_entropy(logits, labels)
        opt.step(net.params, net.backward(grad_logits))

    path = tmp_path / "model.json"
    save_checkpoint(path, net, optimizer=opt, extra={"epoch": 3})
    restored, ropt, extra = load_checkpoint(path)

    assert np.array_equal(restored.params, net.params)
    for name, value in net.buffer_state().items():
        assert np.array_equal(restored.buffer_state()[name], value)
    assert extra == {"epoch": 3}
    assert ropt.t == opt.t
    assert np.array_equal(ropt.m, opt.m)
    assert np.array_equal(ropt.v, opt.v)
    assert np.array_equal(
        restored.forward(batch, train=False), net.forward(batch, train=False)
    )


def test_checkpoint_detects_config_tampering(tmp_path):
    net = Network(SMALL)
    path = tmp_path / "model.json"
    save_checkpoint(path, net)
    payload = json.loads(path.read_text())
    payload["config"]["num_classes"] = 7
    path.write_text(json.dumps(payload))
    with pytest.raises(PolyNetError, match="hash"):
        load_checkpoint(path)


def test_checkpoint_rejects_truncated_parameters(tmp_path):
    net = Network(SMALL)
    path = tmp_path / "model.json"
    save_checkpoint(path, net)
    payload = json.loads(path.read_text())
    smaller = Network(
        NetConfig(
            num_classes=3, in_channels=2, conv_channels=(2, 2, 2),
            fc_channels=(2,), pools=2,
        )
    )
    import base64

    payload["params"] = base64.b64encode(
        smaller.params.astype("<f8").tobytes()
    ).decode()
    path.write_text(json.dumps(payload))
    with pytest.raises(ShapeMismatchError, match="shape mismatch"):
        load_checkpoint(path)


def test_checkpoint_rejects_garbage_files(tmp_path):
    path = tmp_path / "model.json"
    path.write_text("not json at all {")
    with pytest.raises(PolyNetError, match="JSON"):
        load_checkpoint(path)


# ---- training ----------------------------------------------------------------


def test_network_overfits_a_handful_of_samples():
    config = NetConfig(
        num_classes=3,
        in_channels=2,
        conv_channels=(8, 12, 16),
        fc_channels=(12,),
        pools=2,
        seed=1,
    )
    net = Network(config)
    rng = np.random.default_rng(2)
    batch = [
        synthesize_sample(rng, config, n_finest=14, label=k % 3) for k in range(5)
    ]
    labels = np.array([s.label for s in batch])
    opt = Adam(net.param_count, lr=1e-2)
    loss = np.inf
    for step in range(200):
        logits = net.forward(batch, train=True)
        loss, grad_logits = cross_entropy(logits, labels)
        if loss < 0.01:
            break
        opt.step(net.params, net.backward(grad_logits))
    assert loss < 0.01, f"final loss {loss:.4f}"
