"""Training driver: determinism, model selection, and the trivial knobs."""

import numpy as np
import pytest

from polynet.errors import PolyNetError
from polynet.nn import NetConfig, Network, load_checkpoint, synthesize_sample
from polynet.tasks import read_metrics, split_validation, train_network
from polynet.tasks.train import DEFAULT_LR

CONFIG = NetConfig(
    num_classes=3,
    in_channels=2,
    degree=2,
    variant="squeezed",
    conv_channels=(3, 4, 5),
    fc_channels=(4,),
    pools=2,
    seed=7,
)


def make_inputs(n, seed=0, n_finest=12):
    rng = np.random.default_rng(seed)
    return [
        synthesize_sample(rng, CONFIG, n_finest=n_finest, label=int(rng.integers(3)))
        for _ in range(n)
    ]


def test_zero_lr_leaves_parameters_unchanged():
    inputs = make_inputs(8)
    result = train_network(inputs, CONFIG, epochs=2, lr=0.0, batch_size=4, seed=1)
    reference = Network(CONFIG)
    np.testing.assert_array_equal(result.network.params, reference.params)


def test_zero_epochs_saves_initialized_checkpoint(tmp_path):
    inputs = make_inputs(4)
    ckpt = tmp_path / "init.json"
    metrics = tmp_path / "metrics.csv"
    result = train_network(
        inputs, CONFIG, epochs=0, seed=1, checkpoint_path=ckpt, metrics_path=metrics
    )
    assert result.best_epoch == 0
    assert result.metrics == []
    loaded, _, extra = load_checkpoint(ckpt)
    np.testing.assert_array_equal(loaded.params, Network(CONFIG).params)
    assert extra["best_epoch"] == 0
    assert read_metrics(metrics) == []


def test_fixed_seed_reproduces_metrics_and_checkpoint(tmp_path):
    inputs = make_inputs(10)
    outs = []
    for name in ("a", "b"):
        ckpt = tmp_path / f"{name}.json"
        metrics = tmp_path / f"{name}.csv"
        train_network(
            inputs,
            CONFIG,
            epochs=3,
            batch_size=4,
            seed=42,
            checkpoint_path=ckpt,
            metrics_path=metrics,
        )
        outs.append((ckpt.read_bytes(), metrics.read_bytes()))
    assert outs[0][0] == outs[1][0]
    assert outs[0][1] == outs[1][1]


def test_different_seeds_shuffle_differently(tmp_path):
    inputs = make_inputs(10)
    logs = []
    for seed in (0, 1):
        metrics = tmp_path / f"{seed}.csv"
        train_network(
            inputs, CONFIG, epochs=2, batch_size=4, seed=seed, metrics_path=metrics
        )
        logs.append(metrics.read_bytes())
    assert logs[0] != logs[1]


def test_best_checkpoint_tracks_validation(tmp_path):
    inputs = make_inputs(12, seed=3)
    result = train_network(inputs, CONFIG, epochs=4, batch_size=4, seed=5)
    val_accs = [r["val_acc"] for r in result.metrics]
    assert result.best_epoch == int(np.argmax(val_accs)) + 1
    assert result.best_score == max(val_accs)


def test_no_validation_falls_back_to_train_metric():
    inputs = make_inputs(6, seed=4)
    result = train_network(
        inputs, CONFIG, epochs=2, batch_size=3, seed=5, val_fraction=0.0
    )
    train_accs = [r["train_acc"] for r in result.metrics]
    assert result.metrics[0]["val_acc"] is None
    assert result.best_score == max(train_accs)


def test_default_lr_depends_on_variant():
    assert DEFAULT_LR["squeezed"] > DEFAULT_LR["unsqueezed"]


def test_split_validation_partitions_without_overlap():
    inputs = make_inputs(10)
    rng = np.random.default_rng(0)
    train, val = split_validation(inputs, 0.3, rng)
    assert len(train) == 7 and len(val) == 3
    ids = {id(s) for s in inputs}
    assert {id(s) for s in train} | {id(s) for s in val} == ids
    assert not ({id(s) for s in train} & {id(s) for s in val})


def test_split_validation_never_starves_training():
    inputs = make_inputs(3)
    train, val = split_validation(inputs, 0.9, np.random.default_rng(0))
    assert len(train) >= 2


def test_unlabeled_sample_rejected():
    inputs = make_inputs(4)
    inputs[2].label = None
    with pytest.raises(PolyNetError):
        train_network(inputs, CONFIG, epochs=1)


def test_loss_decreases_through_driver():
    inputs = make_inputs(12, seed=9)
    result = train_network(
        inputs, CONFIG, epochs=10, lr=1e-2, batch_size=6, seed=2, val_fraction=0.0
    )
    losses = [r["train_loss"] for r in result.metrics]
    assert losses[-1] < losses[0]


def test_lr_decay_validated_and_changes_the_run():
    inputs = make_inputs(6, seed=4)
    for bad in (-0.1, 1.5):
        with pytest.raises(PolyNetError):
            train_network(inputs, CONFIG, epochs=1, lr_decay=bad)
    kwargs = dict(epochs=3, lr=1e-2, batch_size=3, seed=5, val_fraction=0.0)
    constant = train_network(inputs, CONFIG, lr_decay=0.0, **kwargs)
    annealed = train_network(inputs, CONFIG, lr_decay=1.0, **kwargs)
    # epoch 1 runs at the full step size either way; later epochs diverge
    assert constant.metrics[0]["train_loss"] == annealed.metrics[0]["train_loss"]
    assert constant.metrics[2]["train_loss"] != annealed.metrics[2]["train_loss"]


def test_five_sample_overfit_reaches_full_accuracy():
    # memorization smoke: a small net must drive 5 samples to 100% train
    # accuracy within 200 optimizer steps
    config = NetConfig(
        num_classes=3,
        in_channels=2,
        degree=2,
        variant="squeezed",
        conv_channels=(8, 12, 16),
        fc_channels=(12,),
        pools=2,
        seed=0,
    )
    rng = np.random.default_rng(123)
    inputs = [
        synthesize_sample(rng, config, n_finest=12, label=k % 3) for k in range(5)
    ]
    result = train_network(
        inputs,
        config,
        epochs=200,
        lr=1e-2,
        batch_size=5,
        seed=6,
        val_fraction=0.0,
    )
    accs = [r["train_acc"] for r in result.metrics]
    assert max(accs) == 1.0
