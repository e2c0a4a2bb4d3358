"""The shared minibatch training engine."""
from __future__ import annotations

import numpy as np
import pytest

from fairfront.data import generate_synthetic, minibatches
from fairfront.errors import ConfigError
from fairfront.network import (
    MODE_TRAIN,
    NetworkConfig,
    backprop,
    forward,
    init_network,
)
from fairfront.optim import AdamState, PlateauScheduler, adam_step, scheduler_step
from fairfront.training import TrainConfig, derive_seeds, fit_network


def test_derive_seeds_depends_on_every_key():
    base = derive_seeds(1, 2, 3)
    assert derive_seeds(1, 2, 3) == base
    assert derive_seeds(9, 2, 3) != base
    assert derive_seeds(1, 9, 3) != base
    assert derive_seeds(1, 2, 9) != base
    assert all(isinstance(s, int) and s >= 0 for s in base)


def test_fit_is_deterministic():
    ds = generate_synthetic(n=120, p=4, bias_strength=1.0, seed=0)
    net = NetworkConfig(layer_sizes=[4, 3, 1], dropout_prob=0.2, seed=11)
    cfg = TrainConfig(epochs=5, batch_size=32)
    r1 = fit_network(ds.features, ds.labels, net, cfg, loop_seed=77)
    r2 = fit_network(ds.features, ds.labels, net, cfg, loop_seed=77)
    for w1, w2 in zip(r1.params.weights, r2.params.weights):
        assert np.array_equal(w1, w2)
    assert r1.epoch_objectives == r2.epoch_objectives


def test_lambda_zero_run_is_bitwise_plain_bce_descent():
    """The bounds-discovery risk run must literally be unpenalised training."""
    ds = generate_synthetic(n=150, p=5, bias_strength=2.0, seed=3)
    net = NetworkConfig(layer_sizes=[5, 4, 1], dropout_prob=0.2, seed=21)
    cfg = TrainConfig(epochs=4, batch_size=32, learning_rate=1e-3)
    fitted = fit_network(ds.features, ds.labels, net, cfg, loop_seed=5)

    # independent reference loop: raw BCE deltas, same rng consumption order
    params = init_network(net)
    adam = AdamState.for_params(params, learning_rate=cfg.learning_rate)
    sched = PlateauScheduler(factor=cfg.scheduler_factor, patience=cfg.scheduler_patience)
    rng = np.random.default_rng(5)
    indices = np.arange(150)
    for _ in range(cfg.epochs):
        risks = []
        for mb in minibatches(indices, cfg.batch_size, rng, features=ds.features, labels=ds.labels):
            trace = forward(params, net, mb.features, MODE_TRAIN, rng=rng)
            p = trace.output
            deltas = [None] * net.num_layers
            deltas[-1] = ((p - mb.labels) / mb.labels.size)[:, None]
            grads, _ = backprop(params, net, trace, deltas)
            params, adam = adam_step(adam, params, grads)
            risks.append(
                float(-np.mean(mb.labels * np.log(p) + (1 - mb.labels) * np.log(1 - p)))
            )
        sched, adam = scheduler_step(sched, float(np.mean(risks)), adam)

    for w1, w2 in zip(fitted.params.weights + fitted.params.biases, params.weights + params.biases):
        assert np.array_equal(w1, w2)  # bitwise identical, not merely close


def test_lambda_positive_requires_group_data():
    ds = generate_synthetic(n=60, p=3, bias_strength=1.0, seed=2)
    net = NetworkConfig(layer_sizes=[3, 2, 1], dropout_prob=0.0, seed=0)
    with pytest.raises(ConfigError, match="sensitives and propensities"):
        fit_network(ds.features, ds.labels, net, TrainConfig(epochs=1, batch_size=16), 0, lambda_=0.5)


def test_single_group_batches_are_counted_and_survived():
    rng = np.random.default_rng(9)
    n = 60
    x = rng.normal(size=(n, 3))
    y = rng.integers(0, 2, size=n).astype(float)
    a = np.zeros(n, dtype=int)
    a[:4] = 1  # rare group: many batches of 8 will miss it
    e = np.clip(rng.uniform(0.2, 0.8, size=n), 0.01, 0.99)
    net = NetworkConfig(layer_sizes=[3, 3, 1], dropout_prob=0.0, seed=1)
    cfg = TrainConfig(epochs=6, batch_size=8)
    result = fit_network(
        x, y, net, cfg, loop_seed=13, lambda_=0.4, sensitives=a, propensities=e
    )
    assert result.skipped_group_batches > 0
    series = np.array(result.unfairness_values)
    assert np.isnan(series).sum() == result.skipped_group_batches
    assert np.isfinite(np.array(result.risk_values)).all()
    assert len(result.epoch_objectives) == cfg.epochs


def test_series_shapes_and_lr_reporting():
    ds = generate_synthetic(n=90, p=3, bias_strength=1.0, seed=5)
    net = NetworkConfig(layer_sizes=[3, 2, 1], dropout_prob=0.0, seed=2)
    cfg = TrainConfig(epochs=3, batch_size=30)
    result = fit_network(ds.features, ds.labels, net, cfg, loop_seed=1)
    assert len(result.risk_values) == 3 * 3
    assert len(result.unfairness_values) == len(result.risk_values)
    assert result.final_learning_rate <= cfg.learning_rate
