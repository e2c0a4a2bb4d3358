"""Adam and the plateau scheduler."""
from __future__ import annotations

import numpy as np
import pytest

from fairfront.errors import NumericError
from fairfront.network import NetworkParams
from fairfront.optim import AdamState, PlateauScheduler, adam_step, scheduler_step


def flat_params(value=0.0):
    return NetworkParams([np.full((1, 1), value)], [np.zeros(1)])


def grads_of(value):
    return NetworkParams([np.full((1, 1), value)], [np.zeros(1)])


def test_first_step_magnitude_is_learning_rate():
    # with bias correction the first update is lr * g / (|g| + eps)
    params = flat_params(0.0)
    state = AdamState.for_params(params, learning_rate=1e-3)
    new_params, new_state = adam_step(state, params, grads_of(2.0))
    assert new_params.weights[0][0, 0] == pytest.approx(-1e-3, rel=1e-6)
    assert new_state.step_count == 1


def test_adam_is_functional_and_deterministic():
    params = flat_params(1.0)
    state = AdamState.for_params(params)
    p1, s1 = adam_step(state, params, grads_of(0.5))
    p2, s2 = adam_step(state, params, grads_of(0.5))
    assert params.weights[0][0, 0] == 1.0  # inputs untouched
    assert state.step_count == 0
    assert np.array_equal(p1.weights[0], p2.weights[0])
    assert s1.step_count == s2.step_count == 1


def test_adam_minimises_quadratic():
    # J(w) = (w - 3)^2 from w=0; a few hundred steps should close most of the gap
    params = flat_params(0.0)
    state = AdamState.for_params(params, learning_rate=0.05)
    for _ in range(400):
        w = params.weights[0][0, 0]
        params, state = adam_step(state, params, grads_of(2.0 * (w - 3.0)))
    assert params.weights[0][0, 0] == pytest.approx(3.0, abs=0.05)


def test_adam_rejects_non_finite_gradients():
    params = flat_params(0.0)
    state = AdamState.for_params(params)
    with pytest.raises(NumericError):
        adam_step(state, params, grads_of(np.nan))


def test_scheduler_reduces_after_patience_then_resets():
    sched = PlateauScheduler(factor=0.9, patience=10)
    params = flat_params()
    state = AdamState.for_params(params, learning_rate=1e-3)
    lrs = []
    for _ in range(12):
        sched, state = scheduler_step(sched, 1.0, state)
        lrs.append(state.learning_rate)
    # 11 stalls are needed after the first epoch records the best loss
    assert lrs[-2] == 1e-3
    assert lrs[-1] == 1e-3 * 0.9
    assert sched.stall_count == 0


def test_scheduler_improvement_resets_counter():
    sched = PlateauScheduler(factor=0.9, patience=2)
    params = flat_params()
    state = AdamState.for_params(params, learning_rate=1e-3)
    sched, state = scheduler_step(sched, 1.0, state)
    sched, state = scheduler_step(sched, 1.0, state)   # stall 1
    sched, state = scheduler_step(sched, 0.5, state)   # improvement
    assert sched.stall_count == 0
    sched, state = scheduler_step(sched, 0.5, state)
    sched, state = scheduler_step(sched, 0.5, state)
    sched, state = scheduler_step(sched, 0.5, state)   # stall 3 > patience
    assert state.learning_rate == 1e-3 * 0.9


def test_scheduler_respects_min_lr():
    sched = PlateauScheduler(factor=0.5, patience=0, min_lr=4e-4)
    params = flat_params()
    state = AdamState.for_params(params, learning_rate=1e-3)
    for _ in range(10):
        sched, state = scheduler_step(sched, 1.0, state)
    assert state.learning_rate == 4e-4


def test_scheduler_untouched_state_is_same_object():
    sched = PlateauScheduler()
    params = flat_params()
    state = AdamState.for_params(params)
    new_sched, new_state = scheduler_step(sched, 0.7, state)
    assert new_state is state


def test_scheduler_rejects_non_finite_loss():
    sched = PlateauScheduler()
    state = AdamState.for_params(flat_params())
    with pytest.raises(NumericError):
        scheduler_step(sched, float("nan"), state)
