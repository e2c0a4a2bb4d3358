"""Propensity estimation (P(a=1 | x)) with temperature-scaled calibration.

The propensity network is a fixed small MLP trained with BCE on the
sensitive attribute.  Calibration rescales its logits by a single scalar
fitted on a held-out slice; the mapping is monotone, so score rankings are
untouched.  Downstream consumers treat the calibrated scores as frozen data.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, InputError
from .network import CLAMP, MODE_EVAL, NetworkConfig, NetworkParams, _sigmoid, forward
from .training import TrainConfig, fit_network

TEMPERATURE_BRACKET = (0.05, 20.0)
TEMPERATURE_TOL = 1e-4


@dataclass
class PropensityConfig:
    """Architecture and budget for the propensity fit."""

    hidden_layers: int = 3
    hidden_width: int = 32
    dropout_prob: float = 0.2
    epochs: int = 100
    batch_size: int = 128
    learning_rate: float = 1e-3

    def __post_init__(self):
        if self.hidden_layers < 1 or self.hidden_width < 1:
            raise ConfigError("propensity network needs at least one hidden layer and unit")


@dataclass
class PropensityModel:
    """Trained scorer plus its calibration temperature and provenance."""

    params: NetworkParams
    config: NetworkConfig
    temperature: float = 1.0
    training_meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (math.isfinite(self.temperature) and self.temperature > 0.0):
            raise ConfigError(f"temperature must be positive and finite, got {self.temperature}")


def train_propensity(
    features: np.ndarray, sensitives: np.ndarray, config: PropensityConfig, seed: int, meta: dict | None = None
) -> PropensityModel:
    """Fit the propensity network by plain BCE on the sensitive attribute.

    Returns an uncalibrated model (temperature 1).
    """
    layer_sizes = [features.shape[1]] + [config.hidden_width] * config.hidden_layers + [1]
    init_seed, loop_seed = _propensity_seeds(seed)
    net_config = NetworkConfig(layer_sizes=layer_sizes, dropout_prob=config.dropout_prob, seed=init_seed)
    train_config = TrainConfig(
        epochs=config.epochs, batch_size=config.batch_size, learning_rate=config.learning_rate
    )
    fit = fit_network(
        features, np.asarray(sensitives, dtype=np.float64), net_config, train_config, loop_seed
    )
    info = {"epochs": config.epochs, "seed": int(seed)}
    if meta:
        info.update(meta)
    return PropensityModel(params=fit.params, config=net_config, temperature=1.0, training_meta=info)


def _propensity_seeds(seed: int) -> tuple[int, int]:
    state = np.random.SeedSequence([int(seed)]).generate_state(2, dtype=np.uint64)
    return int(state[0]), int(state[1])


def propensity_logits(model: PropensityModel, features: np.ndarray) -> np.ndarray:
    """Pre-sigmoid outputs of the propensity network in eval mode."""
    trace = forward(model.params, model.config, features, MODE_EVAL)
    return trace.preactivations[-1][:, 0]


def predict_propensity(model: PropensityModel, features: np.ndarray) -> np.ndarray:
    """Calibrated scores sigmoid(logit / T), clamped inside (0, 1)."""
    logits = propensity_logits(model, features)
    return np.clip(_sigmoid(logits / model.temperature), CLAMP, 1.0 - CLAMP)


def calibrate_temperature(
    model: PropensityModel, val_features: np.ndarray, val_sensitives: np.ndarray
) -> PropensityModel:
    """Fit the temperature on a validation slice and return a new model.

    Minimises the validation BCE of sigmoid(logit / T) over log T in
    [log 0.05, log 20] by golden-section search (bracket tolerance 1e-4).
    T = 1 is always a feasible fallback, so the calibrated validation BCE can
    never exceed the uncalibrated one.
    """
    a = np.asarray(val_sensitives, dtype=np.float64)
    if a.ndim != 1 or a.shape[0] != val_features.shape[0]:
        raise InputError("validation features and sensitives disagree on the row count")
    logits = propensity_logits(model, val_features)

    def nll_at(log_t: float) -> float:
        p = np.clip(_sigmoid(logits / math.exp(log_t)), CLAMP, 1.0 - CLAMP)
        return float(-np.mean(a * np.log(p) + (1.0 - a) * np.log1p(-p)))

    lo, hi = (math.log(b) for b in TEMPERATURE_BRACKET)
    best_log_t = _golden_section(nll_at, lo, hi, TEMPERATURE_TOL)
    temperature = math.exp(best_log_t)
    if nll_at(best_log_t) > nll_at(0.0):
        temperature = 1.0
    return PropensityModel(
        params=model.params,
        config=model.config,
        temperature=temperature,
        training_meta=dict(model.training_meta),
    )


_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def _golden_section(f, lo: float, hi: float, tol: float) -> float:
    """Minimum of a unimodal f on [lo, hi] to bracket width tol."""
    x1 = hi - _INV_PHI * (hi - lo)
    x2 = lo + _INV_PHI * (hi - lo)
    f1, f2 = f(x1), f(x2)
    while hi - lo > tol:
        if f1 <= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - _INV_PHI * (hi - lo)
            f1 = f(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + _INV_PHI * (hi - lo)
            f2 = f(x2)
    return (lo + hi) / 2.0
