"""Shared minibatch training loop.

One engine drives every gradient-trained network in the package: plain BCE
fits (classifier endpoints, the propensity model), penalty-only fits, and
interior Chebyshev fits.  Identity standardisation bounds make the lambda = 0
path literally a pure-BCE trainer, which is what the endpoint runs use while
recording the risk/unfairness ranges.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .data import minibatches
from .errors import ConfigError, DegenerateGroupError, TrainingError
from .metrics import PENALTY_PENULTIMATE, overlap_weights
from .network import (
    BRANCH_RISK,
    MODE_TRAIN,
    NetworkConfig,
    NetworkParams,
    StandardisationBounds,
    backward_composite,
    forward,
    init_network,
)
from .optim import AdamState, PlateauScheduler, adam_step, scheduler_step

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    """Loop hyperparameters, orthogonal to the architecture."""

    epochs: int = 500
    batch_size: int = 128
    learning_rate: float = 1e-3
    scheduler_factor: float = 0.9
    scheduler_patience: int = 10

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.learning_rate <= 0.0:
            raise ConfigError(f"learning_rate must be positive, got {self.learning_rate}")
        if not 0.0 < self.scheduler_factor <= 1.0:
            raise ConfigError(f"scheduler_factor must lie in (0, 1], got {self.scheduler_factor}")
        if self.scheduler_patience < 0:
            raise ConfigError(f"scheduler_patience must be >= 0, got {self.scheduler_patience}")


@dataclass
class FitResult:
    """Trained parameters plus the per-batch series the sweep layer consumes.

    risk_values / unfairness_values hold one entry per minibatch over the
    whole run (nan where the quantity was not computed for that batch).
    """

    params: NetworkParams
    epoch_objectives: list[float] = field(default_factory=list)
    risk_values: list[float] = field(default_factory=list)
    unfairness_values: list[float] = field(default_factory=list)
    final_learning_rate: float = 0.0
    skipped_group_batches: int = 0


def derive_seeds(*keys: int) -> tuple[int, int]:
    """Two independent 64-bit streams keyed by an integer tuple."""
    state = np.random.SeedSequence([int(k) for k in keys]).generate_state(4, dtype=np.uint64)
    return int(state[0]), int(state[1])


def fit_network(
    features: np.ndarray,
    labels: np.ndarray,
    net_config: NetworkConfig,
    train_config: TrainConfig,
    loop_seed: int,
    *,
    lambda_: float = 0.0,
    bounds: StandardisationBounds | None = None,
    sensitives: np.ndarray | None = None,
    propensities: np.ndarray | None = None,
    penalty_mode: str = PENALTY_PENULTIMATE,
) -> FitResult:
    """Adam-train a fresh network on (features, labels).

    The per-step objective is max{(1-lambda)*R~, lambda*U~}; with bounds=None
    the standardisation is the identity, so lambda = 0 yields plain BCE
    descent and lambda = 1 plain penalty descent.  The plateau scheduler is
    driven by the epoch mean of the scalarised objective.  Initialisation is
    deterministic in net_config.seed, shuffling and dropout in loop_seed; a
    minibatch containing a single sensitive group falls back to the risk
    branch and is excluded from the unfairness series.
    """
    n = features.shape[0]
    if labels.shape[0] != n:
        raise ConfigError("features and labels disagree on the row count")
    needs_penalty = lambda_ > 0.0
    if needs_penalty and (sensitives is None or propensities is None):
        raise ConfigError("lambda > 0 requires sensitives and propensities")

    params = init_network(net_config)
    adam = AdamState.for_params(params, learning_rate=train_config.learning_rate)
    sched = PlateauScheduler(
        factor=train_config.scheduler_factor, patience=train_config.scheduler_patience
    )
    rng = np.random.default_rng(loop_seed)
    result = FitResult(params=params)
    indices = np.arange(n)

    for epoch in range(train_config.epochs):
        batches = minibatches(
            indices,
            train_config.batch_size,
            rng,
            features=features,
            sensitives=sensitives,
            labels=labels,
            propensities=propensities,
        )
        batch_objectives = []
        for mb in batches:
            weights = None
            if needs_penalty:
                try:
                    weights = overlap_weights(mb.propensities, mb.sensitives)
                except DegenerateGroupError:
                    result.skipped_group_batches += 1
                    log.debug(
                        "epoch %d: batch of %d rows has a single sensitive group; "
                        "using the risk branch",
                        epoch,
                        mb.indices.size,
                    )
            trace = forward(params, net_config, mb.features, MODE_TRAIN, rng=rng)
            back = backward_composite(
                trace, params, net_config, mb.labels, weights, lambda_, bounds, penalty_mode
            )
            params, adam = adam_step(adam, params, back.gradients)
            result.risk_values.append(back.risk)
            result.unfairness_values.append(back.unfairness)
            batch_objectives.append(
                _objective_value(back.risk, back.unfairness, lambda_, bounds, back.active_branch)
            )
        epoch_mean = float(np.mean(batch_objectives))
        if not math.isfinite(epoch_mean):
            raise TrainingError(
                f"epoch {epoch}: non-finite objective {epoch_mean} "
                f"(lambda={lambda_}, lr={adam.learning_rate})"
            )
        result.epoch_objectives.append(epoch_mean)
        sched, adam = scheduler_step(sched, epoch_mean, adam)

    result.params = params
    result.final_learning_rate = adam.learning_rate
    return result


def _objective_value(
    risk: float,
    unfairness: float,
    lambda_: float,
    bounds: StandardisationBounds | None,
    branch: str,
) -> float:
    if branch == BRANCH_RISK and (lambda_ == 0.0 or math.isnan(unfairness)):
        # Pure-risk step (endpoint run or single-group fallback).
        r = risk if bounds is None else bounds.standardise_risk(risk)
        return (1.0 - lambda_) * r
    if bounds is None:
        r_t, u_t = risk, unfairness
    else:
        r_t = bounds.standardise_risk(risk)
        u_t = bounds.standardise_unfairness(unfairness)
    if lambda_ == 1.0:
        return u_t
    return max((1.0 - lambda_) * r_t, lambda_ * u_t)
