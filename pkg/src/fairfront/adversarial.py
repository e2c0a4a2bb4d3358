"""Adversarial debiasing baseline.

A classifier and a small adversary play the usual minimax game: the
adversary learns to predict the sensitive attribute from the classifier's
score alone, and the classifier minimises Loss_y - lambda * Loss_a with the
adversary's parameters frozen (the gradient flows through the score).
Training alternates one full adversary epoch with one classifier minibatch
step after a short pretraining phase for each player.
"""
from __future__ import annotations

import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .data import Dataset, SplitPlan, make_splits, minibatches
from .errors import ConfigError
from .evaluation import evaluate_test_metrics
from .network import (
    CLAMP,
    MODE_EVAL,
    MODE_TRAIN,
    NetworkConfig,
    NetworkParams,
    _sigmoid,
    backprop,
    bce_loss,
    forward,
    init_network,
)
from .optim import AdamState, adam_step
from .pareto import LambdaGrid, ParetoCandidate, SweepConfig, SweepResult, _with_seed
from .propensity import calibrate_temperature, predict_propensity, train_propensity
from .training import TrainConfig, derive_seeds

log = logging.getLogger(__name__)

_PROPENSITY_STREAM = 2**33  # mirrors the scalarised sweep's stream layout
_CALIBRATION_STREAM = 2**33 + 1


@dataclass
class AdversaryConfig:
    """Adversary architecture and the alternation budget."""

    hidden_layers: int = 4
    hidden_width: int = 32
    pretrain_classifier_epochs: int = 2
    pretrain_adversary_epochs: int = 5
    rounds: int = 200
    learning_rate: float = 1e-3

    def __post_init__(self):
        if self.hidden_layers < 1 or self.hidden_width < 1:
            raise ConfigError("the adversary needs at least one hidden layer and unit")
        if min(self.pretrain_classifier_epochs, self.pretrain_adversary_epochs, self.rounds) < 0:
            raise ConfigError("pretraining epochs and rounds must be non-negative")

    def network_config(self, seed: int) -> NetworkConfig:
        # Input width 1: the adversary sees only the classifier's score.
        return NetworkConfig(
            layer_sizes=[1] + [self.hidden_width] * self.hidden_layers + [1],
            dropout_prob=0.0,
            seed=seed,
        )


@dataclass
class AdversarialResult:
    """Trained players plus alternation bookkeeping."""

    classifier_params: NetworkParams
    classifier_config: NetworkConfig
    adversary_params: NetworkParams
    adversary_config: NetworkConfig
    adversary_epochs: int = 0
    classifier_steps: int = 0


def classifier_objective_gradient(
    clf_params: NetworkParams,
    clf_config: NetworkConfig,
    adv_params: NetworkParams,
    adv_config: NetworkConfig,
    trace,
    labels: np.ndarray,
    sensitives: np.ndarray,
    lambda_: float,
) -> tuple[NetworkParams, float]:
    """Gradient of Loss_y - lambda * Loss_a w.r.t. the classifier.

    The adversary is frozen, but the fairness term's gradient still flows
    through the classifier scores it reads.  ``trace`` must be a forward
    pass of ``clf_params`` on the batch being scored; passing it in leaves
    the dropout regime (and any frozen masks) under the caller's control.
    Returns the parameter gradients and the objective value on that trace.
    """
    p = trace.output
    raw = _sigmoid(trace.preactivations[-1][:, 0])
    unclamped = (raw > CLAMP) & (raw < 1.0 - CLAMP)
    b = labels.size
    delta = np.where(unclamped, p - labels, 0.0) / b
    objective = bce_loss(p, labels)
    if lambda_ > 0.0:
        adv_trace = forward(adv_params, adv_config, p[:, None], MODE_EVAL)
        q = adv_trace.output
        adv_deltas: list = [None] * adv_config.num_layers
        adv_deltas[-1] = ((q - sensitives) / b)[:, None]
        _, input_grad = backprop(adv_params, adv_config, adv_trace, adv_deltas)
        # dLoss_a/dh of the classifier output: through the adversary's
        # input, then the classifier's clamped sigmoid.
        delta_adv = np.where(unclamped, input_grad[:, 0] * raw * (1.0 - raw), 0.0)
        delta = delta - lambda_ * delta_adv
        objective -= lambda_ * bce_loss(q, sensitives)
    deltas: list = [None] * clf_config.num_layers
    deltas[-1] = delta[:, None]
    grads, _ = backprop(clf_params, clf_config, trace, deltas)
    return grads, objective


def train_adversarial(
    features: np.ndarray,
    labels: np.ndarray,
    sensitives: np.ndarray,
    clf_template: NetworkConfig,
    train_config: TrainConfig,
    adv_config: AdversaryConfig,
    lambda_: float,
    seeds: tuple[int, int],
) -> AdversarialResult:
    """Run the full adversarial protocol for one lambda.

    Phases: (1) pretrain the classifier on plain BCE; (2) pretrain the
    adversary on the frozen classifier's eval-mode scores; (3) alternate
    adv_config.rounds times between one full adversary epoch and one
    classifier minibatch step on Loss_y - lambda * Loss_a.  Only the
    classifier uses dropout, and only in its own update steps.  One RNG
    stream drives all shuffling and dropout, so the run is a pure function
    of (data, configs, lambda, seeds).
    """
    if not 0.0 <= lambda_ <= 1.0:
        raise ConfigError(f"lambda must lie in [0, 1], got {lambda_}")
    y = np.asarray(labels, dtype=np.float64)
    a = np.asarray(sensitives, dtype=np.float64)
    n = features.shape[0]
    indices = np.arange(n)

    clf_cfg = _with_seed(clf_template, seeds[0])
    adv_init, loop_seed = derive_seeds(seeds[1])
    adv_cfg = adv_config.network_config(adv_init)
    clf = init_network(clf_cfg)
    adv = init_network(adv_cfg)
    clf_adam = AdamState.for_params(clf, learning_rate=train_config.learning_rate)
    adv_adam = AdamState.for_params(adv, learning_rate=adv_config.learning_rate)
    rng = np.random.default_rng(loop_seed)
    result = AdversarialResult(
        classifier_params=clf,
        classifier_config=clf_cfg,
        adversary_params=adv,
        adversary_config=adv_cfg,
    )

    def classifier_step(rows: np.ndarray):
        nonlocal clf, clf_adam
        trace = forward(clf, clf_cfg, features[rows], MODE_TRAIN, rng=rng)
        grads, _ = classifier_objective_gradient(
            clf, clf_cfg, adv, adv_cfg, trace, y[rows], a[rows], lambda_
        )
        clf, clf_adam = adam_step(clf_adam, clf, grads)

    def adversary_epoch():
        nonlocal adv, adv_adam
        for mb in minibatches(indices, train_config.batch_size, rng):
            rows = mb.indices
            scores = forward(clf, clf_cfg, features[rows], MODE_EVAL).output
            adv_trace = forward(adv, adv_cfg, scores[:, None], MODE_EVAL)
            q = adv_trace.output
            deltas: list = [None] * adv_cfg.num_layers
            deltas[-1] = ((q - a[rows]) / rows.size)[:, None]
            grads, _ = backprop(adv, adv_cfg, adv_trace, deltas)
            adv, adv_adam = adam_step(adv_adam, adv, grads)

    for _ in range(adv_config.pretrain_classifier_epochs):
        for mb in minibatches(indices, train_config.batch_size, rng):
            classifier_step(mb.indices)
    for _ in range(adv_config.pretrain_adversary_epochs):
        adversary_epoch()

    # Alternation proper; only these steps are reflected in the counters.
    cycler = _BatchCycler(indices, train_config.batch_size, rng)
    for _ in range(adv_config.rounds):
        adversary_epoch()
        result.adversary_epochs += 1
        classifier_step(cycler.next_batch())
        result.classifier_steps += 1

    result.classifier_params = clf
    result.adversary_params = adv
    log.debug(
        "adversarial run (lambda=%g): %d adversary epochs / %d classifier steps after pretraining",
        lambda_,
        result.adversary_epochs,
        result.classifier_steps,
    )
    return result


class _BatchCycler:
    """Hands out successive batches of a shuffled index cycle."""

    def __init__(self, indices: np.ndarray, batch_size: int, rng: np.random.Generator):
        self.indices = indices
        self.batch_size = batch_size
        self.rng = rng
        self.order = np.empty(0, dtype=np.int64)
        self.pos = 0

    def next_batch(self) -> np.ndarray:
        if self.pos >= self.order.size:
            self.order = self.indices[self.rng.permutation(self.indices.size)]
            self.pos = 0
        rows = self.order[self.pos : self.pos + self.batch_size]
        self.pos += self.batch_size
        return rows


def run_adversarial_sweep(
    dataset: Dataset,
    plan: SplitPlan,
    grid: LambdaGrid,
    config: SweepConfig,
    adv_config: AdversaryConfig | None = None,
    jobs: int | None = 1,
) -> SweepResult:
    """Adversarial counterpart of run_sweep: every lambda is trained fully.

    The per-split propensity model is fitted and calibrated exactly as in the
    scalarised sweep (evaluation needs it); there is no bounds discovery and
    no endpoint reuse.  config.train.epochs is ignored; the budget comes
    from adv_config.
    """
    if adv_config is None:
        adv_config = AdversaryConfig()
    splits = make_splits(dataset.n_rows, plan, sensitives=dataset.sensitives, labels=dataset.labels)
    payloads = [
        (split_id, tr, te, dataset, grid, config, adv_config, plan.master_seed)
        for split_id, (tr, te) in enumerate(splits)
    ]
    if jobs is None:
        jobs = max(1, min(len(payloads), os.cpu_count() or 1))
    if jobs > 1 and len(payloads) > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, len(payloads))) as pool:
            results = list(pool.map(_adv_split_worker, payloads))
    else:
        results = [_adv_split_worker(p) for p in payloads]
    candidates: list[ParetoCandidate] = []
    failures: list[dict] = []
    prop_by_split: dict[int, object] = {}
    for split_id, split_candidates, split_failures, prop_model in results:
        candidates.extend(split_candidates)
        failures.extend(split_failures)
        if prop_model is not None:
            prop_by_split[split_id] = prop_model
    candidates.sort(key=lambda c: (c.split_id, c.lambda_index))
    for failure in failures:
        log.warning("adversarial job failed: %s", failure)
    return SweepResult(candidates=candidates, failures=failures, propensity_models=prop_by_split)


def _adv_split_worker(payload):
    split_id, train_idx, test_idx, dataset, grid, config, adv_config, master_seed = payload
    x_tr = dataset.features[train_idx]
    y_tr = dataset.labels[train_idx].astype(np.float64)
    a_tr = dataset.sensitives[train_idx]
    clf_template = NetworkConfig(
        layer_sizes=config.layer_sizes(dataset.n_features), dropout_prob=config.dropout_prob
    )
    failures: list[dict] = []
    try:
        prop_seed = int(
            np.random.SeedSequence([master_seed, split_id, _PROPENSITY_STREAM]).generate_state(1)[0]
        )
        cal_rng = np.random.default_rng(
            np.random.SeedSequence([master_seed, split_id, _CALIBRATION_STREAM])
        )
        perm = cal_rng.permutation(train_idx.size)
        n_cal = max(1, int(np.floor(config.calibration_fraction * train_idx.size)))
        if n_cal >= train_idx.size:
            raise ConfigError("calibration holdout would swallow the whole training split")
        raw_model = train_propensity(
            x_tr[perm[n_cal:]], a_tr[perm[n_cal:]], config.propensity, prop_seed,
            meta={"split_id": split_id},
        )
        prop_model = calibrate_temperature(raw_model, x_tr[perm[:n_cal]], a_tr[perm[:n_cal]])
    except Exception as exc:
        return (
            split_id,
            [],
            [
                {
                    "split_id": split_id,
                    "lambda_index": k,
                    "lambda": grid.values[k],
                    "stage": "propensity",
                    "error": f"{type(exc).__name__}: {exc}",
                }
                for k in range(len(grid))
            ],
            None,
        )

    candidates: list[ParetoCandidate] = []
    for k, lam in enumerate(grid.values):
        try:
            run = train_adversarial(
                x_tr,
                y_tr,
                a_tr,
                clf_template,
                config.train,
                adv_config,
                lam,
                derive_seeds(master_seed, split_id, k),
            )
            metrics = evaluate_test_metrics(
                run.classifier_params,
                clf_template,
                dataset.features[test_idx],
                dataset.sensitives[test_idx],
                dataset.labels[test_idx],
                prop_model,
            )
            candidates.append(
                ParetoCandidate(
                    split_id=split_id,
                    lambda_index=k,
                    lambda_=lam,
                    params=run.classifier_params,
                    net_config=clf_template,
                    metrics=metrics,
                    final_epoch_objective=float("nan"),
                    final_learning_rate=config.train.learning_rate,
                )
            )
        except Exception as exc:
            failures.append(
                {
                    "split_id": split_id,
                    "lambda_index": k,
                    "lambda": lam,
                    "stage": "adversarial",
                    "error": f"{type(exc).__name__}: {exc}",
                }
            )
    return split_id, candidates, failures, prop_model
