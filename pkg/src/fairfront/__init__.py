"""Fairness-accuracy Pareto front estimation for binary classifiers.

The package trains small fully-connected networks under a Chebyshev
scalarisation of predictive risk and a causal unfairness penalty, sweeps the
trade-off weight over data splits, and reports the non-dominated candidates.
"""
from .adversarial import (
    AdversarialResult,
    AdversaryConfig,
    classifier_objective_gradient,
    run_adversarial_sweep,
    train_adversarial,
)
from .data import (
    ColumnSchema,
    Dataset,
    RawTable,
    SplitPlan,
    encode_and_standardise,
    generate_synthetic,
    load_csv,
    make_splits,
    minibatches,
    write_dataset_csv,
)
from .errors import (
    ConfigError,
    DegenerateGroupError,
    EvaluationError,
    FairfrontError,
    IngestionError,
    InputError,
    NumericError,
    ShapeError,
    TrainingError,
)
from .evaluation import METRIC_NAMES, evaluate_test_metrics
from .metrics import (
    AtoResult,
    MvResult,
    OverlapWeights,
    ato_estimate,
    ato_hidden_penalty,
    conditional_mv_index,
    mv_index,
    overlap_weights,
)
from .network import (
    IDENTITY_BOUNDS,
    MODE_EVAL,
    MODE_TRAIN,
    BackwardResult,
    ForwardTrace,
    NetworkConfig,
    NetworkParams,
    StandardisationBounds,
    backward_composite,
    bce_loss,
    forward,
    init_network,
    load_model,
    save_model,
)
from .optim import AdamState, PlateauScheduler, adam_step, scheduler_step
from .pareto import (
    FrontPoint,
    LambdaGrid,
    ParetoCandidate,
    SweepConfig,
    SweepResult,
    build_front,
    build_lambda_grid,
    chebyshev_toy_minimiser,
    cull_nondominated,
    discover_bounds,
    linear_toy_minimiser,
    read_candidates_csv,
    run_sweep,
    train_scalarised,
    write_candidates_csv,
)
from .propensity import (
    PropensityConfig,
    PropensityModel,
    calibrate_temperature,
    predict_propensity,
    propensity_logits,
    train_propensity,
)
from .training import FitResult, TrainConfig, derive_seeds, fit_network

__version__ = "0.1.0"

__all__ = [
    "AdamState",
    "AdversarialResult",
    "AdversaryConfig",
    "AtoResult",
    "BackwardResult",
    "ColumnSchema",
    "ConfigError",
    "Dataset",
    "DegenerateGroupError",
    "EvaluationError",
    "FairfrontError",
    "FitResult",
    "ForwardTrace",
    "FrontPoint",
    "IDENTITY_BOUNDS",
    "MODE_EVAL",
    "MODE_TRAIN",
    "IngestionError",
    "InputError",
    "LambdaGrid",
    "METRIC_NAMES",
    "MvResult",
    "NetworkConfig",
    "NetworkParams",
    "NumericError",
    "OverlapWeights",
    "ParetoCandidate",
    "PlateauScheduler",
    "PropensityConfig",
    "PropensityModel",
    "RawTable",
    "ShapeError",
    "SplitPlan",
    "StandardisationBounds",
    "SweepConfig",
    "SweepResult",
    "TrainConfig",
    "TrainingError",
    "adam_step",
    "ato_estimate",
    "ato_hidden_penalty",
    "backward_composite",
    "bce_loss",
    "build_front",
    "build_lambda_grid",
    "calibrate_temperature",
    "chebyshev_toy_minimiser",
    "classifier_objective_gradient",
    "conditional_mv_index",
    "cull_nondominated",
    "derive_seeds",
    "discover_bounds",
    "encode_and_standardise",
    "evaluate_test_metrics",
    "fit_network",
    "forward",
    "generate_synthetic",
    "init_network",
    "linear_toy_minimiser",
    "load_csv",
    "load_model",
    "make_splits",
    "minibatches",
    "mv_index",
    "overlap_weights",
    "predict_propensity",
    "propensity_logits",
    "read_candidates_csv",
    "run_adversarial_sweep",
    "run_sweep",
    "save_model",
    "scheduler_step",
    "train_adversarial",
    "train_propensity",
    "train_scalarised",
    "write_candidates_csv",
    "write_dataset_csv",
]
