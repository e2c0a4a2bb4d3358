"""Chebyshev-scalarised sweep over the risk/unfairness trade-off.

For each train/test split the sweep trains one classifier per lambda on the
objective max{(1-lambda) * R~, lambda * U~}.  The two endpoint runs double as
the standardisation-bound discovery: the lambda = 0 run records the range of
minibatch risks, the lambda = 1 run the range of minibatch penalties, and the
endpoint models are reused as the lambda = 0 / lambda = 1 candidates instead
of being retrained.
"""
from __future__ import annotations

import csv
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset, SplitPlan, make_splits
from .errors import ConfigError, InputError, ShapeError, TrainingError
from .evaluation import evaluate_test_metrics
from .metrics import PENALTY_MODES, PENALTY_PENULTIMATE
from .network import NetworkConfig, NetworkParams, StandardisationBounds
from .propensity import PropensityConfig, calibrate_temperature, predict_propensity, train_propensity
from .training import FitResult, TrainConfig, derive_seeds, fit_network

log = logging.getLogger(__name__)

LAMBDA_INTERIOR_LOW = 1e-2
LAMBDA_INTERIOR_HIGH = 0.9

CSV_HEADER = ["split_id", "lambda", "r_test", "u_ato", "mv_eo", "mv_eopp", "mv_dp", "nondominated_ato"]

# Stream tags keeping per-split auxiliary seeds clear of the lambda-job ids.
_PROPENSITY_STREAM = 2**33
_CALIBRATION_STREAM = 2**33 + 1


@dataclass
class LambdaGrid:
    """Ascending lambda values; endpoints 0 and 1 are always present."""

    values: list[float]

    def __post_init__(self):
        if len(self.values) < 2:
            raise ConfigError("a lambda grid needs at least the two endpoints")
        if self.values[0] != 0.0 or self.values[-1] != 1.0:
            raise ConfigError(f"lambda grid must run from 0 to 1, got {self.values[:3]}...")
        if any(b <= a for a, b in zip(self.values, self.values[1:])):
            raise ConfigError("lambda grid must be strictly ascending")

    def __len__(self) -> int:
        return len(self.values)


def build_lambda_grid(count: int) -> LambdaGrid:
    """{0, 1} plus count - 2 geometrically spaced values in [1e-2, 0.9]."""
    if count < 2:
        raise ConfigError(f"lambda count must be >= 2, got {count}")
    interior = count - 2
    if interior == 0:
        inner: list[float] = []
    elif interior == 1:
        inner = [float(np.sqrt(LAMBDA_INTERIOR_LOW * LAMBDA_INTERIOR_HIGH))]
    else:
        inner = [float(v) for v in np.geomspace(LAMBDA_INTERIOR_LOW, LAMBDA_INTERIOR_HIGH, interior)]
    return LambdaGrid(values=[0.0] + inner + [1.0])


@dataclass
class SweepConfig:
    """Everything run_sweep needs besides the data, splits and grid."""

    num_layers: int = 2
    hidden_width: int = 8
    dropout_prob: float = 0.2
    penalty_mode: str = PENALTY_PENULTIMATE
    train: TrainConfig = field(default_factory=TrainConfig)
    propensity: PropensityConfig = field(default_factory=PropensityConfig)
    calibration_fraction: float = 0.2

    def __post_init__(self):
        if self.num_layers < 1:
            raise ConfigError(f"num_layers must be >= 1, got {self.num_layers}")
        if self.hidden_width < 1:
            raise ConfigError(f"hidden_width must be >= 1, got {self.hidden_width}")
        if self.penalty_mode not in PENALTY_MODES:
            raise ConfigError(f"unknown penalty mode {self.penalty_mode!r}")
        if not 0.0 < self.calibration_fraction < 1.0:
            raise ConfigError("calibration_fraction must lie in (0, 1)")

    def layer_sizes(self, input_dim: int) -> list[int]:
        return [input_dim] + [self.hidden_width] * (self.num_layers - 1) + [1]


@dataclass
class BoundsResult:
    bounds: StandardisationBounds
    risk_fit: FitResult
    unfairness_fit: FitResult


def discover_bounds(
    features: np.ndarray,
    labels: np.ndarray,
    sensitives: np.ndarray,
    propensities: np.ndarray,
    net_template: NetworkConfig,
    train_config: TrainConfig,
    penalty_mode: str,
    risk_seeds: tuple[int, int],
    unfairness_seeds: tuple[int, int],
) -> BoundsResult:
    """Run the two endpoint trainings and collect the standardisation ranges.

    The lambda = 0 run is plain BCE training; every minibatch risk it ever
    sees defines [risk_min, risk_max].  The lambda = 1 run is pure penalty
    descent and defines the unfairness range from the batches where the
    penalty was computable.  Both trained models are returned for reuse.
    """
    risk_cfg = _with_seed(net_template, risk_seeds[0])
    risk_fit = fit_network(features, labels, risk_cfg, train_config, risk_seeds[1])
    unfair_cfg = _with_seed(net_template, unfairness_seeds[0])
    unfair_fit = fit_network(
        features,
        labels,
        unfair_cfg,
        train_config,
        unfairness_seeds[1],
        lambda_=1.0,
        sensitives=sensitives,
        propensities=propensities,
        penalty_mode=penalty_mode,
    )
    u_series = np.asarray(unfair_fit.unfairness_values)
    u_series = u_series[np.isfinite(u_series)]
    if u_series.size == 0:
        raise TrainingError("no minibatch of the lambda = 1 run contained both sensitive groups")
    r_series = np.asarray(risk_fit.risk_values)
    bounds = StandardisationBounds(
        risk_min=float(r_series.min()),
        risk_max=float(r_series.max()),
        unfairness_min=float(u_series.min()),
        unfairness_max=float(u_series.max()),
    )
    return BoundsResult(bounds=bounds, risk_fit=risk_fit, unfairness_fit=unfair_fit)


def _with_seed(template: NetworkConfig, seed: int) -> NetworkConfig:
    return NetworkConfig(
        layer_sizes=list(template.layer_sizes), dropout_prob=template.dropout_prob, seed=seed
    )


def train_scalarised(
    features: np.ndarray,
    labels: np.ndarray,
    sensitives: np.ndarray,
    propensities: np.ndarray,
    net_template: NetworkConfig,
    train_config: TrainConfig,
    lambda_: float,
    bounds: StandardisationBounds,
    penalty_mode: str,
    seeds: tuple[int, int],
) -> FitResult:
    """Train one interior-lambda classifier against frozen bounds."""
    if bounds is None:
        raise ConfigError("train_scalarised needs discovered standardisation bounds")
    cfg = _with_seed(net_template, seeds[0])
    return fit_network(
        features,
        labels,
        cfg,
        train_config,
        seeds[1],
        lambda_=lambda_,
        bounds=bounds,
        sensitives=sensitives,
        propensities=propensities,
        penalty_mode=penalty_mode,
    )


@dataclass
class ParetoCandidate:
    """One trained classifier with its held-out metric bundle."""

    split_id: int
    lambda_index: int
    lambda_: float
    params: NetworkParams
    net_config: NetworkConfig
    metrics: dict[str, float]
    final_epoch_objective: float
    final_learning_rate: float
    skipped_group_batches: int = 0


@dataclass
class SweepResult:
    candidates: list[ParetoCandidate]
    failures: list[dict]
    bounds: dict[int, StandardisationBounds] = field(default_factory=dict)
    propensity_models: dict[int, object] = field(default_factory=dict)


def run_sweep(
    dataset: Dataset, plan: SplitPlan, grid: LambdaGrid, config: SweepConfig, jobs: int | None = 1
) -> SweepResult:
    """Train and evaluate the full (split, lambda) grid of candidates.

    Per split: carve a calibration holdout, fit and temperature-calibrate the
    propensity model, discover standardisation bounds (whose endpoint models
    become the lambda = 0 and lambda = 1 candidates), then train each
    interior lambda.  Every candidate is scored on the split's test rows.
    Failed jobs are recorded and the sweep continues.  All randomness derives
    from (plan.master_seed, split_id, lambda_index), so results do not depend
    on the degree of parallelism.
    """
    splits = make_splits(dataset.n_rows, plan, sensitives=dataset.sensitives, labels=dataset.labels)
    payloads = [
        (split_id, train_idx, test_idx, dataset, grid, config, plan.master_seed)
        for split_id, (train_idx, test_idx) in enumerate(splits)
    ]
    if jobs is None:
        jobs = max(1, min(len(payloads), os.cpu_count() or 1))
    results = []
    if jobs > 1 and len(payloads) > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, len(payloads))) as pool:
            results = list(pool.map(_split_worker, payloads))
    else:
        results = [_split_worker(p) for p in payloads]

    candidates: list[ParetoCandidate] = []
    failures: list[dict] = []
    bounds_by_split: dict[int, StandardisationBounds] = {}
    prop_by_split: dict[int, object] = {}
    for split_id, split_candidates, split_failures, bounds, prop_model in results:
        candidates.extend(split_candidates)
        failures.extend(split_failures)
        if bounds is not None:
            bounds_by_split[split_id] = bounds
        if prop_model is not None:
            prop_by_split[split_id] = prop_model
    candidates.sort(key=lambda c: (c.split_id, c.lambda_index))
    for failure in failures:
        log.warning("sweep job failed: %s", failure)
    return SweepResult(
        candidates=candidates,
        failures=failures,
        bounds=bounds_by_split,
        propensity_models=prop_by_split,
    )


def _split_worker(payload):
    split_id, train_idx, test_idx, dataset, grid, config, master_seed = payload
    x_tr = dataset.features[train_idx]
    y_tr = dataset.labels[train_idx].astype(np.float64)
    a_tr = dataset.sensitives[train_idx]
    x_te = dataset.features[test_idx]
    y_te = dataset.labels[test_idx]
    a_te = dataset.sensitives[test_idx]
    net_template = NetworkConfig(
        layer_sizes=config.layer_sizes(dataset.n_features), dropout_prob=config.dropout_prob
    )
    k_last = len(grid) - 1

    def fail_all(stage: str, exc: Exception):
        return (
            split_id,
            [],
            [
                {
                    "split_id": split_id,
                    "lambda_index": k,
                    "lambda": grid.values[k],
                    "stage": stage,
                    "error": f"{type(exc).__name__}: {exc}",
                }
                for k in range(len(grid))
            ],
            None,
            None,
        )

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
        cal_rows, fit_rows = perm[:n_cal], perm[n_cal:]
        raw_model = train_propensity(
            x_tr[fit_rows],
            a_tr[fit_rows],
            config.propensity,
            prop_seed,
            meta={"split_id": split_id},
        )
        prop_model = calibrate_temperature(raw_model, x_tr[cal_rows], a_tr[cal_rows])
        e_tr = predict_propensity(prop_model, x_tr)
    except Exception as exc:  # propensity failure sinks the whole split
        return fail_all("propensity", exc)

    try:
        bounds_res = discover_bounds(
            x_tr,
            y_tr,
            a_tr,
            e_tr,
            net_template,
            config.train,
            config.penalty_mode,
            derive_seeds(master_seed, split_id, 0),
            derive_seeds(master_seed, split_id, k_last),
        )
    except Exception as exc:
        return fail_all("bounds", exc)

    candidates: list[ParetoCandidate] = []
    failures: list[dict] = []
    for k, lam in enumerate(grid.values):
        try:
            if k == 0:
                fit = bounds_res.risk_fit
            elif k == k_last:
                fit = bounds_res.unfairness_fit
            else:
                fit = train_scalarised(
                    x_tr,
                    y_tr,
                    a_tr,
                    e_tr,
                    net_template,
                    config.train,
                    lam,
                    bounds_res.bounds,
                    config.penalty_mode,
                    derive_seeds(master_seed, split_id, k),
                )
            metrics = evaluate_test_metrics(
                fit.params, net_template, x_te, a_te, y_te, prop_model
            )
            candidates.append(
                ParetoCandidate(
                    split_id=split_id,
                    lambda_index=k,
                    lambda_=lam,
                    params=fit.params,
                    net_config=net_template,
                    metrics=metrics,
                    final_epoch_objective=fit.epoch_objectives[-1],
                    final_learning_rate=fit.final_learning_rate,
                    skipped_group_batches=fit.skipped_group_batches,
                )
            )
        except Exception as exc:
            failures.append(
                {
                    "split_id": split_id,
                    "lambda_index": k,
                    "lambda": lam,
                    "stage": "train_or_eval",
                    "error": f"{type(exc).__name__}: {exc}",
                }
            )
    return split_id, candidates, failures, bounds_res.bounds, prop_model


def cull_nondominated(risks, unfairness) -> np.ndarray:
    """Boolean keep-mask: True where no point weakly dominates with one strict edge.

    Point j dominates i when r_j <= r_i and u_j <= u_i with at least one
    inequality strict; exact duplicates of a non-dominated pair are all kept.
    Sort-and-scan, O(n log n).
    """
    r = np.asarray(risks, dtype=np.float64)
    u = np.asarray(unfairness, dtype=np.float64)
    if r.shape != u.shape or r.ndim != 1:
        raise ShapeError(f"risks {r.shape} and unfairness {u.shape} must be equal-length vectors")
    if r.size == 0:
        raise InputError("no points to cull")
    if not (np.all(np.isfinite(r)) and np.all(np.isfinite(u))):
        raise InputError("culling requires finite coordinates")
    order = np.lexsort((u, r))
    keep = np.zeros(r.size, dtype=bool)
    best_u_prev = np.inf  # min u over strictly smaller r
    i = 0
    while i < r.size:
        j = i
        while j < r.size and r[order[j]] == r[order[i]]:
            j += 1
        group_min_u = u[order[i]]
        for k in range(i, j):
            idx = order[k]
            keep[idx] = u[idx] < best_u_prev and u[idx] == group_min_u
        best_u_prev = min(best_u_prev, group_min_u)
        i = j
    return keep


@dataclass
class FrontPoint:
    """A candidate's coordinates in one trade-off plane."""

    index: int
    risk: float
    unfairness: float
    dominated: bool


def build_front(risks, unfairness) -> list[FrontPoint]:
    """Wrap cull_nondominated's verdicts in per-point records."""
    keep = cull_nondominated(risks, unfairness)
    r = np.asarray(risks, dtype=np.float64)
    u = np.asarray(unfairness, dtype=np.float64)
    return [
        FrontPoint(index=i, risk=float(r[i]), unfairness=float(u[i]), dominated=not keep[i])
        for i in range(r.size)
    ]


def chebyshev_toy_minimiser(lambda_: float, j1, j2) -> int:
    """Index minimising max{(1-lambda) * J1, lambda * J2} on a sampled curve."""
    a = np.asarray(j1, dtype=np.float64)
    b = np.asarray(j2, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1 or a.size == 0:
        raise ShapeError("J1 and J2 must be equal-length non-empty vectors")
    return int(np.argmin(np.maximum((1.0 - lambda_) * a, lambda_ * b)))


def linear_toy_minimiser(lambda_: float, j1, j2) -> int:
    """Index minimising (1-lambda) * J1 + lambda * J2 on a sampled curve."""
    a = np.asarray(j1, dtype=np.float64)
    b = np.asarray(j2, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1 or a.size == 0:
        raise ShapeError("J1 and J2 must be equal-length non-empty vectors")
    return int(np.argmin((1.0 - lambda_) * a + lambda_ * b))


def write_candidates_csv(path, candidates: list[ParetoCandidate]):
    """Serialise candidates with a freshly computed (r_test, u_ato) keep-mask.

    Floats carry 17 significant digits so a rerun with identical numbers
    produces a byte-identical file.
    """
    if not candidates:
        raise InputError("no candidates to write")
    r = np.array([c.metrics["r_test"] for c in candidates])
    u = np.array([c.metrics["u_ato"] for c in candidates])
    keep = cull_nondominated(r, u)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for i, c in enumerate(candidates):
            writer.writerow(
                [str(c.split_id), _fmt(c.lambda_)]
                + [_fmt(c.metrics[name]) for name in ("r_test", "u_ato", "mv_eo", "mv_eopp", "mv_dp")]
                + [str(int(keep[i]))]
            )


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def read_candidates_csv(path) -> tuple[list[dict], str]:
    """Parse a candidates CSV; returns (rows, name-of-the-mask-column).

    Accepts any final column named nondominated_<metric> so culled copies can
    be re-culled.
    """
    try:
        fh = open(path, "r", encoding="utf-8", newline="")
    except FileNotFoundError:
        raise InputError(f"candidates file not found: {path}")
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise InputError(f"{path}: empty candidates file")
        if header[:7] != CSV_HEADER[:7] or len(header) != 8 or not header[7].startswith("nondominated"):
            raise InputError(f"{path}: unexpected candidates header {header}")
        rows = []
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 8:
                raise InputError(f"{path}:{line_no}: expected 8 cells, got {len(row)}")
            rows.append(
                {
                    "split_id": int(row[0]),
                    "lambda": float(row[1]),
                    "r_test": float(row[2]),
                    "u_ato": float(row[3]),
                    "mv_eo": float(row[4]),
                    "mv_eopp": float(row[5]),
                    "mv_dp": float(row[6]),
                    "nondominated": int(row[7]),
                }
            )
    if not rows:
        raise InputError(f"{path}: no candidate rows")
    return rows, header[7]
