"""Group-disparity estimators: overlap-weighted mean contrasts and ECDF parity indices.

All estimators are plug-in statistics over finite samples.  They operate on
plain numpy arrays and know nothing about networks or training; the one
function that inspects a forward trace only reads its preactivation list.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Sequence

import numpy as np

from .errors import DegenerateGroupError, InputError, ShapeError

if TYPE_CHECKING:
    from .network import ForwardTrace

# Group-sum guard: weighted group totals below this are treated as degenerate.
WEIGHT_SUM_FLOOR = 1e-12

PENALTY_PENULTIMATE = "penultimate"
PENALTY_ALL_LAYERS = "all_layers"
PENALTY_MODES = (PENALTY_PENULTIMATE, PENALTY_ALL_LAYERS)


def _as_1d_float(x, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1:
        raise ShapeError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if arr.size == 0:
        raise InputError(f"{name} is empty")
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{name} contains non-finite entries")
    return arr


def _as_binary(x, name: str) -> np.ndarray:
    arr = np.asarray(x)
    if arr.ndim != 1:
        raise ShapeError(f"{name} must be one-dimensional, got shape {arr.shape}")
    arr = arr.astype(np.int64)
    if not np.isin(arr, (0, 1)).all():
        raise InputError(f"{name} must contain only 0/1 values")
    return arr


@dataclass
class OverlapWeights:
    """Per-row overlap weights together with the propensities they came from.

    weights[i] is 1 - e_i for treated rows (a_i = 1) and e_i for control rows
    (a_i = 0), which up-weights rows whose propensity lies away from the
    row's own group and damps rows with extreme scores.
    """

    weights: np.ndarray
    propensities: np.ndarray
    sensitives: np.ndarray


def overlap_weights(propensities, sensitives) -> OverlapWeights:
    """Build overlap weights w_i = a_i (1 - e_i) + (1 - a_i) e_i.

    Parameters
    ----------
    propensities : array of shape (n,)
        Estimated P(a=1 | x), strictly inside (0, 1).
    sensitives : array of shape (n,)
        Binary group indicators.

    Returns
    -------
    OverlapWeights

    Raises
    ------
    InputError
        If a propensity lies outside the open interval (0, 1).
    DegenerateGroupError
        If either group is absent or its weight sum falls below 1e-12.
    """
    e = _as_1d_float(propensities, "propensities")
    a = _as_binary(sensitives, "sensitives")
    if e.shape[0] != a.shape[0]:
        raise ShapeError(
            f"propensities ({e.shape[0]}) and sensitives ({a.shape[0]}) differ in length"
        )
    if np.any(e <= 0.0) or np.any(e >= 1.0):
        raise InputError("propensities must lie strictly inside (0, 1)")
    w = np.where(a == 1, 1.0 - e, e)
    for g in (0, 1):
        total = float(w[a == g].sum())
        if total < WEIGHT_SUM_FLOOR:
            raise DegenerateGroupError(
                f"group {g} has overlap-weight sum {total:.3e} (< {WEIGHT_SUM_FLOOR:.0e})"
            )
    return OverlapWeights(weights=w, propensities=e, sensitives=a)


@dataclass
class AtoResult:
    """Overlap-weighted contrast estimate.

    tau is a scalar for a single outcome vector and a 1-d array when a matrix
    of outcomes (one column per unit) was supplied.
    """

    tau: float | np.ndarray
    group_means: tuple[float | np.ndarray, float | np.ndarray]
    n_effective: tuple[float, float]


def ato_estimate(outcomes, weights: OverlapWeights) -> AtoResult:
    """Estimate the average treatment effect on the overlap population.

    tau = sum_i a_i o_i w_i / sum_i a_i w_i - sum_i (1-a_i) o_i w_i / sum_i (1-a_i) w_i

    Parameters
    ----------
    outcomes : array of shape (n,) or (n, d)
        Observed outcomes; columns are handled independently.
    weights : OverlapWeights
        Weights aligned with the outcome rows.

    Returns
    -------
    AtoResult
        tau, the two weighted group means, and Kish effective sample sizes.
    """
    o = np.asarray(outcomes, dtype=np.float64)
    if o.ndim not in (1, 2):
        raise ShapeError(f"outcomes must be 1- or 2-dimensional, got shape {o.shape}")
    if o.shape[0] != weights.weights.shape[0]:
        raise ShapeError(
            f"outcomes ({o.shape[0]} rows) and weights ({weights.weights.shape[0]}) differ in length"
        )
    if not np.all(np.isfinite(o)):
        raise InputError("outcomes contain non-finite entries")
    a = weights.sensitives
    w = weights.weights
    means = []
    n_eff = []
    for g in (1, 0):
        mask = a == g
        wg = w[mask]
        total = float(wg.sum())
        if total < WEIGHT_SUM_FLOOR:
            raise DegenerateGroupError(f"group {g} weight sum below {WEIGHT_SUM_FLOOR:.0e}")
        og = o[mask]
        if o.ndim == 1:
            means.append(float(np.dot(wg, og) / total))
        else:
            means.append(wg @ og / total)
        sq = float(np.dot(wg, wg))
        n_eff.append(total * total / sq if sq > 0.0 else 0.0)
    tau = means[0] - means[1]
    return AtoResult(tau=tau, group_means=(means[1], means[0]), n_effective=(n_eff[1], n_eff[0]))


def ato_hidden_penalty(
    trace: "ForwardTrace", weights: OverlapWeights, mode: str = PENALTY_PENULTIMATE
) -> tuple[float, list[np.ndarray]]:
    """Sum of absolute overlap-weighted contrasts over hidden preactivations.

    In ``penultimate`` mode only the last hidden layer's preactivations are
    penalised; in ``all_layers`` mode every hidden layer contributes.  A
    single-layer network has no hidden layers, so its penalty is zero under
    both modes.

    Returns
    -------
    (penalty, taus)
        penalty is the scalar sum of |tau| over the penalised units; taus
        holds one contrast vector per network layer (empty arrays for layers
        that are not penalised) so callers can reuse them for gradients.
    """
    if mode not in PENALTY_MODES:
        raise InputError(f"unknown penalty mode {mode!r}; expected one of {PENALTY_MODES}")
    num_layers = len(trace.preactivations)
    batch = trace.preactivations[0].shape[0] if num_layers else 0
    if batch != weights.weights.shape[0]:
        raise ShapeError(
            f"trace batch size ({batch}) and weights ({weights.weights.shape[0]}) differ"
        )
    if mode == PENALTY_PENULTIMATE:
        penalised = [num_layers - 2] if num_layers >= 2 else []
    else:
        penalised = list(range(num_layers - 1))
    taus: list[np.ndarray] = [np.empty(0) for _ in range(num_layers)]
    penalty = 0.0
    for idx in penalised:
        tau = ato_estimate(trace.preactivations[idx], weights).tau
        taus[idx] = np.atleast_1d(tau)
        penalty += float(np.abs(taus[idx]).sum())
    return penalty, taus


@dataclass
class MvResult:
    """Between-group ECDF discrepancy.

    value is the index itself.  For the conditional variant, per_stratum maps
    each retained stratum label to its within-stratum index and argmax names
    the stratum attaining the maximum.
    """

    value: float
    group_levels: np.ndarray
    group_probabilities: np.ndarray
    group_terms: np.ndarray
    per_stratum: dict = field(default_factory=dict)
    argmax_stratum: object = None


def mv_index(scores, groups) -> MvResult:
    """Plug-in index sum_r P(Z=z_r) * mean_i [F_r(S_i) - F(S_i)]^2.

    ECDFs are right-closed (P(S <= s)) and evaluated at the pooled sample
    points, so the outer mean integrates against the pooled empirical
    distribution.  Groups may take any number of discrete levels.

    Parameters
    ----------
    scores : array of shape (n,)
        Real-valued scores (for classifiers, predicted probabilities).
    groups : array of shape (n,)
        Discrete group labels; every level present counts.

    Returns
    -------
    MvResult
        value = the index; group_terms holds each level's inner mean-square
        before weighting by the level probability.
    """
    s = _as_1d_float(scores, "scores")
    z = np.asarray(groups)
    if z.ndim != 1:
        raise ShapeError(f"groups must be one-dimensional, got shape {z.shape}")
    if z.shape[0] != s.shape[0]:
        raise ShapeError(f"scores ({s.shape[0]}) and groups ({z.shape[0]}) differ in length")
    n = s.shape[0]
    order = np.sort(s)
    # F(S_i) for all i at once: right-closed counts via searchsorted on the pooled sort.
    pooled_cdf = np.searchsorted(order, s, side="right") / n
    levels, inverse, counts = np.unique(z, return_inverse=True, return_counts=True)
    probs = counts / n
    terms = np.empty(levels.shape[0])
    for r in range(levels.shape[0]):
        group_sorted = np.sort(s[inverse == r])
        group_cdf = np.searchsorted(group_sorted, s, side="right") / counts[r]
        diff = group_cdf - pooled_cdf
        terms[r] = float(np.mean(diff * diff))
    value = float(np.dot(probs, terms))
    return MvResult(value=value, group_levels=levels, group_probabilities=probs, group_terms=terms)


def conditional_mv_index(scores, groups, strata) -> MvResult:
    """Worst-stratum MV index: max_k of the index computed within stratum k.

    Strata with fewer than two distinct group levels cannot exhibit a
    between-group discrepancy; they are skipped with a warning and contribute
    zero.  Raises DegenerateGroupError when every stratum is skipped.
    """
    s = _as_1d_float(scores, "scores")
    z = np.asarray(groups)
    u = np.asarray(strata)
    if z.shape != s.shape or u.shape != s.shape:
        raise ShapeError(
            f"scores {s.shape}, groups {z.shape} and strata {u.shape} must share one length"
        )
    per_stratum: dict = {}
    best_value = 0.0
    best_stratum = None
    skipped = []
    for level in np.unique(u):
        mask = u == level
        if np.unique(z[mask]).shape[0] < 2:
            skipped.append(level)
            continue
        sub = mv_index(s[mask], z[mask])
        key = level.item() if hasattr(level, "item") else level
        per_stratum[key] = sub.value
        if best_stratum is None or sub.value > best_value:
            best_value = sub.value
            best_stratum = key
    if skipped:
        warnings.warn(
            f"strata {skipped} lack two group levels and were skipped", UserWarning, stacklevel=2
        )
    if best_stratum is None:
        raise DegenerateGroupError("every stratum lacks two group levels")
    levels = np.unique(z)
    return MvResult(
        value=best_value,
        group_levels=levels,
        group_probabilities=np.empty(0),
        group_terms=np.empty(0),
        per_stratum=per_stratum,
        argmax_stratum=best_stratum,
    )
