"""Model-selection rules for the neighbor count.

The data-driven discrepancy rule scans k downward from k_start and stops the
first time the empirical risk drops to the noise level, so it only ever
evaluates a suffix of the grid; AIC, GCV, hold-out and V-fold CV score every
candidate k. The oracle bias-variance rule needs the unknown truth and serves
as the reference in simulations.
"""

from __future__ import annotations

import csv
import json
import time
import warnings
from dataclasses import dataclass
from enum import Enum
from typing import IO, Iterable, Sequence

import numpy as np

from .data import Dataset
from .estimator import OracleCurves, fit_all, oracle_curves, predict_all
from .neighbors import NeighborTable, build_query_neighbors
from .riskcurve import LambdaCurve, RiskCurve, empirical_risk
from .seeding import spawn

__all__ = [
    "Rule",
    "SelectionResult",
    "GridCappedWarning",
    "StreamingRiskEvaluator",
    "estimate_noise_variance",
    "mdp_select",
    "lambda_mdp_select",
    "oracle_bv_select",
    "aic_select",
    "gcv_select",
    "holdout_select",
    "vfold_select",
    "run_selector",
    "to_record",
    "write_records_csv",
    "write_records_ndjson",
    "RECORD_FIELDS",
]


class Rule(str, Enum):
    MDP = "mdp"
    ORACLE_BV = "oracle_bv"
    AIC = "aic"
    GCV = "gcv"
    HOLDOUT = "holdout"
    VFCV = "vfcv"


class GridCappedWarning(UserWarning):
    """The candidate grid exceeded the available training size and was capped."""


@dataclass
class SelectionResult:
    """Outcome of one selector run.

    ``score_trace`` covers exactly the ks the rule examined; for the
    discrepancy rule that is a suffix of the grid, which is the point.
    ``elapsed_ns`` covers the selector call itself; experiment harnesses
    overwrite it with the full per-rule pipeline time.
    """

    rule: Rule
    chosen_k: int
    score_trace: dict[int, float]
    sigma_sq_used: float | None
    elapsed_ns: int
    ks_evaluated: int


def estimate_noise_variance(ds: Dataset, table: NeighborTable) -> float:
    """Plug-in noise variance from the low-bias two-neighbor fit.

    Averages the squared residuals of the k=2 estimator, scaled by
    1 / (1 - 1/2); consistent when the regression function is smooth.
    """
    if ds.n < 2:
        raise ValueError("noise variance estimation needs n >= 2")
    y = ds.responses
    nn = table.order[:, 1]
    residuals = y - 0.5 * (y + y[nn])
    return float(np.sum(residuals**2) / (ds.n * 0.5))


class StreamingRiskEvaluator:
    """Empirical risk evaluated incrementally while k decreases.

    Holds per-point running sums over the first k neighbors; stepping down
    removes one neighbor per point, an O(n) update, so a scan that stops
    after m steps has only ever touched k_start, k_start-1, ..., k_start-m.
    """

    def __init__(self, responses: np.ndarray, order: np.ndarray, k_start: int):
        n = order.shape[0]
        if not (1 <= k_start <= n):
            raise ValueError(f"k_start={k_start} out of range [1, {n}]")
        self._y = np.asarray(responses, dtype=np.float64)
        self._order = order
        self._k = k_start
        self._sums = self._y[order[:, :k_start]].sum(axis=1)
        self._evaluated: list[int] = []

    @classmethod
    def from_table(cls, ds: Dataset, table: NeighborTable, k_start: int) -> "StreamingRiskEvaluator":
        return cls(ds.responses, table.order, k_start)

    @property
    def current_k(self) -> int:
        return self._k

    @property
    def ks_evaluated(self) -> tuple[int, ...]:
        return tuple(self._evaluated)

    def risk(self) -> float:
        """R at the current k; marks it evaluated."""
        residuals = self._y - self._sums / self._k
        if not self._evaluated or self._evaluated[-1] != self._k:
            self._evaluated.append(self._k)
        return float(np.mean(residuals**2))

    def step_down(self) -> int:
        """Drop the current k-th neighbor of every point; returns the new k."""
        if self._k <= 1:
            raise ValueError("cannot step below k=1")
        self._sums = self._sums - self._y[self._order[:, self._k - 1]]
        self._k -= 1
        return self._k


def mdp_select(source: StreamingRiskEvaluator, sigma_sq: float) -> SelectionResult:
    """Largest k at or below the scan start whose empirical risk is <= sigma_sq.

    Scans downward and stops at the first satisfying k; since R_1 = 0 the rule
    always terminates. The score trace records exactly the evaluated suffix.
    """
    start = time.perf_counter_ns()
    k_start = source.current_k
    trace: dict[int, float] = {}
    while True:
        k = source.current_k
        r = source.risk()
        trace[k] = r
        if r <= sigma_sq or k == 1:
            break
        source.step_down()
    elapsed = time.perf_counter_ns() - start
    return SelectionResult(
        rule=Rule.MDP,
        chosen_k=k,
        score_trace=trace,
        sigma_sq_used=float(sigma_sq),
        elapsed_ns=elapsed,
        ks_evaluated=k_start - k + 1,
    )


def lambda_mdp_select(curve: LambdaCurve, sigma_sq: float) -> int | None:
    """Stopping point read off the degrees-of-freedom axis.

    Returns the k at the smallest lambda whose lower envelope is <= sigma_sq,
    or None when no grid point qualifies; agrees with the k-domain rule on
    the same grid.
    """
    hit = np.flatnonzero(curve.lower <= sigma_sq)
    if hit.size == 0:
        return None
    return int(curve.ks[hit[0]])


def oracle_bv_select(oracle: OracleCurves, k_max: int | None = None) -> SelectionResult:
    """First k where squared bias reaches the variance; grid top if none does."""
    start = time.perf_counter_ns()
    ks = oracle.ks
    bias_sq = oracle.bias_sq
    variance = oracle.variance
    if k_max is not None:
        keep = ks <= k_max
        ks, bias_sq, variance = ks[keep], bias_sq[keep], variance[keep]
    margin = bias_sq - variance
    crossings = np.flatnonzero(margin >= 0.0)
    chosen = int(ks[crossings[0]]) if crossings.size else int(ks[-1])
    trace = {int(k): float(m) for k, m in zip(ks, margin)}
    elapsed = time.perf_counter_ns() - start
    return SelectionResult(
        rule=Rule.ORACLE_BV,
        chosen_k=chosen,
        score_trace=trace,
        sigma_sq_used=oracle.sigma_sq,
        elapsed_ns=elapsed,
        ks_evaluated=len(ks),
    )


def _argmin_result(
    rule: Rule,
    ks: np.ndarray,
    scores: np.ndarray,
    sigma_sq_used: float | None,
    elapsed_ns: int,
    literal_minus_one: bool,
) -> SelectionResult:
    # Ties go to the smallest k: ks is ascending and argmin takes the first hit.
    chosen = int(ks[int(np.argmin(scores))])
    if literal_minus_one:
        chosen = max(chosen - 1, 1)
    return SelectionResult(
        rule=rule,
        chosen_k=chosen,
        score_trace={int(k): float(s) for k, s in zip(ks, scores)},
        sigma_sq_used=sigma_sq_used,
        elapsed_ns=elapsed_ns,
        ks_evaluated=len(ks),
    )


def aic_select(
    curve: RiskCurve, sigma_hat_sq: float, *, literal_minus_one: bool = False
) -> SelectionResult:
    """Penalized empirical risk R_k / sigma_hat_sq + 2/k, minimized over k >= 2.

    The 2/k term is twice the effective degrees of freedom tr(A_k) = n/k per
    observation, so the sample size cancels out of the score.
    """
    if sigma_hat_sq <= 0:
        raise ValueError("aic needs a positive noise variance estimate")
    start = time.perf_counter_ns()
    sub = curve.restrict(2)
    ks = sub.grid
    scores = sub.values / sigma_hat_sq + 2.0 / ks
    elapsed = time.perf_counter_ns() - start
    return _argmin_result(Rule.AIC, ks, scores, float(sigma_hat_sq), elapsed, literal_minus_one)


def gcv_select(curve: RiskCurve, *, literal_minus_one: bool = False) -> SelectionResult:
    """Empirical risk inflated by (1 - 1/k)^-2, minimized over k >= 2.

    k = 1 is excluded: the estimator interpolates there and the score is 0/0.
    """
    start = time.perf_counter_ns()
    sub = curve.restrict(2)
    ks = sub.grid
    scores = sub.values / (1.0 - 1.0 / ks) ** 2
    elapsed = time.perf_counter_ns() - start
    return _argmin_result(Rule.GCV, ks, scores, None, elapsed, literal_minus_one)


def _capped_grid(k_grid: Sequence[int], n_train: int, context: str) -> np.ndarray:
    ks = np.unique(np.asarray(list(k_grid), dtype=np.int64))
    if ks.size == 0 or ks[0] < 1:
        raise ValueError("k grid must contain positive integers")
    if ks[-1] > n_train:
        warnings.warn(
            f"{context}: grid capped at training size {n_train}",
            GridCappedWarning,
            stacklevel=3,
        )
        ks = ks[ks <= n_train]
        if ks.size == 0:
            raise ValueError(f"{context}: no grid point fits training size {n_train}")
    return ks


def holdout_select(
    ds: Dataset,
    seed: int,
    k_grid: Sequence[int],
    *,
    literal_minus_one: bool = False,
) -> SelectionResult:
    """Score each k by mean squared prediction error on a held-out half.

    The data are split once into halves (train floor(n/2), test the rest);
    the estimator is fit on the training half only.
    """
    if ds.n < 4:
        raise ValueError("hold-out needs n >= 4")
    start = time.perf_counter_ns()
    rng = spawn(seed, 0x686F)
    perm = rng.permutation(ds.n)
    n_train = ds.n // 2
    train = ds.take(perm[:n_train])
    test_idx = perm[n_train:]
    ks = _capped_grid(k_grid, n_train, "hold-out")
    qn = build_query_neighbors(train, ds.points[test_idx], seed=seed ^ 0x686F)
    preds = predict_all(train, qn, int(ks[-1]))
    y_test = ds.responses[test_idx]
    scores = ((preds[ks - 1] - y_test[None, :]) ** 2).mean(axis=1)
    elapsed = time.perf_counter_ns() - start
    return _argmin_result(Rule.HOLDOUT, ks, scores, None, elapsed, literal_minus_one)


def vfold_select(
    ds: Dataset,
    v: int = 5,
    seed: int = 0,
    k_grid: Sequence[int] = (),
    *,
    literal_minus_one: bool = False,
) -> SelectionResult:
    """V-fold cross-validation: average held-out mean squared error per k.

    Folds are a random near-equal partition; each fold's loss is normalized
    by its own size (a positive rescaling of the total, so the argmin is
    unchanged even when V does not divide n).
    """
    if v < 2 or v > ds.n:
        raise ValueError(f"fold count {v} out of range [2, {ds.n}]")
    start = time.perf_counter_ns()
    rng = spawn(seed, 0x7666)
    perm = rng.permutation(ds.n)
    folds = np.array_split(perm, v)
    min_train = ds.n - max(f.size for f in folds)
    ks = _capped_grid(k_grid, min_train, "v-fold")
    k_top = int(ks[-1])
    fold_scores = np.zeros((v, ks.size))
    for j, fold in enumerate(folds):
        train_idx = np.concatenate([f for i, f in enumerate(folds) if i != j])
        train = ds.take(train_idx)
        qn = build_query_neighbors(train, ds.points[fold], seed=(seed ^ 0x7666) + j)
        preds = predict_all(train, qn, k_top)
        y_fold = ds.responses[fold]
        fold_scores[j] = ((preds[ks - 1] - y_fold[None, :]) ** 2).mean(axis=1)
    scores = fold_scores.mean(axis=0)
    elapsed = time.perf_counter_ns() - start
    return _argmin_result(Rule.VFCV, ks, scores, None, elapsed, literal_minus_one)


def run_selector(
    rule: Rule | str,
    ds: Dataset,
    table: NeighborTable,
    *,
    k_max: int,
    sigma_sq: float | None = None,
    truth: np.ndarray | None = None,
    seed: int = 0,
    vfolds: int = 5,
    literal_minus_one: bool = False,
) -> SelectionResult:
    """Run one rule end to end on a dataset with its table already built.

    Times the rule's whole pipeline (risk curve or resampling fits included,
    table construction excluded) and stores it in ``elapsed_ns``. ``sigma_sq``
    is the discrepancy threshold for MDP, the plug-in estimate for AIC, and
    the true noise variance for the oracle rule.
    """
    rule = Rule(rule)
    start = time.perf_counter_ns()
    if rule is Rule.MDP:
        if sigma_sq is None:
            raise ValueError("mdp needs sigma_sq")
        source = StreamingRiskEvaluator.from_table(ds, table, k_start=k_max)
        result = mdp_select(source, sigma_sq)
    elif rule is Rule.AIC:
        if sigma_sq is None:
            raise ValueError("aic needs sigma_sq")
        curve = empirical_risk(ds, fit_all(ds, table, k_max))
        result = aic_select(curve, sigma_sq, literal_minus_one=literal_minus_one)
    elif rule is Rule.GCV:
        curve = empirical_risk(ds, fit_all(ds, table, k_max))
        result = gcv_select(curve, literal_minus_one=literal_minus_one)
    elif rule is Rule.ORACLE_BV:
        if truth is None or sigma_sq is None:
            raise ValueError("oracle rule needs truth and sigma_sq")
        result = oracle_bv_select(oracle_curves(truth, table, sigma_sq, k_max))
    elif rule is Rule.HOLDOUT:
        result = holdout_select(
            ds, seed, range(2, k_max + 1), literal_minus_one=literal_minus_one
        )
    elif rule is Rule.VFCV:
        result = vfold_select(
            ds, vfolds, seed, range(2, k_max + 1), literal_minus_one=literal_minus_one
        )
    else:  # pragma: no cover
        raise ValueError(f"unhandled rule {rule}")
    result.elapsed_ns = time.perf_counter_ns() - start
    return result


RECORD_FIELDS = ("rule", "chosen_k", "sigma_sq_used", "elapsed_ns", "ks_evaluated")


def to_record(result: SelectionResult, *, include_timing: bool = True) -> dict:
    """Flat serializable record of a selection outcome."""
    return {
        "rule": result.rule.value,
        "chosen_k": result.chosen_k,
        "sigma_sq_used": result.sigma_sq_used,
        "elapsed_ns": result.elapsed_ns if include_timing else None,
        "ks_evaluated": result.ks_evaluated,
    }


def write_records_csv(
    results: Iterable[SelectionResult], fh: IO[str], *, include_timing: bool = True
) -> None:
    writer = csv.writer(fh)
    writer.writerow(RECORD_FIELDS)
    for result in results:
        rec = to_record(result, include_timing=include_timing)
        writer.writerow(["" if rec[f] is None else rec[f] for f in RECORD_FIELDS])


def write_records_ndjson(
    results: Iterable[SelectionResult], fh: IO[str], *, include_timing: bool = True
) -> None:
    for result in results:
        fh.write(json.dumps(to_record(result, include_timing=include_timing), sort_keys=True))
        fh.write("\n")
