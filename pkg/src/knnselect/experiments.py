"""Experiment harnesses: artificial-data sweeps, real-data pipelines, and the
selection-cost benchmark.

Replications derive independent seeds from one root seed, so reports are
bit-identical across runs and individual replications can be reproduced in
isolation. Per-rule wall-clock excludes neighbor-table construction by
default (the table is shared preprocessing); a flag folds it back in for
end-to-end numbers.
"""

from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import IO, Iterable, Sequence

import numpy as np

from .data import (
    Dataset,
    SyntheticSpec,
    generate_synthetic,
    load_csv,
    min_max_rescale,
    split_train_test,
    subsample,
    subsample_size_grid,
)
from .estimator import fit_all, predict
from .neighbors import build_query_neighbors, build_table
from .riskcurve import empirical_risk
from .selection import (
    Rule,
    StreamingRiskEvaluator,
    estimate_noise_variance,
    mdp_select,
    run_selector,
)
from .seeding import spawn

__all__ = [
    "SCHEMA_VERSION",
    "ArtificialConfig",
    "RealDataConfig",
    "ReplicationRecord",
    "SummaryRow",
    "ExperimentReport",
    "BenchmarkRow",
    "run_artificial",
    "run_real",
    "benchmark_complexity",
    "write_summary_csv",
    "write_raw_csv",
    "write_report_json",
    "write_benchmark_csv",
]

SCHEMA_VERSION = 1

FIG2A_SAMPLE_SIZES = (50, 80, 100, 160, 200, 250)


def _child_seed(rng: np.random.Generator) -> int:
    return int(rng.integers(0, 2**63 - 1))


@dataclass(frozen=True)
class ArtificialConfig:
    """Synthetic sweep: fresh covariates and noise every replication.

    ``sigma_source`` picks the discrepancy threshold for the MDP rule: the
    two-neighbor plug-in estimate (default, matching how the rule is used
    when the noise level is unknown) or the true variance. The oracle rule
    always uses the true variance; AIC always uses the plug-in estimate.
    ``k_start_policy`` is "sqrt" for floor(sqrt(n)) or "full" for n.
    """

    function: str = "f1"
    sigma: float = 0.15
    sample_sizes: tuple[int, ...] = FIG2A_SAMPLE_SIZES
    replications: int = 1000
    rules: tuple[str, ...] = ("mdp", "holdout", "gcv", "oracle_bv")
    root_seed: int = 0
    dimension: int = 3
    sigma_source: str = "estimate"
    k_start_policy: str = "sqrt"
    vfolds: int = 5
    include_table_time: bool = False
    literal_minus_one: bool = False

    def __post_init__(self) -> None:
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if any(n < 4 for n in self.sample_sizes):
            raise ValueError("sample sizes must be >= 4")
        if self.sigma_source not in ("estimate", "true"):
            raise ValueError("sigma_source must be 'estimate' or 'true'")
        if self.k_start_policy not in ("sqrt", "full"):
            raise ValueError("k_start_policy must be 'sqrt' or 'full'")
        for rule in self.rules:
            Rule(rule)

    def k_start(self, n: int) -> int:
        k = math.isqrt(n) if self.k_start_policy == "sqrt" else n
        return max(2, min(k, n))


@dataclass(frozen=True)
class RealDataConfig:
    """Real-data pipeline: rescale, 70/30 split, sub-sample grid, 25 trials."""

    csv_path: str
    target_column: str | int
    subsample_grid_divisors: tuple[int, ...] = (5, 4, 3, 2, 1)
    trials: int = 25
    rules: tuple[str, ...] = ("mdp", "aic", "gcv", "vfcv")
    root_seed: int = 0
    train_fraction: float = 0.7
    vfolds: int = 5
    include_table_time: bool = False
    literal_minus_one: bool = False

    def __post_init__(self) -> None:
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if any(q < 1 for q in self.subsample_grid_divisors):
            raise ValueError("divisors must be positive integers")
        for rule in self.rules:
            if Rule(rule) is Rule.ORACLE_BV:
                raise ValueError("oracle rule needs a known truth; not available on real data")


@dataclass(frozen=True)
class ReplicationRecord:
    """One (rule, replication) outcome.

    ``loss`` is the truth-based empirical-norm error (artificial runs);
    ``prediction_error`` is the Euclidean distance to the held-out responses
    (real-data runs). Exactly one of the two is set.
    """

    rule: str
    n: int
    replication: int
    chosen_k: int
    loss: float | None
    prediction_error: float | None
    elapsed_ns: int
    ks_evaluated: int
    sigma_sq_used: float | None


@dataclass(frozen=True)
class SummaryRow:
    rule: str
    n: int
    mean_loss: float
    se: float
    mean_runtime_ns: float
    replications: int


@dataclass(frozen=True)
class ExperimentReport:
    kind: str
    config: dict
    records: tuple[ReplicationRecord, ...]

    def summaries(self) -> list[SummaryRow]:
        """Per (rule, n) means with standard errors, straight off the raw records."""
        groups: dict[tuple[str, int], list[ReplicationRecord]] = {}
        for rec in self.records:
            groups.setdefault((rec.rule, rec.n), []).append(rec)
        rows = []
        for (rule, n), recs in sorted(groups.items()):
            metric = np.array(
                [rec.loss if rec.loss is not None else rec.prediction_error for rec in recs]
            )
            count = len(recs)
            se = float(metric.std(ddof=1) / math.sqrt(count)) if count > 1 else 0.0
            rows.append(
                SummaryRow(
                    rule=rule,
                    n=n,
                    mean_loss=float(metric.mean()),
                    se=se,
                    mean_runtime_ns=float(np.mean([rec.elapsed_ns for rec in recs])),
                    replications=count,
                )
            )
        return rows


def _artificial_replication(
    cfg: ArtificialConfig, n: int, rep: int
) -> list[ReplicationRecord]:
    rng = spawn(cfg.root_seed, n, rep)
    ds_seed = _child_seed(rng)
    table_seed = _child_seed(rng)
    selector_seed = _child_seed(rng)

    spec = SyntheticSpec(
        regression_function=cfg.function,
        noise_sd=cfg.sigma,
        sample_size=n,
        dimension=cfg.dimension,
        seed=ds_seed,
    )
    ds, truth = generate_synthetic(spec)
    t0 = time.perf_counter_ns()
    table = build_table(ds, table_seed)
    table_ns = time.perf_counter_ns() - t0

    k_start = cfg.k_start(n)
    true_sigma_sq = cfg.sigma**2
    need_estimate = cfg.sigma_source == "estimate" or "aic" in cfg.rules
    sigma_hat_sq = estimate_noise_variance(ds, table) if need_estimate else None
    mdp_sigma = sigma_hat_sq if cfg.sigma_source == "estimate" else true_sigma_sq

    fits_eval = fit_all(ds, table, k_start)
    records = []
    for rule_name in cfg.rules:
        rule = Rule(rule_name)
        if rule is Rule.MDP:
            sigma_arg = mdp_sigma
        elif rule is Rule.AIC:
            sigma_arg = sigma_hat_sq
        elif rule is Rule.ORACLE_BV:
            sigma_arg = true_sigma_sq
        else:
            sigma_arg = None
        result = run_selector(
            rule,
            ds,
            table,
            k_max=k_start,
            sigma_sq=sigma_arg,
            truth=truth if rule is Rule.ORACLE_BV else None,
            seed=selector_seed,
            vfolds=cfg.vfolds,
            literal_minus_one=cfg.literal_minus_one,
        )
        loss = float(np.mean((fits_eval.at(result.chosen_k) - truth) ** 2))
        elapsed = result.elapsed_ns + (table_ns if cfg.include_table_time else 0)
        records.append(
            ReplicationRecord(
                rule=rule.value,
                n=n,
                replication=rep,
                chosen_k=result.chosen_k,
                loss=loss,
                prediction_error=None,
                elapsed_ns=elapsed,
                ks_evaluated=result.ks_evaluated,
                sigma_sq_used=result.sigma_sq_used,
            )
        )
    return records


def run_artificial(cfg: ArtificialConfig, threads: int = 1) -> ExperimentReport:
    """Run the synthetic sweep; deterministic per root seed regardless of threads."""
    jobs = [(n, rep) for n in cfg.sample_sizes for rep in range(cfg.replications)]
    if threads == 1:
        chunks = [_artificial_replication(cfg, n, rep) for n, rep in jobs]
    else:
        workers = threads if threads > 0 else None
        with ThreadPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(lambda j: _artificial_replication(cfg, *j), jobs))
    records = tuple(rec for chunk in chunks for rec in chunk)
    return ExperimentReport(kind="artificial", config=asdict(cfg), records=records)


def _real_trial(
    cfg: RealDataConfig, train: Dataset, test: Dataset, n_s: int, trial: int
) -> list[ReplicationRecord]:
    rng = spawn(cfg.root_seed, n_s, trial)
    sub_seed = _child_seed(rng)
    table_seed = _child_seed(rng)
    query_seed = _child_seed(rng)
    selector_seed = _child_seed(rng)

    sub = subsample(train, n_s, sub_seed)
    t0 = time.perf_counter_ns()
    table = build_table(sub, table_seed)
    table_ns = time.perf_counter_ns() - t0
    sigma_hat_sq = estimate_noise_variance(sub, table)
    k_max = min(max(2, 3 * math.floor(math.log(n_s))), n_s)
    qn = build_query_neighbors(sub, test.points, seed=query_seed)

    records = []
    for rule_name in cfg.rules:
        rule = Rule(rule_name)
        sigma_arg = sigma_hat_sq if rule in (Rule.MDP, Rule.AIC) else None
        result = run_selector(
            rule,
            sub,
            table,
            k_max=k_max,
            sigma_sq=sigma_arg,
            seed=selector_seed,
            vfolds=cfg.vfolds,
            literal_minus_one=cfg.literal_minus_one,
        )
        pred = predict(sub, qn, result.chosen_k)
        error = float(np.linalg.norm(pred - test.responses))
        elapsed = result.elapsed_ns + (table_ns if cfg.include_table_time else 0)
        records.append(
            ReplicationRecord(
                rule=rule.value,
                n=n_s,
                replication=trial,
                chosen_k=result.chosen_k,
                loss=None,
                prediction_error=error,
                elapsed_ns=elapsed,
                ks_evaluated=result.ks_evaluated,
                sigma_sq_used=result.sigma_sq_used,
            )
        )
    return records


def run_real(cfg: RealDataConfig, threads: int = 1) -> ExperimentReport:
    """Rescale, split 70/30, then sweep the sub-sample grid with fresh trials.

    The test partition stays fixed; every trial re-subsamples the training
    partition and re-estimates the noise variance on the subsample.
    """
    ds = min_max_rescale(load_csv(cfg.csv_path, cfg.target_column))
    split_rng = spawn(cfg.root_seed, 0x73706C)
    train, test = split_train_test(ds, cfg.train_fraction, _child_seed(split_rng))
    grid = subsample_size_grid(train.n, cfg.subsample_grid_divisors)
    jobs = [(n_s, trial) for n_s in grid for trial in range(cfg.trials)]
    if threads == 1:
        chunks = [_real_trial(cfg, train, test, n_s, t) for n_s, t in jobs]
    else:
        workers = threads if threads > 0 else None
        with ThreadPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(lambda j: _real_trial(cfg, train, test, *j), jobs))
    records = tuple(rec for chunk in chunks for rec in chunk)
    return ExperimentReport(kind="real", config=asdict(cfg), records=records)


@dataclass(frozen=True)
class BenchmarkRow:
    n: int
    rule: str
    target_steps: int | None
    threshold: float | None
    chosen_k: int
    ks_evaluated: int
    elapsed_ns: float


def _default_positions(n: int) -> list[int]:
    fractions = (0.01, 0.05, 0.1, 0.2, 0.35, 0.5, 0.65, 0.8, 0.95)
    positions = {0, n - 1}
    positions.update(max(1, int(f * (n - 1))) for f in fractions)
    return sorted(positions)


def benchmark_complexity(
    n_list: Sequence[int],
    forced_threshold_positions: Sequence[int] | None = None,
    *,
    root_seed: int = 0,
    repeats: int = 3,
    sigma: float = 0.15,
    function: str = "f1",
) -> list[BenchmarkRow]:
    """Measure how the downward scan's cost tracks the number of evaluated ks.

    For each requested position m the threshold is pinned to the risk value
    at k = n - m, so the scan stops after about m steps; the reported
    ks_evaluated is the measured count. GCV and AIC rows are included as
    full-grid references. Runs sequentially: timings need a quiet machine.
    """
    rows: list[BenchmarkRow] = []
    for n in n_list:
        rng = spawn(root_seed, n)
        spec = SyntheticSpec(
            regression_function=function,
            noise_sd=sigma,
            sample_size=n,
            seed=_child_seed(rng),
        )
        ds, _ = generate_synthetic(spec)
        table = build_table(ds, _child_seed(rng))
        curve = empirical_risk(ds, fit_all(ds, table, n))
        sigma_hat_sq = estimate_noise_variance(ds, table)

        positions = (
            list(forced_threshold_positions)
            if forced_threshold_positions is not None
            else _default_positions(n)
        )
        # Warm-up: one full scan touches caches before any timed run.
        mdp_select(StreamingRiskEvaluator.from_table(ds, table, n), 0.0)
        for m in positions:
            if not (0 <= m <= n - 1):
                raise ValueError(f"scan position {m} out of range [0, {n - 1}]")
            threshold = float(curve.values[(n - m) - 1])
            total = 0
            result = None
            for _ in range(repeats):
                t0 = time.perf_counter_ns()
                source = StreamingRiskEvaluator.from_table(ds, table, n)
                result = mdp_select(source, threshold)
                total += time.perf_counter_ns() - t0
            assert result is not None
            rows.append(
                BenchmarkRow(
                    n=n,
                    rule=Rule.MDP.value,
                    target_steps=m,
                    threshold=threshold,
                    chosen_k=result.chosen_k,
                    ks_evaluated=result.ks_evaluated,
                    elapsed_ns=total / repeats,
                )
            )
        for rule, sigma_arg in ((Rule.GCV, None), (Rule.AIC, sigma_hat_sq)):
            total = 0
            result = None
            for _ in range(repeats):
                result = run_selector(rule, ds, table, k_max=n, sigma_sq=sigma_arg)
                total += result.elapsed_ns
            assert result is not None
            rows.append(
                BenchmarkRow(
                    n=n,
                    rule=rule.value,
                    target_steps=None,
                    threshold=None,
                    chosen_k=result.chosen_k,
                    ks_evaluated=result.ks_evaluated,
                    elapsed_ns=total / repeats,
                )
            )
    return rows


_SUMMARY_FIELDS = ("rule", "n", "mean_loss", "se", "mean_runtime_ns", "replications")
_RAW_FIELDS = (
    "rule",
    "n",
    "replication",
    "chosen_k",
    "loss",
    "prediction_error",
    "elapsed_ns",
    "ks_evaluated",
    "sigma_sq_used",
)
_BENCH_FIELDS = (
    "n",
    "rule",
    "target_steps",
    "threshold",
    "chosen_k",
    "ks_evaluated",
    "elapsed_ns",
)

_TIMING_FIELDS = {"elapsed_ns", "mean_runtime_ns"}


def _cell(value, name: str, include_timing: bool):
    if not include_timing and name in _TIMING_FIELDS:
        return ""
    if value is None:
        return ""
    return repr(value) if isinstance(value, float) else value


def write_summary_csv(
    report: ExperimentReport, fh: IO[str], *, include_timing: bool = True
) -> None:
    writer = csv.writer(fh)
    writer.writerow(_SUMMARY_FIELDS)
    for row in report.summaries():
        d = asdict(row)
        writer.writerow([_cell(d[f], f, include_timing) for f in _SUMMARY_FIELDS])


def write_raw_csv(
    report: ExperimentReport, fh: IO[str], *, include_timing: bool = True
) -> None:
    writer = csv.writer(fh)
    writer.writerow(_RAW_FIELDS)
    for rec in report.records:
        d = asdict(rec)
        writer.writerow([_cell(d[f], f, include_timing) for f in _RAW_FIELDS])


def write_report_json(
    report: ExperimentReport, fh: IO[str], *, include_timing: bool = True
) -> None:
    """JSON mirror of the summary and raw CSVs, schema-versioned."""

    def scrub(d: dict) -> dict:
        if not include_timing:
            return {k: (None if k in _TIMING_FIELDS else v) for k, v in d.items()}
        return d

    doc = {
        "schema_version": SCHEMA_VERSION,
        "kind": report.kind,
        "config": report.config,
        "summaries": [scrub(asdict(s)) for s in report.summaries()],
        "records": [scrub(asdict(r)) for r in report.records],
    }
    json.dump(doc, fh, indent=2, sort_keys=True)
    fh.write("\n")


def write_benchmark_csv(rows: Iterable[BenchmarkRow], fh: IO[str]) -> None:
    writer = csv.writer(fh)
    writer.writerow(_BENCH_FIELDS)
    for row in rows:
        d = asdict(row)
        writer.writerow([_cell(d[f], f, True) for f in _BENCH_FIELDS])
