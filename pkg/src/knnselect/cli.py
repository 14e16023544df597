"""Command-line surface: select, simulate, realdata, benchmark.

Exit codes: 0 success, 1 data error (unreadable or malformed input), 2 config
error (bad flags or parameter combinations). Diagnostics go to stderr; stdout
carries only machine-readable records. Timing fields are blank unless
``--timing`` is passed, so same-seed runs produce byte-identical files.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict
from pathlib import Path

from . import __version__
from .data import DataError, load_csv, min_max_rescale
from .experiments import (
    SCHEMA_VERSION,
    ArtificialConfig,
    FIG2A_SAMPLE_SIZES,
    RealDataConfig,
    benchmark_complexity,
    run_artificial,
    run_real,
    write_benchmark_csv,
    write_raw_csv,
    write_report_json,
    write_summary_csv,
)
from .neighbors import build_table
from .selection import (
    Rule,
    estimate_noise_variance,
    run_selector,
    write_records_csv,
    write_records_ndjson,
)

__all__ = ["main", "ConfigError"]


class ConfigError(Exception):
    """Invalid flag combination or parameter value."""


def _int_list(text: str) -> list[int]:
    try:
        return [int(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _rule_list(text: str) -> list[str]:
    rules = [tok.strip().lower() for tok in text.split(",") if tok.strip()]
    for rule in rules:
        try:
            Rule(rule)
        except ValueError:
            choices = ", ".join(r.value for r in Rule)
            raise argparse.ArgumentTypeError(f"unknown rule {rule!r} (choices: {choices})")
    return rules


def _output_dir(args: argparse.Namespace) -> Path:
    if args.output_dir is not None:
        return Path(args.output_dir)
    return Path(os.environ.get("KNNSELECT_OUTPUT_DIR", "."))


def _write_manifest(path: Path, command: str, config: dict) -> None:
    doc = {
        "schema_version": SCHEMA_VERSION,
        "knnselect_version": __version__,
        "command": command,
        "config": config,
    }
    with path.open("w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")


def _say(args: argparse.Namespace, message: str) -> None:
    if not args.quiet:
        print(message, file=sys.stderr)


def cmd_select(args: argparse.Namespace) -> int:
    rules = args.rule
    if Rule.ORACLE_BV.value in rules:
        raise ConfigError("the oracle rule needs a known truth; not available for select")
    ds = load_csv(args.input, args.target)
    if args.rescale:
        ds = min_max_rescale(ds)
    k_max = args.k_max if args.k_max is not None else ds.n
    if not (1 <= k_max <= ds.n):
        raise ConfigError(f"--k-max {k_max} out of range [1, {ds.n}]")
    if k_max < 2 and any(r != Rule.MDP.value for r in rules):
        raise ConfigError("AIC/GCV/hold-out/V-fold grids start at k=2; raise --k-max")

    table = build_table(ds, args.seed)
    sigma_hat_sq = estimate_noise_variance(ds, table) if ds.n >= 2 else None
    if args.sigma is not None:
        mdp_sigma = args.sigma
    else:
        if sigma_hat_sq is None:
            raise ConfigError("noise estimation needs n >= 2; pass --sigma")
        mdp_sigma = sigma_hat_sq

    results = []
    for rule_name in rules:
        rule = Rule(rule_name)
        if rule is Rule.MDP:
            sigma_arg = mdp_sigma
        elif rule is Rule.AIC:
            if sigma_hat_sq is None:
                raise ConfigError("aic needs n >= 2 for its noise estimate")
            sigma_arg = sigma_hat_sq
        else:
            sigma_arg = None
        results.append(
            run_selector(
                rule,
                ds,
                table,
                k_max=k_max,
                sigma_sq=sigma_arg,
                seed=args.seed,
                vfolds=args.folds,
                literal_minus_one=args.literal_minus_one,
            )
        )

    for res in results:
        _say(args, f"{res.rule.value}: chosen_k={res.chosen_k} ks_evaluated={res.ks_evaluated}")

    writer = write_records_csv if args.format == "csv" else write_records_ndjson
    if args.output is not None:
        out = Path(args.output)
        with out.open("w", newline="", encoding="utf-8") as fh:
            writer(results, fh, include_timing=args.timing)
        config = {
            "input": str(args.input),
            "target": args.target,
            "rules": rules,
            "seed": args.seed,
            "k_max": k_max,
            "sigma": args.sigma,
            "estimate_sigma": args.sigma is None,
            "rescale": args.rescale,
            "folds": args.folds,
            "literal_minus_one": args.literal_minus_one,
            "format": args.format,
            "timing": args.timing,
        }
        _write_manifest(out.with_name(out.name + ".manifest.json"), "select", config)
    else:
        writer(results, sys.stdout, include_timing=args.timing)
    return 0


_PRESETS = {
    "fig2a": {"function": "f1", "sigma": 0.15, "sample_sizes": FIG2A_SAMPLE_SIZES},
    "fig2b": {"function": "f2", "sigma": 0.15, "sample_sizes": FIG2A_SAMPLE_SIZES},
}


def _load_config_file(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise DataError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path}: {exc}")
    if not isinstance(doc, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    return doc


def cmd_simulate(args: argparse.Namespace) -> int:
    settings: dict = {}
    if args.preset is not None:
        settings.update(_PRESETS[args.preset])
    if args.config is not None:
        settings.update(_load_config_file(args.config))
    for key, value in (
        ("function", args.function),
        ("sigma", args.sigma),
        ("sample_sizes", args.sizes),
        ("dimension", args.dim),
        ("replications", args.reps),
        ("rules", args.rule),
        ("root_seed", args.seed),
        ("sigma_source", args.sigma_source),
        ("k_start_policy", args.k_start_policy),
        ("include_table_time", args.include_table_time or None),
        ("literal_minus_one", args.literal_minus_one or None),
    ):
        if value is not None:
            settings[key] = value
    for key in ("sample_sizes", "rules"):
        if key in settings:
            settings[key] = tuple(settings[key])
    try:
        cfg = ArtificialConfig(**settings)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc))

    report = run_artificial(cfg, threads=args.threads)
    out = _output_dir(args)
    out.mkdir(parents=True, exist_ok=True)
    _emit_report(report, out, "artificial", args)
    _write_manifest(out / "artificial.manifest.json", "simulate", asdict(cfg))
    for row in report.summaries():
        _say(args, f"n={row.n} rule={row.rule} mean_loss={row.mean_loss:.6g} se={row.se:.3g}")
    return 0


def cmd_realdata(args: argparse.Namespace) -> int:
    try:
        cfg = RealDataConfig(
            csv_path=str(args.input),
            target_column=args.target,
            subsample_grid_divisors=tuple(args.divisors),
            trials=args.trials,
            rules=tuple(args.rule),
            root_seed=args.seed,
            train_fraction=args.train_fraction,
            vfolds=args.folds,
            include_table_time=args.include_table_time,
            literal_minus_one=args.literal_minus_one,
        )
    except ValueError as exc:
        raise ConfigError(str(exc))
    report = run_real(cfg, threads=args.threads)
    out = _output_dir(args)
    out.mkdir(parents=True, exist_ok=True)
    _emit_report(report, out, "realdata", args)
    _write_manifest(out / "realdata.manifest.json", "realdata", asdict(cfg))
    for row in report.summaries():
        _say(
            args,
            f"n_s={row.n} rule={row.rule} mean_error={row.mean_loss:.6g} se={row.se:.3g}",
        )
    return 0


def _emit_report(report, out: Path, prefix: str, args: argparse.Namespace) -> None:
    with (out / f"{prefix}_summary.csv").open("w", newline="", encoding="utf-8") as fh:
        write_summary_csv(report, fh, include_timing=args.timing)
    with (out / f"{prefix}_raw.csv").open("w", newline="", encoding="utf-8") as fh:
        write_raw_csv(report, fh, include_timing=args.timing)
    with (out / f"{prefix}_report.json").open("w", encoding="utf-8") as fh:
        write_report_json(report, fh, include_timing=args.timing)


def cmd_benchmark(args: argparse.Namespace) -> int:
    rows = benchmark_complexity(
        args.n,
        args.positions,
        root_seed=args.seed,
        repeats=args.repeats,
    )
    out = _output_dir(args)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "benchmark.csv"
    with path.open("w", newline="", encoding="utf-8") as fh:
        write_benchmark_csv(rows, fh)
    config = {
        "n": args.n,
        "positions": args.positions,
        "seed": args.seed,
        "repeats": args.repeats,
    }
    _write_manifest(out / "benchmark.manifest.json", "benchmark", config)
    _say(args, f"wrote {len(rows)} benchmark rows to {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="knnselect",
        description="Neighbor-count selection for k-NN regression under fixed design.",
    )
    parser.add_argument("--version", action="version", version=f"knnselect {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--seed", type=int, default=0, help="root seed (default 0)")
        p.add_argument("--quiet", action="store_true", help="suppress human summaries")
        p.add_argument(
            "--timing",
            action="store_true",
            help="include wall-clock fields in outputs (breaks byte-identical reruns)",
        )

    p_select = sub.add_parser("select", help="run selection rules on a CSV dataset")
    p_select.add_argument("--input", required=True, help="CSV file with a header row")
    p_select.add_argument("--target", required=True, help="response column name")
    p_select.add_argument(
        "--rule",
        type=_rule_list,
        default=[Rule.MDP.value],
        help="comma-separated rules: mdp,aic,gcv,holdout,vfcv (default mdp)",
    )
    sigma_group = p_select.add_mutually_exclusive_group()
    sigma_group.add_argument(
        "--sigma",
        type=float,
        default=None,
        help="known noise variance for the discrepancy threshold",
    )
    sigma_group.add_argument(
        "--estimate-sigma",
        action="store_true",
        help="estimate the noise variance from the two-neighbor fit (default)",
    )
    p_select.add_argument("--k-max", type=int, default=None, help="top of the k grid (default n)")
    p_select.add_argument("--folds", type=int, default=5, help="folds for vfcv (default 5)")
    p_select.add_argument("--rescale", action="store_true", help="min-max rescale covariates first")
    p_select.add_argument(
        "--literal-minus-one",
        action="store_true",
        help="subtract one from argmin-rule choices (compatibility reading)",
    )
    p_select.add_argument("--output", default=None, help="records file (default stdout)")
    p_select.add_argument("--format", choices=("csv", "json"), default="json")
    common(p_select)
    p_select.set_defaults(func=cmd_select)

    p_sim = sub.add_parser("simulate", help="artificial-data experiment sweep")
    p_sim.add_argument("--preset", choices=sorted(_PRESETS), default=None)
    p_sim.add_argument("--config", default=None, help="JSON file with config keys")
    p_sim.add_argument("--function", choices=("f1", "f2"), default=None)
    p_sim.add_argument("--sigma", type=float, default=None, help="noise standard deviation")
    p_sim.add_argument("--sizes", type=_int_list, default=None, help="sample sizes, comma-separated")
    p_sim.add_argument("--dim", type=int, default=None, help="covariate dimension (default 3)")
    p_sim.add_argument("--reps", type=int, default=None, help="replications per sample size")
    p_sim.add_argument("--rule", type=_rule_list, default=None, help="rules to run")
    p_sim.add_argument("--sigma-source", choices=("estimate", "true"), default=None)
    p_sim.add_argument("--k-start-policy", choices=("sqrt", "full"), default=None)
    p_sim.add_argument("--include-table-time", action="store_true")
    p_sim.add_argument("--literal-minus-one", action="store_true")
    p_sim.add_argument("--threads", type=int, default=1, help="worker threads, 0 = auto")
    p_sim.add_argument("--output-dir", default=None, help="default $KNNSELECT_OUTPUT_DIR or .")
    common(p_sim)
    p_sim.set_defaults(func=cmd_simulate)

    p_real = sub.add_parser("realdata", help="real-data sub-sample pipeline")
    p_real.add_argument("--input", required=True, help="CSV file with a header row")
    p_real.add_argument("--target", required=True, help="response column name")
    p_real.add_argument("--trials", type=int, default=25)
    p_real.add_argument("--divisors", type=_int_list, default=[5, 4, 3, 2, 1])
    p_real.add_argument(
        "--rule",
        type=_rule_list,
        default=[Rule.MDP.value, Rule.AIC.value, Rule.GCV.value, Rule.VFCV.value],
    )
    p_real.add_argument("--train-fraction", type=float, default=0.7)
    p_real.add_argument("--folds", type=int, default=5)
    p_real.add_argument("--include-table-time", action="store_true")
    p_real.add_argument("--literal-minus-one", action="store_true")
    p_real.add_argument("--threads", type=int, default=1, help="worker threads, 0 = auto")
    p_real.add_argument("--output-dir", default=None)
    common(p_real)
    p_real.set_defaults(func=cmd_realdata)

    p_bench = sub.add_parser("benchmark", help="scan-cost measurement vs evaluated ks")
    p_bench.add_argument("--n", type=_int_list, default=[2000], help="sample sizes")
    p_bench.add_argument(
        "--positions",
        type=_int_list,
        default=None,
        help="forced scan lengths (steps past the first evaluation)",
    )
    p_bench.add_argument("--repeats", type=int, default=3)
    p_bench.add_argument("--output-dir", default=None)
    common(p_bench)
    p_bench.set_defaults(func=cmd_benchmark)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"knnselect: config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"knnselect: data error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"knnselect: config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
