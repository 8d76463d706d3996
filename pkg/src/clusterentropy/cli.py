"""``clusterentropy`` command line.

Exit codes: 0 success, 1 a stage failed, 2 bad usage.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from .cluster import ClusterDistribution, cluster_durations, write_distribution
from .dma import moving_average, parse_window_grid
from .entropy import cluster_entropy, horizon_dependence, write_curve, write_report
from .pipeline import AnalysisConfig, PipelineError, horizon_series, load_run, run_benchmark_suite, run_market_analysis
from .series import (
    HorizonSchedule,
    PriceSeries,
    TickFormatError,
    load_series,
    load_ticks,
    monthly_schedule,
    parse_schedule,
    sample_series,
    save_series,
)
from .synth import FbmConfig, generate_fbm, mirror_market_schedule

RUNS_ENV = "CLUSTERENTROPY_RUNS"
log = logging.getLogger("clusterentropy")


def _positive(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value}")
    return value


def _window_grid(text: str):
    try:
        return parse_window_grid(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _hurst(text: str) -> float:
    value = float(text)
    if not 0 < value < 1:
        raise argparse.ArgumentTypeError("Hurst exponent must lie in (0, 1)")
    return value


def _runs_root() -> Path:
    return Path(os.environ.get(RUNS_ENV, "runs"))


def _add_analysis_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="YAML analysis config; flags below override its fields")
    p.add_argument("--window-grid", type=_window_grid, help="'default:<max>' or a comma list such as 30,50,100")
    p.add_argument("--variant", choices=("backward", "centered", "forward"), help="moving-average alignment")
    p.add_argument("--schedule", help="horizon ends: '4,8,12', a JSON file or 'table2:<MARKET>[/scale]'")
    p.add_argument("--target-length", type=_positive, help="sample every horizon to this length")
    p.add_argument("--tau-max-factor", type=float, help="MDI sums durations up to this multiple of n (default 3)")
    p.add_argument("--normalization", choices=("raw", "count"), help="MDI normalization")


def _config_from_args(args, series: PriceSeries | None = None, sidecar: HorizonSchedule | None = None) -> AnalysisConfig:
    config = AnalysisConfig.load(args.config) if args.config else AnalysisConfig()
    changes = {}
    if args.window_grid is not None:
        changes["windows"] = args.window_grid.windows
    if args.variant is not None:
        changes["variant"] = args.variant
    if args.target_length is not None:
        changes["target_length"] = args.target_length
    if args.tau_max_factor is not None:
        changes["tau_max_factor"] = args.tau_max_factor
    if args.normalization is not None:
        changes["normalization"] = args.normalization
    if args.schedule is not None:
        sched = parse_schedule(args.schedule, None if series is None else len(series))
        changes["schedule"], changes["schedule_unit"] = sched.boundaries, sched.unit
    elif config.schedule is None and sidecar is not None:
        changes["schedule"], changes["schedule_unit"] = sidecar.boundaries, sidecar.unit
    return replace(config, **changes) if changes else config


def _emit(records: list[dict], fmt: str, out: Path | None) -> None:
    if fmt == "json":
        text = json.dumps(records, indent=2, sort_keys=True) + "\n"
    else:
        buf = io.StringIO()
        fields = list(records[0]) if records else []
        writer = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
        writer.writeheader()
        for r in records:
            writer.writerow({k: "" if r[k] is None else (repr(r[k]) if isinstance(r[k], float) else r[k]) for k in fields})
        text = buf.getvalue()
    if out is None:
        sys.stdout.write(text)
    else:
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text)


def cmd_ingest(args) -> int:
    ticks = load_ticks(args.input, delimiter=args.delimiter, symbol=args.symbol)
    series = PriceSeries.from_ticks(ticks)
    schedule = monthly_schedule(ticks) if args.monthly else None
    save_series(args.out, series, schedule)
    print(f"{args.out}: {len(series)} prices" + (f", {len(schedule)} monthly horizons" if schedule else ""))
    return 0


def cmd_sample(args) -> int:
    series, _ = load_series(args.input)
    sampled = sample_series(series, args.target_length)
    save_series(args.out, sampled)
    print(f"{args.out}: {len(sampled)} prices (step {sampled.origin.step or 1})")
    return 0


def cmd_generate(args) -> int:
    if args.schedule:
        sched = parse_schedule(args.schedule)
        series, schedule = mirror_market_schedule(FbmConfig(args.hurst, sched.boundaries[-1], args.seed), sched.boundaries)
    else:
        if args.length is None:
            raise ValueError("generate-fbm needs --length or --schedule")
        series, schedule = generate_fbm(FbmConfig(args.hurst, args.length, args.seed)), None
    save_series(args.out, series, schedule)
    print(f"{args.out}: {series.symbol}, {len(series)} points")
    return 0


def cmd_entropy(args) -> int:
    series, sidecar = load_series(args.input)
    config = _config_from_args(args, series, sidecar)
    schedule = config.horizon_schedule(len(series))
    if args.horizon > len(schedule):
        raise ValueError(f"--horizon {args.horizon} exceeds the {len(schedule)} horizons of the schedule")
    part = horizon_series(series, config)[args.horizon - 1]
    args.out.mkdir(parents=True, exist_ok=True)
    written = []
    for n in config.windows:
        if n + 2 > len(part):
            raise ValueError(f"window n={n} needs at least {n + 2} samples, horizon has {len(part)}")
        durations = cluster_durations(part.values, moving_average(part.values, n, config.variant))
        if len(durations) == 0:
            log.warning("M=%d n=%d: fewer than two intersections, no curve written", args.horizon, n)
            continue
        dist = ClusterDistribution.from_durations(durations, n, symbol=series.symbol, M=args.horizon, variant=config.variant)
        if args.distributions:
            write_distribution(args.out / f"distribution_n{n}.csv", dist)
        written.append(write_curve(args.out / f"entropy_n{n}.csv", cluster_entropy(dist)))
    for path in written:
        print(path)
    return 0


def cmd_mdi(args) -> int:
    series, sidecar = load_series(args.input)
    config = _config_from_args(args, series, sidecar)
    result = run_market_analysis(series, config, args.runs_root or _runs_root(), args.jobs, use_cache=not args.no_cache)
    records = [{"M": M, "n": n, "I": idx.value, "points": idx.n_points} for (M, n), idx in sorted(result.indices.items())]
    _emit(records, args.format, args.out)
    print(result.run_dir, file=sys.stderr)
    return 0


def cmd_horizon(args) -> int:
    run = load_run(args.run_dir)
    refs = None
    if args.references is not None:
        refs = json.loads(Path(args.references).read_text())
        if not isinstance(refs, dict):
            raise ValueError("references file must map model name to one-period value")
    report = horizon_dependence(run.report.I, run.report.windows, refs)
    report = replace(report, meta=run.report.meta)
    if args.out is not None:
        write_report(report, args.out / "report.csv", args.out / "table.json")
    if args.format == "json":
        sys.stdout.write(json.dumps(report.table(), indent=2, sort_keys=True) + "\n")
    else:
        _emit(report.rows(), "csv", None)
    return 0


def cmd_benchmark(args) -> int:
    seeds = list(range(args.seed_base, args.seed_base + args.seeds))
    bench = run_benchmark_suite(args.run_dir, seeds, args.hurst, args.runs_root or _runs_root(), args.jobs)
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / "table5.json").write_text(bench.to_json())
        (args.out / "table5.csv").write_text(bench.to_csv())
    sys.stdout.write(bench.to_json() if args.format == "json" else bench.to_csv())
    return 0


def cmd_export(args) -> int:
    run = load_run(args.run_dir)
    records: list[dict] = []
    if args.what == "entropy":
        for (M, n), curve in sorted(run.curves.items()):
            records += [{"M": M, "n": n, "tau": t, "S": s} for t, s in zip(curve.taus.tolist(), curve.values.tolist())]
    elif args.what == "distribution":
        for (M, n), dist in sorted(run.distributions.items()):
            records += [
                {"M": M, "n": n, "tau": t, "count": c, "P": p}
                for t, c, p in zip(dist.taus.tolist(), dist.counts.tolist(), dist.probabilities.tolist())
            ]
    elif args.what == "mdi":
        records = [{"M": M, "n": n, "I": idx.value, "points": idx.n_points} for (M, n), idx in sorted(run.indices.items())]
    else:
        records = [{k: r[k] for k in ("M", "n", "I", "H", "h_rel")} for r in horizon_dependence(run.report.I, run.report.windows).rows()]
    _emit(records, args.format, args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="clusterentropy", description="Cluster entropy, Market Dynamic Index and horizon dependence of price series.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="read a timestamp,price tick CSV into a price series")
    p.add_argument("input", type=Path)
    p.add_argument("--out", type=Path, required=True, help="series file; a JSON sidecar is written next to it")
    p.add_argument("--delimiter", default=",")
    p.add_argument("--symbol", help="series name (default: file stem)")
    p.add_argument("--monthly", action="store_true", help="record cumulative monthly horizons in the sidecar")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("sample", help="keep every k-th price, k = round(N / target)")
    p.add_argument("input", type=Path)
    p.add_argument("--target-length", type=_positive, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("generate-fbm", help="write a seeded fractional Brownian motion path")
    p.add_argument("--hurst", type=_hurst, default=0.5)
    p.add_argument("--length", type=_positive)
    p.add_argument("--schedule", help="mirror these horizon ends; the path length is the last one")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("entropy", help="one S(tau, n) curve file per window for one horizon")
    p.add_argument("input", type=Path)
    _add_analysis_flags(p)
    p.add_argument("--horizon", type=_positive, default=1, help="horizon M (1-based)")
    p.add_argument("--distributions", action="store_true", help="also write the duration histograms")
    p.add_argument("--out", type=Path, required=True, help="output directory")
    p.set_defaults(func=cmd_entropy)

    p = sub.add_parser("mdi", help="run the full (M, n) analysis and print the I grid")
    p.add_argument("input", type=Path)
    _add_analysis_flags(p)
    p.add_argument("--runs-root", type=Path, help=f"artifact root (default ${RUNS_ENV} or ./runs)")
    p.add_argument("--jobs", type=_positive, default=1, help="parallel (M, n) tasks")
    p.add_argument("--no-cache", action="store_true", help="recompute every cell")
    p.add_argument("--format", choices=("json", "csv"), default="csv")
    p.add_argument("--out", type=Path, help="write the grid here instead of stdout")
    p.set_defaults(func=cmd_mdi)

    p = sub.add_parser("horizon", help="H(M, n) and rescaled reference values from a completed run")
    p.add_argument("run_dir", type=Path)
    p.add_argument("--references", type=Path, help="JSON {model: one-period value}; omit for no rescaling")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--out", type=Path, help="directory for report.csv and table.json")
    p.set_defaults(func=cmd_horizon)

    p = sub.add_parser("benchmark", help="paired t-test of the run against mirrored fBm paths")
    p.add_argument("run_dir", type=Path)
    p.add_argument("--hurst", type=_hurst, default=0.5)
    p.add_argument("--seeds", type=_positive, default=1, help="number of fBm paths")
    p.add_argument("--seed-base", type=int, default=0, help="first seed; paths use seed-base .. seed-base+seeds-1")
    p.add_argument("--runs-root", type=Path, help=f"artifact root (default ${RUNS_ENV} or ./runs)")
    p.add_argument("--jobs", type=_positive, default=1)
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--out", type=Path, help="directory for table5.json and table5.csv")
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("export", help="tidy plot-ready data from a completed run")
    p.add_argument("run_dir", type=Path)
    p.add_argument("--what", choices=("entropy", "distribution", "mdi", "horizon"), default="entropy")
    p.add_argument("--format", choices=("json", "csv"), default="csv")
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_export)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (OSError, ValueError, PipelineError, TickFormatError) as exc:
        print(f"clusterentropy {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
