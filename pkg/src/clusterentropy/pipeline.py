"""End-to-end horizon analysis with an on-disk, content-keyed artifact cache.

Layout of one run::

    <root>/<config-hash>/
        config.yaml
        manifest.json
        distribution/<M>_<n>.csv
        entropy/<M>_<n>.csv
        mdi/<M>_<n>.csv
        horizon/report.csv, horizon/table.json

Each distribution file carries the key of the inputs that produced it;
a later run reuses the file only when the key matches.
"""

from __future__ import annotations

import hashlib
import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np
import yaml

from . import __version__
from .cluster import ClusterDistribution, cluster_durations, read_distribution, read_header, write_distribution
from .dma import VARIANTS, WindowGrid, default_window_grid, moving_average
from .entropy import (
    NORMALIZATIONS,
    DynamicIndex,
    EntropyCurve,
    HorizonReport,
    cluster_entropy,
    horizon_dependence,
    market_dynamic_index,
    read_curve,
    write_curve,
    write_report,
)
from .reference import one_period_references
from .series import HorizonSchedule, PriceSeries, sample_series
from .stats import PairedTestResult, entropy_comparison_test
from .synth import FbmConfig, mirror_market_schedule

log = logging.getLogger(__name__)

CONFIG_VERSION = 1
STAGES = ("distribution", "entropy", "mdi")


class PipelineError(RuntimeError):
    """A stage failed for one (M, n) cell."""

    def __init__(self, horizon: int, window: int, cause: Exception):
        super().__init__(f"M={horizon}, n={window}: {cause}")
        self.horizon = horizon
        self.window = window


@dataclass(frozen=True)
class AnalysisConfig:
    windows: tuple[int, ...] = default_window_grid(200).windows
    schedule: tuple[int, ...] | None = None
    schedule_unit: str = "segment"
    target_length: int | None = None
    variant: str = "backward"
    tau_max_factor: float = 3
    normalization: str = "raw"
    references: dict[str, float] = field(default_factory=one_period_references)
    hurst: float = 0.5
    seeds: tuple[int, ...] = (0,)
    version: int = CONFIG_VERSION

    def __post_init__(self):
        object.__setattr__(self, "windows", WindowGrid(tuple(self.windows)).windows)
        if self.schedule is not None:
            sched = HorizonSchedule(tuple(self.schedule), self.schedule_unit)
            object.__setattr__(self, "schedule", sched.boundaries)
        if self.target_length is not None and self.target_length < 2:
            raise ValueError("target_length must be at least 2")
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.normalization not in NORMALIZATIONS:
            raise ValueError(f"unknown normalization {self.normalization!r}")
        if self.tau_max_factor <= 0:
            raise ValueError("tau_max_factor must be positive")
        if not 0 < self.hurst < 1:
            raise ValueError("hurst must lie in (0, 1)")
        if self.version != CONFIG_VERSION:
            raise ValueError(f"unsupported config version {self.version}")
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        object.__setattr__(self, "references", {str(k): float(v) for k, v in dict(self.references).items()})

    def tau_max(self, n: int) -> int:
        return int(round(self.tau_max_factor * n))

    def horizon_schedule(self, length: int) -> HorizonSchedule:
        if self.schedule is None:
            return HorizonSchedule.single(length)
        sched = HorizonSchedule(self.schedule, self.schedule_unit)
        sched.validate(length)
        return sched

    def to_dict(self) -> dict:
        return {
            "version": self.version,
            "windows": list(self.windows),
            "horizons": None if self.schedule is None else {"boundaries": list(self.schedule), "unit": self.schedule_unit},
            "sampling": None if self.target_length is None else {"target_length": self.target_length},
            "dma": {"variant": self.variant},
            "mdi": {"tau_max_factor": self.tau_max_factor, "normalization": self.normalization},
            "references": dict(sorted(self.references.items())),
            "benchmark": {"hurst": self.hurst, "seeds": list(self.seeds)},
        }

    @classmethod
    def from_dict(cls, d: dict) -> AnalysisConfig:
        known = {"version", "windows", "horizons", "sampling", "dma", "mdi", "references", "benchmark"}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        horizons = d.get("horizons") or {}
        sampling = d.get("sampling") or {}
        dma = d.get("dma") or {}
        mdi = d.get("mdi") or {}
        bench = d.get("benchmark") or {}
        kwargs = {
            "version": d.get("version", CONFIG_VERSION),
            "schedule": tuple(horizons["boundaries"]) if horizons.get("boundaries") else None,
            "schedule_unit": horizons.get("unit", "segment"),
            "target_length": sampling.get("target_length"),
            "variant": dma.get("variant", "backward"),
            "tau_max_factor": mdi.get("tau_max_factor", 3),
            "normalization": mdi.get("normalization", "raw"),
            "hurst": bench.get("hurst", 0.5),
            "seeds": tuple(bench.get("seeds", (0,))),
        }
        if "windows" in d:
            kwargs["windows"] = tuple(d["windows"])
        if "references" in d and d["references"] is not None:
            kwargs["references"] = d["references"]
        return cls(**kwargs)

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=True, default_flow_style=None)

    @classmethod
    def from_yaml(cls, text: str) -> AnalysisConfig:
        return cls.from_dict(yaml.safe_load(text) or {})

    @classmethod
    def load(cls, path: str | Path) -> AnalysisConfig:
        return cls.from_yaml(Path(path).read_text())

    def save(self, path: str | Path) -> Path:
        path = Path(path)
        path.write_text(self.to_yaml())
        return path

    def digest(self) -> str:
        return _sha(json.dumps(self.to_dict(), sort_keys=True))


def _sha(*parts: str | bytes) -> str:
    h = hashlib.sha256()
    for part in parts:
        h.update(part.encode() if isinstance(part, str) else part)
        h.update(b"\0")
    return h.hexdigest()


def series_digest(series: PriceSeries) -> str:
    return _sha(np.ascontiguousarray(series.values, dtype="<f8").tobytes())


@dataclass
class RunManifest:
    config_hash: str
    series_hash: str
    series_length: int
    symbol: str
    version: str = __version__
    stages: dict[str, list[str]] = field(default_factory=dict)
    timings: dict[str, float] = field(default_factory=dict)
    missing: list[list[int]] = field(default_factory=list)
    cells: dict[str, str] = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> RunManifest:
        return cls(**json.loads(text))


@dataclass
class MarketAnalysis:
    config: AnalysisConfig
    report: HorizonReport
    run_dir: Path
    manifest: RunManifest
    distributions: dict[tuple[int, int], ClusterDistribution]
    curves: dict[tuple[int, int], EntropyCurve]
    indices: dict[tuple[int, int], DynamicIndex]
    reused: int = 0

    def curves_for(self, horizon: int) -> list[EntropyCurve]:
        return [c for (M, _), c in sorted(self.curves.items()) if M == horizon]

    @property
    def horizons(self) -> range:
        return self.report.horizons


def horizon_series(series: PriceSeries, config: AnalysisConfig) -> list[PriceSeries]:
    """Cumulative prefixes, each sampled to ``target_length`` when configured."""
    schedule = config.horizon_schedule(len(series))
    out = []
    for M, end in enumerate(schedule.boundaries, start=1):
        part = series.prefix(end)
        if config.target_length is not None:
            try:
                part = sample_series(part, config.target_length)
            except ValueError as exc:
                raise ValueError(f"horizon M={M}: {exc}") from None
        out.append(part)
    return out


def _cell_key(series_hash: str, config: AnalysisConfig, horizon: int, end: int, n: int) -> str:
    return _sha(
        "distribution",
        series_hash,
        str(horizon),
        str(end),
        str(config.target_length),
        str(n),
        config.variant,
    )[:32]


def _compute_distribution(values: np.ndarray, n: int, variant: str) -> ClusterDistribution | None:
    ma = moving_average(values, n, variant)
    durations = cluster_durations(values, ma)
    if len(durations) == 0:
        return None
    return ClusterDistribution.from_durations(durations, n)


def _cell_name(horizon: int, n: int) -> str:
    return f"{horizon}_{n}.csv"


def run_market_analysis(
    series: PriceSeries,
    config: AnalysisConfig,
    root: str | Path = "runs",
    jobs: int = 1,
    use_cache: bool = True,
) -> MarketAnalysis:
    """Distribution, entropy and MDI for every (M, n), then horizon dependence.

    Cells with fewer than two intersections are recorded as missing; they
    hold NaN in the grids and do not affect any other cell.
    """
    t0 = time.perf_counter()
    schedule = config.horizon_schedule(len(series))
    parts = horizon_series(series, config)
    shortest = min(len(p) for p in parts)
    if shortest < max(config.windows) + 2:
        raise ValueError(
            f"shortest horizon has {shortest} samples; needs at least max window + 2 = {max(config.windows) + 2}"
        )
    s_hash = series_digest(series)
    c_hash = _sha(config.digest(), s_hash)[:16]
    run_dir = Path(root) / c_hash
    for stage in STAGES + ("horizon",):
        (run_dir / stage).mkdir(parents=True, exist_ok=True)
    manifest = RunManifest(c_hash, s_hash, len(series), series.symbol)
    timings = {"prepare": time.perf_counter() - t0}

    cells = [(M, n) for M in schedule.horizons for n in config.windows]
    keys = {(M, n): _cell_key(s_hash, config, M, schedule.boundaries[M - 1], n) for M, n in cells}

    def task(cell):
        M, n = cell
        path = run_dir / "distribution" / _cell_name(M, n)
        key = keys[cell]
        if use_cache and path.exists():
            head = read_header(path)
            if head.get("key") == key:
                if head.get("degenerate"):
                    return cell, None, True
                return cell, read_distribution(path), True
        try:
            dist = _compute_distribution(parts[M - 1].values, n, config.variant)
        except Exception as exc:  # annotate and re-raise in the orchestrator
            raise PipelineError(M, n, exc) from exc
        if dist is None:
            path.write_text("# " + json.dumps({"M": M, "n": n, "key": key, "degenerate": True}, sort_keys=True) + "\n")
        else:
            write_distribution(path, dist, M=M, key=key, symbol=series.symbol, variant=config.variant)
        return cell, dist, False

    t1 = time.perf_counter()
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(task, cells))
    else:
        results = [task(c) for c in cells]
    timings["distribution"] = time.perf_counter() - t1

    distributions: dict[tuple[int, int], ClusterDistribution] = {}
    reused = 0
    for cell, dist, cached in results:
        reused += cached
        manifest.cells[f"{cell[0]}_{cell[1]}"] = keys[cell]
        if dist is None:
            manifest.missing.append(list(cell))
            log.warning("degenerate cell M=%d n=%d: fewer than two intersections", *cell)
        else:
            distributions[cell] = dist

    t2 = time.perf_counter()
    curves: dict[tuple[int, int], EntropyCurve] = {}
    indices: dict[tuple[int, int], DynamicIndex] = {}
    grid = np.full((len(schedule), len(config.windows)), np.nan)
    col = {n: j for j, n in enumerate(config.windows)}
    for (M, n), dist in sorted(distributions.items()):
        curve = cluster_entropy(dist)
        meta = {"symbol": series.symbol, "M": M, "variant": config.variant}
        curve = EntropyCurve(curve.window, curve.taus, curve.values, meta)
        curves[(M, n)] = curve
        write_curve(run_dir / "entropy" / _cell_name(M, n), curve, normalization=config.normalization)
        try:
            idx = market_dynamic_index(curve, config.tau_max(n), config.normalization)
        except ValueError as exc:
            raise PipelineError(M, n, exc) from exc
        indices[(M, n)] = idx
        grid[M - 1, col[n]] = idx.value
        head = {"M": M, "n": n, "tau_max": idx.tau_max, "normalization": idx.normalization, "points": idx.n_points}
        (run_dir / "mdi" / _cell_name(M, n)).write_text("# " + json.dumps(head, sort_keys=True) + f"\nI\n{idx.value!r}\n")
    timings["entropy_mdi"] = time.perf_counter() - t2

    report = horizon_dependence(grid, config.windows, config.references)
    report = replace(report, meta={"symbol": series.symbol, "variant": config.variant, "normalization": config.normalization, "tau_max_factor": config.tau_max_factor})
    write_report(report, run_dir / "horizon" / "report.csv", run_dir / "horizon" / "table.json")
    config.save(run_dir / "config.yaml")

    manifest.stages = {
        stage: sorted(p.relative_to(run_dir).as_posix() for p in (run_dir / stage).glob("*.csv"))
        for stage in STAGES
    }
    manifest.stages["horizon"] = ["horizon/report.csv", "horizon/table.json"]
    timings["total"] = time.perf_counter() - t0
    manifest.timings = {k: round(v, 6) for k, v in timings.items()}
    (run_dir / "manifest.json").write_text(manifest.to_json())
    return MarketAnalysis(config, report, run_dir, manifest, distributions, curves, indices, reused)


def load_run(run_dir: str | Path) -> MarketAnalysis:
    """Rebuild a :class:`MarketAnalysis` from a completed run directory.

    Raises ``FileNotFoundError`` listing every expected cell whose
    entropy or MDI artifact is absent.
    """
    run_dir = Path(run_dir)
    if not (run_dir / "manifest.json").exists() or not (run_dir / "config.yaml").exists():
        raise FileNotFoundError(f"{run_dir} is not a run directory (manifest.json/config.yaml missing)")
    config = AnalysisConfig.load(run_dir / "config.yaml")
    manifest = RunManifest.from_json((run_dir / "manifest.json").read_text())
    schedule = config.horizon_schedule(manifest.series_length)
    degenerate = {tuple(c) for c in manifest.missing}
    absent = []
    distributions, curves, indices = {}, {}, {}
    grid = np.full((len(schedule), len(config.windows)), np.nan)
    for M in schedule.horizons:
        for j, n in enumerate(config.windows):
            if (M, n) in degenerate:
                continue
            files = {s: run_dir / s / _cell_name(M, n) for s in STAGES}
            if not all(p.exists() for p in files.values()):
                absent.append((M, n))
                continue
            distributions[(M, n)] = read_distribution(files["distribution"])
            curves[(M, n)] = read_curve(files["entropy"])
            head = read_header(files["mdi"])
            value = float(files["mdi"].read_text().splitlines()[-1])
            indices[(M, n)] = DynamicIndex(value, n, head["tau_max"], head["normalization"], head["points"])
            grid[M - 1, j] = value
    if absent:
        listing = ", ".join(f"M={M} n={n}" for M, n in absent)
        raise FileNotFoundError(f"incomplete run {run_dir}: missing cells {listing}")
    report = horizon_dependence(grid, config.windows, config.references)
    report = replace(report, meta={"symbol": manifest.symbol, "variant": config.variant, "normalization": config.normalization, "tau_max_factor": config.tau_max_factor})
    return MarketAnalysis(config, report, run_dir, manifest, distributions, curves, indices)


@dataclass
class BenchmarkReport:
    hurst: float
    seeds: tuple[int, ...]
    symbol: str
    rows: list[tuple[int, PairedTestResult | None]]
    benchmark_runs: list[Path] = field(default_factory=list)

    def records(self) -> list[dict]:
        out = []
        for M, res in self.rows:
            if res is None:
                out.append({"M": M, "t": None, "dof": None, "p": None, "h": None, "pairs": 0})
            else:
                out.append(res.as_row(M=M))
        return out

    def to_json(self) -> str:
        doc = {
            "market": self.symbol,
            "benchmark": {"model": "fbm", "hurst": self.hurst, "seeds": list(self.seeds)},
            "pairing": "S(tau, n) at (n, tau) points present in both curve sets; benchmark seeds averaged",
            "rows": self.records(),
        }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"

    def to_csv(self) -> str:
        lines = ["M,t,dof,p,h,pairs"]
        for r in self.records():
            lines.append(",".join("" if r[k] is None else (repr(r[k]) if isinstance(r[k], float) else str(r[k])) for k in ("M", "t", "dof", "p", "h", "pairs")))
        return "\n".join(lines) + "\n"


def run_benchmark_suite(
    market: MarketAnalysis | str | Path,
    seeds: Sequence[int] | None = None,
    hurst: float | None = None,
    root: str | Path = "runs",
    jobs: int = 1,
) -> BenchmarkReport:
    """Compare the market curves with fBm paths cut on the market's schedule.

    One mirrored path per seed goes through the same configuration; its
    curves are paired with the market's at every horizon.
    """
    if not isinstance(market, MarketAnalysis):
        market = load_run(market)
    config = market.config
    seeds = tuple(config.seeds if seeds is None else seeds)
    hurst = config.hurst if hurst is None else hurst
    lengths = config.horizon_schedule(market.manifest.series_length).boundaries
    bench_cfg = replace(config, schedule=tuple(lengths), hurst=hurst, seeds=seeds)
    bench_curves: dict[int, list[EntropyCurve]] = {M: [] for M in market.horizons}
    runs = []
    for seed in seeds:
        path, _ = mirror_market_schedule(FbmConfig(hurst, lengths[-1], seed), lengths)
        try:
            result = run_market_analysis(path, bench_cfg, root, jobs)
        except (ValueError, PipelineError) as exc:
            log.warning("benchmark seed %d skipped: %s", seed, exc)
            continue
        runs.append(result.run_dir)
        for M in market.horizons:
            bench_curves[M].extend(result.curves_for(M))
    rows = []
    for M in market.horizons:
        try:
            res = entropy_comparison_test(market.curves_for(M), bench_curves[M])
        except ValueError as exc:
            log.warning("horizon M=%d has no comparable points: %s", M, exc)
            res = None
        rows.append((M, res))
    return BenchmarkReport(hurst, seeds, market.manifest.symbol, rows, runs)
