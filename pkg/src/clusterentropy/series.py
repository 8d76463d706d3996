"""Tick ingestion, uniform sampling, returns and cumulative horizon segmentation."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np


class TickFormatError(ValueError):
    """A tick file row could not be accepted."""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


def _frozen(values, dtype) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class TickSeries:
    """Raw timestamped tick prices, as read from disk."""

    timestamps: np.ndarray
    prices: np.ndarray
    symbol: str = ""

    def __post_init__(self):
        ts = _frozen(self.timestamps, np.int64)
        px = _frozen(self.prices, np.float64)
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "prices", px)
        if ts.shape != px.shape or ts.ndim != 1:
            raise ValueError("timestamps and prices must be 1-d and of equal length")
        if len(px) < 2:
            raise ValueError(f"a tick series needs at least 2 ticks, got {len(px)}")
        if np.any(np.diff(ts) < 0):
            raise ValueError("timestamps must be non-decreasing")
        if not np.all(px > 0):
            raise ValueError("tick prices must be strictly positive")

    def __len__(self) -> int:
        return len(self.prices)


@dataclass(frozen=True)
class Origin:
    """Where a price series came from: raw ticks, a sampled series, or a generator."""

    kind: str = "raw"
    step: int | None = None
    seed: int | None = None
    hurst: float | None = None

    def __post_init__(self):
        if self.kind not in ("raw", "sampled", "synthetic"):
            raise ValueError(f"unknown origin kind {self.kind!r}")
        if self.kind == "sampled" and (self.step is None or self.step < 1):
            raise ValueError("sampled origin requires a positive step")
        if self.kind == "synthetic" and (self.seed is None or self.hurst is None):
            raise ValueError("synthetic origin requires seed and hurst")

    @classmethod
    def sampled(cls, step: int) -> Origin:
        return cls("sampled", step=int(step))

    @classmethod
    def synthetic(cls, seed: int, hurst: float) -> Origin:
        return cls("synthetic", seed=int(seed), hurst=float(hurst))

    def to_dict(self) -> dict:
        out: dict = {"kind": self.kind}
        if self.step is not None:
            out["step"] = self.step
        if self.seed is not None:
            out["seed"] = self.seed
        if self.hurst is not None:
            out["hurst"] = self.hurst
        return out

    @classmethod
    def from_dict(cls, d: dict) -> Origin:
        return cls(d.get("kind", "raw"), d.get("step"), d.get("seed"), d.get("hurst"))


@dataclass(frozen=True)
class PriceSeries:
    """Uniform price sequence consumed by every analysis stage.

    Synthetic series are exempt from the positivity check: only the
    crossings with the moving average matter, not the price level.
    """

    values: np.ndarray
    origin: Origin = field(default_factory=Origin)
    symbol: str = ""

    def __post_init__(self):
        vals = _frozen(self.values, np.float64)
        object.__setattr__(self, "values", vals)
        if vals.ndim != 1:
            raise ValueError("price series must be 1-d")
        if len(vals) < 2:
            raise ValueError(f"a price series needs at least 2 values, got {len(vals)}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("price series contains non-finite values")
        if self.origin.kind != "synthetic" and not np.all(vals > 0):
            raise ValueError("market price series must be strictly positive")

    def __len__(self) -> int:
        return len(self.values)

    @classmethod
    def from_ticks(cls, ticks: TickSeries) -> PriceSeries:
        return cls(ticks.prices, Origin(), ticks.symbol)

    def prefix(self, length: int) -> PriceSeries:
        return PriceSeries(self.values[:length], self.origin, self.symbol)


@dataclass(frozen=True)
class HorizonSchedule:
    """End indices of the cumulative horizons M = 1..M_max.

    Horizon M covers ``[0, boundaries[M-1])``, so each horizon is a prefix
    of the next one.
    """

    boundaries: tuple[int, ...]
    unit: str = "segment"

    def __post_init__(self):
        b = tuple(int(v) for v in self.boundaries)
        object.__setattr__(self, "boundaries", b)
        if not b:
            raise ValueError("schedule needs at least one boundary")
        if self.unit not in ("month", "segment"):
            raise ValueError(f"unknown schedule unit {self.unit!r}")
        if b[0] < 2:
            raise ValueError("first horizon must hold at least 2 samples")
        if any(later <= earlier for earlier, later in zip(b, b[1:])):
            raise ValueError("schedule boundaries must be strictly increasing")

    def __len__(self) -> int:
        return len(self.boundaries)

    @property
    def horizons(self) -> range:
        return range(1, len(self.boundaries) + 1)

    def validate(self, length: int) -> None:
        if self.boundaries[-1] > length:
            raise ValueError(
                f"schedule boundary {self.boundaries[-1]} exceeds series length {length}"
            )

    @classmethod
    def single(cls, length: int) -> HorizonSchedule:
        return cls((length,), "segment")


def _parse_timestamp(text: str) -> int:
    try:
        return int(text)
    except ValueError:
        value = float(text)
        if not value.is_integer():
            raise ValueError(f"timestamp {text!r} is not whole seconds") from None
        return int(value)


def load_ticks(
    path: str | Path,
    delimiter: str = ",",
    header: bool | None = None,
    symbol: str | None = None,
) -> TickSeries:
    """Read a ``timestamp,price`` CSV.

    ``header=None`` sniffs the first row: it is treated as a header when
    its fields do not parse as numbers. Line numbers in errors are 1-based
    physical lines of the file.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"tick file not found: {path}")
    timestamps: list[int] = []
    prices: list[float] = []
    last_ts = None
    with path.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        for lineno, row in enumerate(reader, start=1):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) < 2:
                raise TickFormatError(lineno, f"expected 2 columns, got {len(row)}")
            ts_text, px_text = row[0].strip(), row[1].strip()
            if lineno == 1 and header is not False:
                try:
                    float(ts_text), float(px_text)
                except ValueError:
                    continue
                if header:
                    continue
            try:
                ts = _parse_timestamp(ts_text)
                px = float(px_text)
            except ValueError as exc:
                raise TickFormatError(lineno, str(exc)) from None
            if not math.isfinite(px) or px <= 0:
                raise TickFormatError(lineno, f"price must be positive, got {px_text}")
            if last_ts is not None and ts < last_ts:
                raise TickFormatError(lineno, f"timestamp {ts} precedes {last_ts}")
            last_ts = ts
            timestamps.append(ts)
            prices.append(px)
    if not prices:
        raise TickFormatError(0, f"no tick rows in {path}")
    if len(prices) < 2:
        raise TickFormatError(len(prices), "a tick series needs at least 2 rows")
    return TickSeries(np.array(timestamps), np.array(prices), symbol or path.stem)


def monthly_schedule(ticks: TickSeries) -> HorizonSchedule:
    """Cumulative horizons ending at each UTC calendar-month change."""
    months = [
        (d.year, d.month)
        for d in (datetime.fromtimestamp(int(t), tz=timezone.utc) for t in ticks.timestamps)
    ]
    ends = [i for i in range(1, len(months)) if months[i] != months[i - 1]]
    ends.append(len(months))
    return HorizonSchedule(tuple(ends), "month")


def sampling_step(length: int, target_length: int) -> int:
    """Stride that brings ``length`` closest to ``target_length`` (half rounds up)."""
    return max(1, math.floor(length / target_length + 0.5))


def sample_series(raw: TickSeries | PriceSeries, target_length: int) -> PriceSeries:
    """Keep every k-th price from index 0, k = round(N / target_length).

    The result is truncated to ``target_length`` when the stride leaves
    more points than requested.
    """
    if isinstance(raw, TickSeries):
        raw = PriceSeries.from_ticks(raw)
    n = len(raw)
    if target_length < 2:
        raise ValueError(f"target_length must be at least 2, got {target_length}")
    if target_length > n:
        raise ValueError(f"target_length {target_length} exceeds series length {n}")
    step = sampling_step(n, target_length)
    values = raw.values[::step][:target_length]
    origin = raw.origin if raw.origin.kind == "synthetic" else Origin.sampled(step)
    return PriceSeries(values, origin, raw.symbol)


def segment_horizons(series: PriceSeries, schedule: HorizonSchedule) -> list[PriceSeries]:
    schedule.validate(len(series))
    return [series.prefix(end) for end in schedule.boundaries]


def _check_lag(series: PriceSeries, h: int) -> None:
    if h <= 0:
        raise ValueError("lag h must be positive")
    if h >= len(series):
        raise ValueError(f"lag {h} must be smaller than series length {len(series)}")


def linear_return(series: PriceSeries, h: int = 1) -> np.ndarray:
    _check_lag(series, h)
    p = series.values
    return p[h:] - p[:-h]


def log_return(series: PriceSeries, h: int = 1) -> np.ndarray:
    _check_lag(series, h)
    if not np.all(series.values > 0):
        raise ValueError("log returns need strictly positive prices")
    lp = np.log(series.values)
    return lp[h:] - lp[:-h]


def _sidecar(path: Path) -> Path:
    return path.with_suffix(".json")


def save_series(
    path: str | Path, series: PriceSeries, schedule: HorizonSchedule | None = None
) -> Path:
    """Write one value per line plus a ``<stem>.json`` sidecar.

    ``%.17g`` round-trips every double exactly.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savetxt(path, series.values, fmt="%.17g")
    meta: dict = {
        "symbol": series.symbol,
        "origin": series.origin.to_dict(),
        "length": len(series),
    }
    if schedule is not None:
        meta["schedule"] = {"boundaries": list(schedule.boundaries), "unit": schedule.unit}
    _sidecar(path).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return path


def load_series(path: str | Path) -> tuple[PriceSeries, HorizonSchedule | None]:
    """Read a series written by :func:`save_series`.

    A missing sidecar means a raw market series named after the file.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"series file not found: {path}")
    values = np.loadtxt(path, dtype=np.float64, ndmin=1, comments="#", delimiter=",")
    if values.ndim > 1:
        values = values[:, -1]
    side = _sidecar(path)
    schedule = None
    if side.exists():
        meta = json.loads(side.read_text())
        if meta.get("length") not in (None, len(values)):
            raise ValueError(f"{path}: sidecar length {meta['length']} != {len(values)} values")
        origin = Origin.from_dict(meta.get("origin", {}))
        symbol = meta.get("symbol", path.stem)
        if "schedule" in meta:
            s = meta["schedule"]
            schedule = HorizonSchedule(tuple(s["boundaries"]), s.get("unit", "segment"))
    else:
        origin, symbol = Origin(), path.stem
    return PriceSeries(values, origin, symbol), schedule


def parse_schedule(text: str, length: int | None = None) -> HorizonSchedule:
    """Parse ``"4,8,12"``, a JSON file path, or ``"table2:NASDAQ[/10]"``."""
    from .reference import market_lengths

    text = text.strip()
    if text.startswith("table2:"):
        rest = text.split(":", 1)[1]
        market, _, scale = rest.partition("/")
        lengths = market_lengths(market)
        if scale:
            lengths = [round(v / int(scale)) for v in lengths]
        return HorizonSchedule(tuple(lengths), "month")
    p = Path(text)
    if p.suffix == ".json" and p.exists():
        data = json.loads(p.read_text())
        if isinstance(data, dict):
            return HorizonSchedule(tuple(data["boundaries"]), data.get("unit", "segment"))
        return HorizonSchedule(tuple(data))
    bounds = tuple(int(v) for v in text.split(",") if v.strip())
    schedule = HorizonSchedule(bounds)
    if length is not None:
        schedule.validate(length)
    return schedule


__all__ = [
    "TickFormatError",
    "TickSeries",
    "Origin",
    "PriceSeries",
    "HorizonSchedule",
    "load_ticks",
    "monthly_schedule",
    "sampling_step",
    "sample_series",
    "segment_horizons",
    "linear_return",
    "log_return",
    "save_series",
    "load_series",
    "parse_schedule",
]
