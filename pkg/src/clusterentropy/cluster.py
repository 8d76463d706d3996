"""Clusters between consecutive price / moving-average intersections.

A cluster is the run of samples between two consecutive sign changes of
``d_t = p_t - MA_t``. Exact ties (``d_t == 0``) inherit the sign of the
most recent nonzero ``d``; a leading run of zeros is dropped. The partial
runs before the first and after the last intersection are discarded.
"""

from __future__ import annotations

import json
import math
from collections.abc import Iterable
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dma import MovingAverageSeries
from .series import PriceSeries

DEFAULT_BIN_RATIO = 1.2


class InsufficientRangeError(ValueError):
    """Too few distinct durations inside the power-law fit range."""


@dataclass(frozen=True)
class Cluster:
    start: int
    end: int
    side: str

    def __post_init__(self):
        if self.end <= self.start:
            raise ValueError("cluster end must follow its start")
        if self.side not in ("above", "below"):
            raise ValueError(f"side must be 'above' or 'below', got {self.side!r}")

    @property
    def duration(self) -> int:
        return self.end - self.start


def deviation(series: PriceSeries | np.ndarray, ma: MovingAverageSeries) -> np.ndarray:
    """``p_t - MA_t`` over the range where the moving average is defined."""
    x = series.values if isinstance(series, PriceSeries) else np.asarray(series, dtype=np.float64)
    if len(x) != ma.parent_length:
        raise ValueError(
            f"moving average was built on {ma.parent_length} samples, series has {len(x)}"
        )
    return x[ma.offset : ma.offset + len(ma)] - ma.values


def sign_changes(d: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Intersection positions and the tie-resolved sign sequence.

    Returns ``(cuts, signs)`` where ``cuts[k] = i`` means an intersection
    between ``d[i]`` and ``d[i + 1]``. ``signs`` has the length of ``d``
    with 0 only inside the leading run of zeros.
    """
    s = np.sign(d).astype(np.int8)
    nonzero = s != 0
    if not nonzero.any():
        return np.empty(0, dtype=np.int64), s
    last = np.where(nonzero, np.arange(len(s)), 0)
    np.maximum.accumulate(last, out=last)
    filled = s[last]
    first = int(np.argmax(nonzero))
    filled[:first] = 0
    tail = filled[first:]
    cuts = np.flatnonzero(tail[1:] != tail[:-1]) + first
    return cuts.astype(np.int64), filled


def cluster_durations(series: PriceSeries | np.ndarray, ma: MovingAverageSeries) -> np.ndarray:
    """Durations of the interior clusters, in order."""
    cuts, _ = sign_changes(deviation(series, ma))
    return np.diff(cuts)


def extract_clusters(series: PriceSeries | np.ndarray, ma: MovingAverageSeries) -> list[Cluster]:
    """Interior clusters with start/end expressed as parent-series indices.

    Fewer than two intersections yield an empty (degenerate) list.
    """
    cuts, signs = sign_changes(deviation(series, ma))
    if len(cuts) < 2:
        return []
    sides = np.where(signs[cuts[:-1] + 1] > 0, "above", "below")
    base = ma.offset
    return [
        Cluster(int(a) + base, int(b) + base, str(side))
        for a, b, side in zip(cuts[:-1], cuts[1:], sides)
    ]


@dataclass(frozen=True)
class ClusterDistribution:
    """Histogram of cluster durations for one window ``n``."""

    window: int
    taus: np.ndarray
    counts: np.ndarray
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        taus = np.array(self.taus, dtype=np.int64)
        counts = np.array(self.counts, dtype=np.int64)
        if taus.shape != counts.shape or taus.ndim != 1:
            raise ValueError("taus and counts must be 1-d and aligned")
        if len(taus) == 0:
            raise ValueError("a cluster distribution needs at least one cluster")
        if np.any(counts < 1):
            raise ValueError("every duration must be observed at least once")
        if np.any(taus < 1) or np.any(np.diff(taus) <= 0):
            raise ValueError("durations must be positive and strictly increasing")
        taus.setflags(write=False)
        counts.setflags(write=False)
        object.__setattr__(self, "taus", taus)
        object.__setattr__(self, "counts", counts)

    @classmethod
    def from_durations(cls, durations: Iterable[int], window: int, **meta) -> ClusterDistribution:
        arr = np.fromiter(durations, dtype=np.int64) if not isinstance(durations, np.ndarray) else durations
        taus, counts = np.unique(arr.astype(np.int64), return_counts=True)
        return cls(window, taus, counts, dict(meta))

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def probabilities(self) -> np.ndarray:
        return self.counts / self.total

    def as_dict(self) -> dict[int, float]:
        return dict(zip(self.taus.tolist(), self.probabilities.tolist()))

    def __eq__(self, other):
        if not isinstance(other, ClusterDistribution):
            return NotImplemented
        return (
            self.window == other.window
            and np.array_equal(self.taus, other.taus)
            and np.array_equal(self.counts, other.counts)
        )

    __hash__ = None


def cluster_distribution(clusters: Iterable[Cluster] | np.ndarray, n: int) -> ClusterDistribution:
    """Normalised duration histogram. Accepts clusters or a bare duration array."""
    if isinstance(clusters, np.ndarray):
        durations = clusters
    else:
        durations = np.fromiter((c.duration for c in clusters), dtype=np.int64)
    if len(durations) == 0:
        raise ValueError(f"no clusters for window n={n}")
    return ClusterDistribution.from_durations(durations, n)


def write_distribution(path: str | Path, dist: ClusterDistribution, **header) -> Path:
    """CSV ``tau,count,probability`` below a ``# {json}`` header line."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    head = {"n": dist.window, "total": dist.total, **dist.meta, **header}
    lines = ["# " + json.dumps(head, sort_keys=True), "tau,count,probability"]
    lines += [
        f"{t},{c},{p!r}"
        for t, c, p in zip(dist.taus.tolist(), dist.counts.tolist(), dist.probabilities.tolist())
    ]
    path.write_text("\n".join(lines) + "\n")
    return path


def read_header(path: str | Path) -> dict:
    with Path(path).open() as fh:
        first = fh.readline()
    if not first.startswith("# "):
        return {}
    return json.loads(first[2:])


def read_distribution(path: str | Path) -> ClusterDistribution:
    head = read_header(path)
    data = np.loadtxt(path, delimiter=",", comments="#", skiprows=2, ndmin=2)
    meta = {k: v for k, v in head.items() if k not in ("n", "total")}
    return ClusterDistribution(int(head["n"]), data[:, 0].astype(np.int64), data[:, 1].astype(np.int64), meta)


@dataclass(frozen=True)
class PowerLawFit:
    alpha: float
    cutoff: float
    tau_min: int
    tau_max: int
    r_squared: float
    n_bins: int
    bin_ratio: float = DEFAULT_BIN_RATIO


def log_bin_edges(tau_min: int, tau_max: int, ratio: float = DEFAULT_BIN_RATIO) -> np.ndarray:
    """Integer edges growing geometrically by ``ratio``; last edge is ``tau_max + 1``."""
    if ratio <= 1:
        raise ValueError("bin ratio must exceed 1")
    edges = [tau_min]
    x = float(tau_min)
    while edges[-1] <= tau_max:
        x *= ratio
        edge = max(math.floor(x), edges[-1] + 1)
        edges.append(min(edge, tau_max + 1))
    return np.array(edges, dtype=np.int64)


def log_binned(dist: ClusterDistribution, tau_min: int, tau_max: int, ratio: float = DEFAULT_BIN_RATIO):
    """``(centre, density)`` of non-empty log bins between ``tau_min`` and ``tau_max``.

    Density is bin probability mass over bin width; the centre is the
    geometric mean of the first and last integer in the bin.
    """
    edges = log_bin_edges(tau_min, tau_max, ratio)
    mass, _ = np.histogram(dist.taus, bins=edges, weights=dist.probabilities)
    width = np.diff(edges)
    centre = np.sqrt(edges[:-1] * (edges[1:] - 1.0))
    keep = mass > 0
    return centre[keep], mass[keep] / width[keep]


def fit_power_law(
    dist: ClusterDistribution,
    tau_min: int = 1,
    tau_max: int | None = None,
    bin_ratio: float = DEFAULT_BIN_RATIO,
    min_distinct: int = 5,
) -> PowerLawFit:
    """Log-log least squares of the binned ``P(tau, n)`` over ``tau <= n``.

    The exponential cut-off scale is not fitted; it is reported as ``n``.
    The range never extends past the longest observed duration, so the
    last bin is not diluted by integers that could not have been seen.
    """
    n = dist.window
    hi = min(n, int(dist.taus[-1]))
    if tau_max is not None:
        hi = min(hi, tau_max)
    if hi < tau_min:
        raise InsufficientRangeError(f"empty fit range [{tau_min}, {hi}]")
    in_range = (dist.taus >= tau_min) & (dist.taus <= hi)
    distinct = int(in_range.sum())
    if distinct < min_distinct:
        raise InsufficientRangeError(
            f"{distinct} distinct durations in [{tau_min}, {hi}], need {min_distinct}"
        )
    x, y = log_binned(dist, tau_min, hi, bin_ratio)
    if len(x) < 3:
        raise InsufficientRangeError(f"only {len(x)} non-empty log bins in [{tau_min}, {hi}]")
    lx, ly = np.log(x), np.log(y)
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return PowerLawFit(
        alpha=float(-slope),
        cutoff=float(n),
        tau_min=int(tau_min),
        tau_max=int(hi),
        r_squared=min(max(r2, 0.0), 1.0),
        n_bins=len(x),
        bin_ratio=bin_ratio,
    )
