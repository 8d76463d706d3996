"""Cluster entropy curves, Market Dynamic Index and horizon dependence.

``S(tau, n)`` is the self-information ``-log P(tau, n)`` in nats of each
observed duration. Any additive constant cancels in ``H = I(M) - I(1)``,
so curves are reported without an offset.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .cluster import ClusterDistribution, read_header

NORMALIZATIONS = ("raw", "count")
DEFAULT_TAU_MAX_FACTOR = 3


@dataclass(frozen=True)
class EntropyCurve:
    window: int
    taus: np.ndarray
    values: np.ndarray
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        taus = np.array(self.taus, dtype=np.int64)
        vals = np.array(self.values, dtype=np.float64)
        if taus.shape != vals.shape or taus.ndim != 1:
            raise ValueError("taus and entropy values must be 1-d and aligned")
        if np.any(np.diff(taus) <= 0):
            raise ValueError("curve durations must be strictly increasing")
        if not np.all(np.isfinite(vals)) or np.any(vals < 0):
            raise ValueError("entropy values must be finite and non-negative")
        taus.setflags(write=False)
        vals.setflags(write=False)
        object.__setattr__(self, "taus", taus)
        object.__setattr__(self, "values", vals)

    def __len__(self) -> int:
        return len(self.taus)

    def as_dict(self) -> dict[int, float]:
        return dict(zip(self.taus.tolist(), self.values.tolist()))

    def __eq__(self, other):
        if not isinstance(other, EntropyCurve):
            return NotImplemented
        return (
            self.window == other.window
            and np.array_equal(self.taus, other.taus)
            and np.array_equal(self.values, other.values)
        )

    __hash__ = None


def cluster_entropy(dist: ClusterDistribution) -> EntropyCurve:
    # + 0.0 turns -0.0 (P = 1) into 0.0
    values = -np.log(dist.probabilities) + 0.0
    return EntropyCurve(dist.window, dist.taus, values, dict(dist.meta))


def shannon_entropy(dist: ClusterDistribution) -> float:
    """``-sum P log P`` of the duration distribution, in nats."""
    p = dist.probabilities
    return float(-(p * np.log(p)).sum() + 0.0)


@dataclass(frozen=True)
class DynamicIndex:
    """Market Dynamic Index of one curve with the settings that produced it."""

    value: float
    window: int
    tau_max: int
    normalization: str
    n_points: int

    def __float__(self) -> float:
        return self.value


def market_dynamic_index(
    curve: EntropyCurve,
    tau_max: int | None = None,
    normalization: str = "raw",
) -> DynamicIndex:
    """Sum of ``S(tau, n)`` over observed ``tau <= tau_max`` (default ``3n``).

    ``normalization="count"`` divides the sum by the number of summed
    points.
    """
    if normalization not in NORMALIZATIONS:
        raise ValueError(f"unknown normalization {normalization!r}; expected one of {NORMALIZATIONS}")
    if tau_max is None:
        tau_max = DEFAULT_TAU_MAX_FACTOR * curve.window
    keep = curve.taus <= tau_max
    k = int(keep.sum())
    if k == 0:
        lowest = int(curve.taus[0]) if len(curve) else None
        raise ValueError(f"tau_max={tau_max} is below every observed duration (smallest {lowest})")
    total = float(curve.values[keep].sum())
    if normalization == "count":
        total /= k
    return DynamicIndex(total, curve.window, int(tau_max), normalization, k)


@dataclass(frozen=True)
class ReferenceRescaling:
    name: str
    one_period: float
    H: np.ndarray
    I: np.ndarray


@dataclass(frozen=True)
class HorizonReport:
    """Grids indexed ``[M - 1, j]`` for horizon ``M`` and window ``windows[j]``.

    Missing (degenerate) cells are NaN and stay NaN through every grid.
    """

    windows: tuple[int, ...]
    I: np.ndarray
    H: np.ndarray
    h_rel: np.ndarray
    references: tuple[ReferenceRescaling, ...] = ()
    skipped: tuple[int, ...] = ()
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def horizons(self) -> range:
        return range(1, self.I.shape[0] + 1)

    def rows(self) -> list[dict]:
        """Long-format records, one per (M, n[, model])."""
        out = []
        for i, M in enumerate(self.horizons):
            for j, n in enumerate(self.windows):
                base = {
                    "M": M,
                    "n": n,
                    "I": _num(self.I[i, j]),
                    "H": _num(self.H[i, j]),
                    "h_rel": _num(self.h_rel[i, j]),
                }
                if not self.references:
                    out.append(base)
                for ref in self.references:
                    out.append(
                        {**base, "model": ref.name, "H_ref": _num(ref.H[i, j]), "I_ref": _num(ref.I[i, j])}
                    )
        return out

    def table(self, horizon: int | None = None) -> dict:
        """Per-window blocks of I(M) and H(M) for every reference model."""
        M = self.I.shape[0] if horizon is None else horizon
        i = M - 1
        blocks = []
        for j, n in enumerate(self.windows):
            block = {
                "n": n,
                "I(1)": _num(self.I[0, j]),
                f"I({M})": _num(self.I[i, j]),
                f"H({M})": _num(self.H[i, j]),
                "h_rel": _num(self.h_rel[i, j]),
            }
            if self.references:
                block["models"] = {
                    ref.name: {
                        "I(1)": ref.one_period,
                        f"I({M})": _num(ref.I[i, j]),
                        f"H({M})": _num(ref.H[i, j]),
                    }
                    for ref in self.references
                }
            blocks.append(block)
        return {"horizon": M, "windows": list(self.windows), "blocks": blocks, "skipped_windows": list(self.skipped), "meta": self.meta}


def _num(v) -> float | None:
    v = float(v)
    return None if math.isnan(v) else v


def horizon_dependence(
    I_grid,
    windows: Sequence[int] | None = None,
    references: Mapping[str, float] | Sequence[tuple[str, float]] | None = None,
) -> HorizonReport:
    """``H(M, n) = I(M, n) - I(1, n)`` and its relative form ``H / I(1, n)``.

    Each reference ``(name, I1_ref)`` gets ``H_ref = h_rel * I1_ref`` and
    ``I_ref = I1_ref + H_ref``. Windows with ``I(1, n) == 0`` cannot be
    rescaled: their ``h_rel`` is NaN and they are listed in ``skipped``.
    """
    I = np.array(I_grid, dtype=np.float64)
    if I.ndim == 1:
        I = I[:, None]
    if I.ndim != 2 or I.shape[0] < 1:
        raise ValueError("I grid must be 2-d with one row per horizon")
    if windows is None:
        windows = tuple(range(I.shape[1]))
    windows = tuple(int(w) for w in windows)
    if len(windows) != I.shape[1]:
        raise ValueError(f"{len(windows)} windows for {I.shape[1]} grid columns")
    base = I[0]
    H = I - base
    zero = base == 0
    with np.errstate(divide="ignore", invalid="ignore"):
        h_rel = np.where(zero, np.nan, H / np.where(zero, 1.0, base))
    skipped = tuple(w for w, z in zip(windows, zero) if z)
    if references is None:
        refs: list[tuple[str, float]] = []
    elif isinstance(references, Mapping):
        refs = list(references.items())
    else:
        refs = [(str(a), float(b)) for a, b in references]
    rescaled = []
    for name, one in refs:
        h_ref = h_rel * one
        rescaled.append(ReferenceRescaling(name, float(one), h_ref, one + h_ref))
    return HorizonReport(windows, I, H, h_rel, tuple(rescaled), skipped)


def write_curve(path: str | Path, curve: EntropyCurve, **header) -> Path:
    """CSV ``tau,S`` below a ``# {json}`` header line."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    head = {"n": curve.window, **curve.meta, **header}
    lines = ["# " + json.dumps(head, sort_keys=True), "tau,S"]
    lines += [f"{t},{s!r}" for t, s in zip(curve.taus.tolist(), curve.values.tolist())]
    path.write_text("\n".join(lines) + "\n")
    return path


def read_curve(path: str | Path) -> EntropyCurve:
    head = read_header(path)
    data = np.loadtxt(path, delimiter=",", comments="#", skiprows=2, ndmin=2)
    meta = {k: v for k, v in head.items() if k != "n"}
    return EntropyCurve(int(head["n"]), data[:, 0].astype(np.int64), data[:, 1], meta)


def write_report(report: HorizonReport, csv_path: str | Path, json_path: str | Path | None = None) -> None:
    csv_path = Path(csv_path)
    csv_path.parent.mkdir(parents=True, exist_ok=True)
    rows = report.rows()
    fields = ["M", "n", "I", "H", "h_rel"] + (["model", "H_ref", "I_ref"] if report.references else [])
    with csv_path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: ("" if row[k] is None else (repr(row[k]) if isinstance(row[k], float) else row[k])) for k in fields})
    if json_path is not None:
        Path(json_path).write_text(json.dumps(report.table(), indent=2, sort_keys=True) + "\n")
