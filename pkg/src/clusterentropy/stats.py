"""Paired t-test against benchmark entropy curves, and discrete KL divergence."""

from __future__ import annotations

import math
import warnings
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .entropy import EntropyCurve

_BETA_RTOL = 1e-10
_BETA_MAXITER = 10_000
_TINY = 1e-300


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction of the incomplete beta function (modified Lentz)."""
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    d = 1.0 / (d if abs(d) > _TINY else _TINY)
    h = d
    for m in range(1, _BETA_MAXITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = 1.0 / (d if abs(d) > _TINY else _TINY)
        c = 1.0 + aa / c
        c = c if abs(c) > _TINY else _TINY
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = 1.0 / (d if abs(d) > _TINY else _TINY)
        c = 1.0 + aa / c
        c = c if abs(c) > _TINY else _TINY
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _BETA_RTOL * 1e-2:
            return h
    raise ArithmeticError(f"incomplete beta did not converge for a={a}, b={b}, x={x}")


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    """``I_x(a, b)`` for ``a, b > 0`` and ``0 <= x <= 1``."""
    if a <= 0 or b <= 0:
        raise ValueError("a and b must be positive")
    if not 0.0 <= x <= 1.0:
        raise ValueError("x must lie in [0, 1]")
    if x == 0.0 or x == 1.0:
        return x
    log_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b) + a * math.log(x) + b * math.log1p(-x)
    )
    front = math.exp(log_front)
    # the continued fraction converges fast only on this side of the mean
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def student_t_sf2(t: float, dof: float) -> float:
    """Two-sided tail probability ``P(|T| >= |t|)`` for Student's t."""
    if math.isinf(t):
        return 0.0
    return regularized_incomplete_beta(dof / 2.0, 0.5, dof / (dof + t * t))


def student_t_cdf(t: float, dof: float) -> float:
    tail = 0.5 * student_t_sf2(t, dof)
    return 1.0 - tail if t > 0 else tail


@dataclass(frozen=True)
class PairedTestResult:
    t_statistic: float
    dof: int
    p_value: float
    reject: bool
    n_pairs: int
    degenerate: bool = False

    def as_row(self, **extra) -> dict:
        return {
            **extra,
            "t": self.t_statistic,
            "dof": self.dof,
            "p": self.p_value,
            "h": int(self.reject),
            "pairs": self.n_pairs,
        }


def paired_t_test(a: Sequence[float], b: Sequence[float], alpha: float = 0.05) -> PairedTestResult:
    """Two-sided paired t-test on ``a - b``.

    All-zero differences give ``t = 0, p = 1``. Constant nonzero
    differences give ``p = 0`` and are flagged ``degenerate``.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError(f"paired samples must be 1-d and equal length, got {a.shape} and {b.shape}")
    k = len(a)
    if k < 2:
        raise ValueError("paired t-test needs at least 2 pairs")
    d = a - b
    dof = k - 1
    if not d.any():
        return PairedTestResult(0.0, dof, 1.0, False, k)
    mean = float(d.mean())
    sd = float(d.std(ddof=1))
    if sd == 0.0 or sd <= 1e-15 * abs(mean):
        warnings.warn("paired differences have zero variance", RuntimeWarning, stacklevel=2)
        return PairedTestResult(math.copysign(math.inf, mean), dof, 0.0, True, k, degenerate=True)
    t = mean / (sd / math.sqrt(k))
    p = min(1.0, max(0.0, student_t_sf2(t, dof)))
    return PairedTestResult(t, dof, p, p < alpha, k)


def _pooled_points(curves: Iterable[EntropyCurve]) -> dict[tuple[int, int], float]:
    """``(n, tau) -> S``; repeated curves for one window are averaged point-wise."""
    acc: dict[tuple[int, int], list[float]] = defaultdict(list)
    for curve in curves:
        for tau, s in zip(curve.taus.tolist(), curve.values.tolist()):
            acc[(curve.window, tau)].append(s)
    return {key: float(np.mean(v)) for key, v in acc.items()}


def paired_entropy_points(
    market_curves: Iterable[EntropyCurve], benchmark_curves: Iterable[EntropyCurve]
) -> tuple[np.ndarray, np.ndarray, list[tuple[int, int]]]:
    market = _pooled_points(market_curves)
    bench = _pooled_points(benchmark_curves)
    keys = sorted(market.keys() & bench.keys())
    return (
        np.array([market[k] for k in keys]),
        np.array([bench[k] for k in keys]),
        keys,
    )


def entropy_comparison_test(
    market_curves: Iterable[EntropyCurve],
    benchmark_curves: Iterable[EntropyCurve],
    alpha: float = 0.05,
) -> PairedTestResult:
    """Paired t-test of ``S`` at the ``(n, tau)`` points both curve sets share.

    Curves passed in belong to one horizon. Several benchmark curves with
    the same window (one per seed) are averaged at each duration.
    """
    a, b, keys = paired_entropy_points(market_curves, benchmark_curves)
    if len(keys) == 0:
        raise ValueError("market and benchmark curves share no (n, tau) points")
    return paired_t_test(a, b, alpha)


def kl_divergence(p: Sequence[float], q: Sequence[float], atol: float = 1e-9) -> float:
    """``sum p log(p / q)`` in nats over a common support.

    Returns ``inf`` (with a warning) when ``q`` vanishes where ``p`` does not.
    """
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape or p.ndim != 1:
        raise ValueError("p and q must be 1-d over the same support")
    if np.any(p < 0) or np.any(q < 0):
        raise ValueError("probabilities must be non-negative")
    if abs(p.sum() - 1.0) > atol or abs(q.sum() - 1.0) > atol:
        raise ValueError(f"distributions must be normalised (sums {p.sum()!r}, {q.sum()!r})")
    live = p > 0
    if np.any(q[live] == 0):
        warnings.warn("q is zero where p is positive; divergence is infinite", RuntimeWarning, stacklevel=2)
        return math.inf
    pl, ql = p[live], q[live]
    return float(max(0.0, np.sum(pl * (np.log(pl) - np.log(ql)))))
