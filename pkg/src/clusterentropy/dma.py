"""Simple moving averages over a window grid (backward, centered, forward)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .series import PriceSeries

VARIANTS = ("backward", "centered", "forward")

# Above this length the running sum is accumulated in extended precision.
COMPENSATED_THRESHOLD = 1_000_000

_BASE_GRID = (30, 50, 100, 150, 200)


def alignment_offset(n: int, variant: str) -> int:
    """Index of the parent sample compared with window mean number 0.

    Window mean ``i`` averages ``x[i : i + n]``; it is compared with
    ``x[i + offset]``: the last point of the window for ``backward``,
    the middle for ``centered`` and the first for ``forward``.
    """
    if variant == "backward":
        return n - 1
    if variant == "centered":
        return (n - 1) // 2
    if variant == "forward":
        return 0
    raise ValueError(f"unknown moving-average variant {variant!r}; expected one of {VARIANTS}")


@dataclass(frozen=True)
class MovingAverageSeries:
    window: int
    variant: str
    values: np.ndarray
    offset: int
    parent_length: int

    def __len__(self) -> int:
        return len(self.values)

    @property
    def indices(self) -> np.ndarray:
        """Parent-series indices each value is aligned with."""
        return np.arange(self.offset, self.offset + len(self.values))


def window_means(x: np.ndarray, n: int) -> np.ndarray:
    """Means of the first ``len(x) - n`` length-``n`` windows, by running sum.

    The series is shifted by its first value before summing so the running
    sum stays small; long inputs accumulate in ``np.longdouble``.
    """
    x = np.asarray(x, dtype=np.float64)
    size = len(x)
    anchor = x[0]
    dtype = np.longdouble if size > COMPENSATED_THRESHOLD else np.float64
    # only the first size - 1 samples ever enter a window
    shifted = np.asarray(x[: size - 1], dtype=dtype) - dtype(anchor)
    running = np.zeros(size, dtype=dtype)
    np.cumsum(shifted, out=running[1:])
    sums = running[n:] - running[: size - n]
    return np.asarray(sums / n + dtype(anchor), dtype=np.float64)


def moving_average(series: PriceSeries | np.ndarray, n: int, variant: str = "backward") -> MovingAverageSeries:
    """Length ``N - n`` moving average of ``series`` with window ``n``."""
    x = series.values if isinstance(series, PriceSeries) else np.asarray(series, dtype=np.float64)
    size = len(x)
    if n <= 0:
        raise ValueError("window n must be positive")
    if n >= size:
        raise ValueError(f"window {n} must be smaller than series length {size}")
    offset = alignment_offset(n, variant)
    values = window_means(x, n)
    values.setflags(write=False)
    return MovingAverageSeries(n, variant, values, offset, size)


@dataclass(frozen=True)
class WindowGrid:
    windows: tuple[int, ...]

    def __post_init__(self):
        w = tuple(int(v) for v in self.windows)
        object.__setattr__(self, "windows", w)
        if not w:
            raise ValueError("window grid is empty")
        if w[0] < 1:
            raise ValueError("windows must be positive")
        if any(b <= a for a, b in zip(w, w[1:])):
            raise ValueError("windows must be strictly increasing")

    def __iter__(self):
        return iter(self.windows)

    def __len__(self) -> int:
        return len(self.windows)

    def validate(self, shortest_length: int) -> None:
        if self.windows[-1] >= shortest_length:
            raise ValueError(
                f"largest window {self.windows[-1]} must be below the shortest series length {shortest_length}"
            )


def default_window_grid(max_n: int) -> WindowGrid:
    """30, 50, 100, 150, 200, then steps of 100 up to ``max_n``."""
    if max_n < 30:
        raise ValueError("max_n must be at least 30")
    grid = [n for n in _BASE_GRID if n <= max_n]
    grid.extend(range(300, max_n + 1, 100))
    return WindowGrid(tuple(grid))


def parse_window_grid(text: str) -> WindowGrid:
    """``default:<max>`` or an explicit comma list such as ``30,50,100``."""
    text = text.strip()
    if text.startswith("default:"):
        return default_window_grid(int(text.split(":", 1)[1]))
    return WindowGrid(tuple(int(v) for v in text.split(",") if v.strip()))
