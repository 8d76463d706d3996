"""Packaged reference tables: market horizon lengths, pricing-kernel entropies, published results."""

from __future__ import annotations

import json
from functools import lru_cache
from importlib import resources


@lru_cache(maxsize=None)
def _load(name: str) -> dict:
    return json.loads(resources.files("clusterentropy.data").joinpath(name).read_text())


def _market_key(market: str) -> str:
    key = market.upper().replace("&", "").replace(" ", "")
    return {"S&P500": "SP500", "SPX": "SP500", "DJI": "DJIA"}.get(key, key)


def market_lengths(market: str) -> list[int]:
    """Cumulative series length at each monthly horizon for ``market``."""
    markets = _load("market_lengths.json")["markets"]
    key = _market_key(market)
    if key not in markets:
        raise KeyError(f"unknown market {market!r}; known: {sorted(markets)}")
    return list(markets[key])


def common_sampled_length() -> int:
    return int(_load("market_lengths.json")["common_sampled_length"])


def one_period_references() -> dict[str, float]:
    """I(1) of the power-utility, recursive-utility and difference-habit agents."""
    return dict(_load("reference_entropies.json")["one_period"])


def pricing_kernel_table() -> dict:
    return _load("reference_entropies.json")["pricing_kernel_models"]


def published_horizon_table(market: str) -> dict[int, dict[str, dict[str, float]]]:
    """``{n: {"I12": {model: v}, "H12": {model: v}}}`` as published."""
    table = _load("published_results.json")["horizon_table"]
    models = table["models"]
    rows = table[_market_key(market)]
    return {
        int(n): {kind: dict(zip(models, vals)) for kind, vals in row.items()}
        for n, row in rows.items()
    }


def published_ttest_p(market: str) -> list[float]:
    return list(_load("published_results.json")["ttest_p"][_market_key(market)])
