"""Deterministic synthetic market data for demos and tests."""
from __future__ import annotations

import numpy as np

from .market_data import BarTable


def synthetic_table(n_tickers: int = 3, days: int = 120, seed: int = 42,
                    start: str = "2022-01-03", frequency: str = "1day",
                    drift: float = 0.0004, vol: float = 0.015) -> BarTable:
    """Geometric-random-walk daily bars with plausible OHLC structure."""
    rng = np.random.default_rng(seed)
    tickers = tuple(f"SYN{i}" for i in range(n_tickers))
    base = rng.uniform(20.0, 200.0, n_tickers)
    log_steps = rng.normal(drift, vol, (days, n_tickers))
    close = base * np.exp(np.cumsum(log_steps, axis=0))
    open_ = np.empty_like(close)
    open_[0] = base
    open_[1:] = close[:-1]
    spread = np.abs(rng.normal(0.0, 0.004, (days, n_tickers))) + 1e-4
    high = np.maximum(open_, close) * (1.0 + spread)
    low = np.minimum(open_, close) * (1.0 - spread)
    volume = np.round(rng.uniform(1e4, 5e5, (days, n_tickers)))
    start64 = np.datetime64(f"{start}T00:00:00", "s")
    calendar = start64 + np.arange(days) * np.timedelta64(86400, "s")
    ones = np.ones((days, n_tickers), dtype=bool)
    return BarTable(frequency, tickers, calendar, open_, high, low, close,
                    volume.astype(float), ones, np.zeros_like(ones))
