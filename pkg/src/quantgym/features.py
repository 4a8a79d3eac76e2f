"""Technical indicators, the turbulence risk index, and event alignment.

Everything here is causal: a value at step t depends only on bars at or
before t. Undefined warmup prefixes are NaN; FeatureMatrix.warmup is the
first row where every feature is finite.
"""
from __future__ import annotations

import calendar as _calendar
import logging
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone

import numpy as np

from . import kernels
from .errors import FeatureError
from .market_data import BarTable, to_datetime64

logger = logging.getLogger(__name__)

INDICATOR_DEFAULTS = {
    "MACD": (12, 26, 9),
    "RSI": (14,),
    "CCI": (20,),
    "ADX": (14,),
    "SMA": (20,),
    "EMA": (20,),
}


@dataclass(frozen=True)
class IndicatorSpec:
    kind: str
    params: tuple[int, ...] = ()

    def __post_init__(self):
        kind = self.kind.upper()
        if kind not in INDICATOR_DEFAULTS:
            raise FeatureError(f"unknown indicator kind {self.kind!r}")
        object.__setattr__(self, "kind", kind)
        params = tuple(int(p) for p in self.params) or INDICATOR_DEFAULTS[kind]
        if len(params) != len(INDICATOR_DEFAULTS[kind]):
            raise FeatureError(
                f"{kind} takes {len(INDICATOR_DEFAULTS[kind])} period(s), "
                f"got {params}")
        if any(p < 1 for p in params):
            raise FeatureError(f"{kind} periods must be >= 1, got {params}")
        object.__setattr__(self, "params", params)

    @property
    def name(self) -> str:
        return "_".join([self.kind.lower()] + [str(p) for p in self.params])


@dataclass(frozen=True, eq=False)
class FeatureMatrix:
    """Per-time, per-ticker feature tensor feeding environment states."""

    calendar: np.ndarray  # (T,)
    tickers: tuple[str, ...]
    feature_names: tuple[str, ...]
    values: np.ndarray  # (T, n, I) float64
    warmup: int

    def __post_init__(self):
        T, n, I = len(self.calendar), len(self.tickers), len(self.feature_names)
        if self.values.shape != (T, n, I):
            raise FeatureError(
                f"values shape {self.values.shape} != {(T, n, I)}")
        if len(set(self.feature_names)) != I:
            raise FeatureError("duplicate feature name")
        if self.warmup < T and not np.isfinite(self.values[self.warmup:]).all():
            raise FeatureError("non-finite feature values past warmup")
        self.values.setflags(write=False)

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    def row(self, t: int) -> np.ndarray:
        """Flattened (n * I,) feature vector at step t, ticker-major."""
        return self.values[t].reshape(-1)


@dataclass(frozen=True, eq=False)
class TurbulenceSeries:
    calendar: np.ndarray
    values: np.ndarray  # (T,), NaN while undefined
    window: int

    def defined(self) -> np.ndarray:
        return np.isfinite(self.values)


@dataclass(frozen=True)
class EventSeries:
    """Timestamped per-ticker scalar events (news sentiment, fundamentals)."""

    events: tuple  # of (enter_time datetime64[s], ticker, value)
    kind: str  # "sentiment" | "fundamental"

    def __post_init__(self):
        if self.kind not in ("sentiment", "fundamental"):
            raise FeatureError(f"unknown event kind {self.kind!r}")
        norm = tuple(
            (to_datetime64(ts), str(tk), float(v)) for ts, tk, v in self.events)
        object.__setattr__(self, "events", norm)

    def sorted_events(self):
        return sorted(self.events, key=lambda e: (e[0], e[1]))


EVENTS_HEADER = "enter_time,ticker,value"


def load_events_csv(path: str, kind: str) -> EventSeries:
    """Load an event file (header: enter_time,ticker,value)."""
    from .market_data import parse_timestamp

    rows = []
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != EVENTS_HEADER:
            raise FeatureError(
                f"bad events header {header!r}, expected {EVENTS_HEADER}")
        for line_no, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 3:
                raise FeatureError(f"{path}:{line_no}: expected 3 fields")
            try:
                rows.append((parse_timestamp(parts[0]), parts[1],
                             float(parts[2])))
            except ValueError as exc:
                raise FeatureError(f"{path}:{line_no}: {exc}") from None
    return EventSeries(tuple(rows), kind)


def _per_ticker(table: BarTable, fn) -> np.ndarray:
    out = np.empty((table.n_steps, table.n_tickers))
    for j in range(table.n_tickers):
        out[:, j] = fn(
            np.ascontiguousarray(table.open[:, j]),
            np.ascontiguousarray(table.high[:, j]),
            np.ascontiguousarray(table.low[:, j]),
            np.ascontiguousarray(table.close[:, j]),
        )
    return out


def compute_indicator(table: BarTable, spec: IndicatorSpec) -> np.ndarray:
    """(T, n) indicator values; NaN over the warmup prefix.

    The table must be dense and long enough for the slowest period.
    """
    if not table.dense:
        raise FeatureError("indicators need a dense (cleaned) table")
    T = table.n_steps
    p = spec.params
    if spec.kind == "MACD":
        needed = p[1]
    elif spec.kind == "RSI":
        needed = p[0] + 1
    elif spec.kind == "ADX":
        needed = 2 * p[0]
    else:
        needed = p[0]
    if needed > T:
        raise FeatureError(
            f"{spec.name} needs {needed} steps, table has {T}")

    if spec.kind == "SMA":
        return _per_ticker(table, lambda o, h, l, c: kernels.sma_kernel(c, p[0]))
    if spec.kind == "EMA":
        return _per_ticker(table, lambda o, h, l, c: kernels.ema_kernel(c, p[0]))
    if spec.kind == "MACD":
        fast, slow, _signal = p

        def macd(o, h, l, c):
            return kernels.ema_kernel(c, fast) - kernels.ema_kernel(c, slow)

        return _per_ticker(table, macd)
    if spec.kind == "RSI":
        return _per_ticker(table, lambda o, h, l, c: kernels.rsi_kernel(c, p[0]))
    if spec.kind == "CCI":
        return _per_ticker(table, lambda o, h, l, c: kernels.cci_kernel(h, l, c, p[0]))
    if spec.kind == "ADX":
        return _per_ticker(table, lambda o, h, l, c: kernels.adx_kernel(h, l, c, p[0]))
    raise FeatureError(f"unknown indicator kind {spec.kind!r}")


def macd_signal(table: BarTable, spec: IndicatorSpec) -> np.ndarray:
    """Signal line (EMA of the MACD line); NaN-prefixed like the line."""
    if spec.kind != "MACD":
        raise FeatureError("signal line only applies to MACD")
    line = compute_indicator(table, spec)
    out = np.full_like(line, np.nan)
    for j in range(line.shape[1]):
        col = line[:, j]
        start = int(np.argmax(np.isfinite(col)))
        sig = kernels.ema_kernel(np.ascontiguousarray(col[start:]), spec.params[2])
        out[start:, j] = sig
    return out


def compute_feature_matrix(table: BarTable, specs: list[IndicatorSpec],
                           extra_columns: dict[str, np.ndarray] | None = None,
                           ) -> FeatureMatrix:
    """Stack indicator grids and pre-aligned extra columns into one tensor.

    Extra columns must share the table calendar ((T, n) arrays); feature
    order is declaration order: indicators first, then extras.
    """
    extra_columns = extra_columns or {}
    names: list[str] = []
    layers: list[np.ndarray] = []
    for spec in specs:
        names.append(spec.name)
        layers.append(compute_indicator(table, spec))
    for name, col in extra_columns.items():
        col = np.asarray(col, dtype=float)
        if col.shape != (table.n_steps, table.n_tickers):
            raise FeatureError(
                f"column {name!r} has shape {col.shape}, expected "
                f"{(table.n_steps, table.n_tickers)} (calendar mismatch)")
        names.append(name)
        layers.append(col)
    if not names:
        raise FeatureError("need at least one feature")
    if len(set(names)) != len(names):
        raise FeatureError(f"duplicate feature name in {names}")
    values = np.stack(layers, axis=-1)
    finite = np.isfinite(values).all(axis=(1, 2))
    defined = np.flatnonzero(finite)
    if len(defined) == 0:
        raise FeatureError("no step has all features defined")
    warmup = int(defined[0])
    return FeatureMatrix(table.calendar, table.tickers, tuple(names),
                         values, warmup)


def turbulence_calibration(window: int, n_assets: int) -> float:
    """Scale making the index mean exactly n_assets under i.i.d. returns.

    The raw trailing-window Mahalanobis form overshoots its asymptotic
    chi-square mean by (W+1)(W-1)/(W(W-n-2)) at window W; this constant
    cancels that exactly and tends to 1 as W grows.
    """
    W, n = window, n_assets
    if W <= n + 2:
        return 1.0
    return W * (W - n - 2) / ((W + 1.0) * (W - 1.0))


def turbulence(table: BarTable, window: int = 252,
               calibrated: bool = True) -> TurbulenceSeries:
    """Mahalanobis distance of today's cross-asset returns from recent history.

    Simple returns at t are measured against the mean/covariance of the
    `window` return rows strictly before t, with a trace-scaled ridge on
    the covariance. ``calibrated=False`` gives the raw quadratic form.
    """
    n = table.n_tickers
    if n < 1:
        raise FeatureError("turbulence needs at least one ticker")
    if window < n + 2:
        raise FeatureError(f"window must be >= n+2 = {n + 2}, got {window}")
    if not table.dense:
        raise FeatureError("turbulence needs a dense (cleaned) table")
    T = table.n_steps
    returns = np.zeros((T, n))
    returns[1:] = table.close[1:] / table.close[:-1] - 1.0
    cal = turbulence_calibration(window, n) if calibrated else 1.0
    values = kernels.turbulence_kernel(
        np.ascontiguousarray(returns), window, 1e-8, cal)
    return TurbulenceSeries(table.calendar, values, window)


def _add_months(dt: datetime, months: int) -> datetime:
    month_index = dt.year * 12 + (dt.month - 1) + months
    year, month = divmod(month_index, 12)
    month += 1
    day = min(dt.day, _calendar.monthrange(year, month)[1])
    return dt.replace(year=year, month=month, day=day)


def fundamental_effective_from(enter_time: np.datetime64) -> np.datetime64:
    """First instant a fundamental event may influence trading.

    Period-end dates are inclusive, so the lag runs from the following
    midnight: one day, then two calendar months (day clamped to month
    length). A quarter ending June 30 becomes tradable September 1.
    """
    epoch = int(enter_time.astype("datetime64[s]").astype(np.int64))
    dt = datetime.fromtimestamp(epoch, tz=timezone.utc) + timedelta(days=1)
    shifted = _add_months(dt, 2)
    return np.datetime64(int(shifted.timestamp()), "s")


def align_events(table: BarTable, events: EventSeries) -> np.ndarray:
    """(T, n) event feature column aligned to the table calendar.

    Sentiment: the mean of event values entering during the previous one
    bar interval (t-1, t], zero when quiet; the first bar's interval is
    (t0 - frequency, t0]. Fundamentals: the value of the latest event
    whose lagged effective date has passed, zero before any. Events for
    unknown tickers are skipped with a warning.
    """
    T, n = table.n_steps, table.n_tickers
    out = np.zeros((T, n))
    index = {tk: j for j, tk in enumerate(table.tickers)}
    skipped = set()
    per_ticker: dict[int, list] = {j: [] for j in range(n)}
    for ts, tk, value in events.sorted_events():
        j = index.get(tk)
        if j is None:
            skipped.add(tk)
            continue
        per_ticker[j].append((ts, value))
    if skipped:
        logger.warning("align_events(): skipped events for unknown tickers %s",
                       ", ".join(sorted(skipped)))

    cal = table.calendar
    if events.kind == "sentiment":
        freq = np.timedelta64(table.freq_seconds, "s")
        for j, evs in per_ticker.items():
            if not evs:
                continue
            times = np.array([e[0] for e in evs], dtype="datetime64[s]")
            vals = np.array([e[1] for e in evs])
            for t in range(T):
                lo = cal[t - 1] if t > 0 else cal[0] - freq
                mask = (times > lo) & (times <= cal[t])
                if mask.any():
                    out[t, j] = float(vals[mask].mean())
    else:
        for j, evs in per_ticker.items():
            if not evs:
                continue
            eff = np.array([fundamental_effective_from(e[0]) for e in evs],
                           dtype="datetime64[s]")
            vals = np.array([e[1] for e in evs])
            order = np.argsort(eff, kind="stable")
            eff, vals = eff[order], vals[order]
            # latest event effective at or before each step
            pos = np.searchsorted(eff, cal, side="right") - 1
            for t in range(T):
                if pos[t] >= 0:
                    out[t, j] = float(vals[pos[t]])
    return out
