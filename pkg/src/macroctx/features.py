"""Numeric feature vector and next-day label.

All functions index bars by position in the sorted series, so "lag k" means
k bars back. After business-day loading that is k business days.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass
from typing import TYPE_CHECKING, Mapping, Sequence

import numpy as np

from .errors import ValidationError

if TYPE_CHECKING:
    from .calendar_io import PriceBar

OHLCV = ("open", "high", "low", "close", "volume")


@dataclass(frozen=True)
class FeatureSpec:
    return_lags: tuple[int, ...] = (1, 2, 5)
    vol_window: int | None = 10
    include_ohlcv: bool = True
    sentiment_columns: tuple[str, ...] = ()

    def __post_init__(self):
        lags = tuple(int(v) for v in self.return_lags)
        if any(v < 1 for v in lags):
            raise ValidationError(f"return lags must be >= 1, got {lags}")
        if self.vol_window is not None and int(self.vol_window) < 1:
            raise ValidationError(f"vol_window must be >= 1, got {self.vol_window}")
        object.__setattr__(self, "return_lags", lags)
        object.__setattr__(self, "sentiment_columns", tuple(self.sentiment_columns))

    def to_dict(self) -> dict:
        return {"return_lags": list(self.return_lags), "vol_window": self.vol_window,
                "include_ohlcv": self.include_ohlcv, "sentiment_columns": list(self.sentiment_columns)}

    @classmethod
    def from_dict(cls, d: Mapping) -> "FeatureSpec":
        return cls(tuple(d["return_lags"]), d["vol_window"], bool(d["include_ohlcv"]),
                   tuple(d["sentiment_columns"]))


def feature_names(spec: FeatureSpec) -> list[str]:
    names = list(OHLCV) if spec.include_ohlcv else []
    names += [f"ret_{k}" for k in spec.return_lags]
    if spec.vol_window is not None:
        names.append(f"vol_{spec.vol_window}")
    names += list(spec.sentiment_columns)
    return names


class PriceSeries:
    """Column view of date-sorted bars with O(1) date lookup."""

    def __init__(self, dates, open_, high, low, close, volume):
        self.dates = list(dates)
        self.open = np.asarray(open_, dtype=float)
        self.high = np.asarray(high, dtype=float)
        self.low = np.asarray(low, dtype=float)
        self.close = np.asarray(close, dtype=float)
        self.volume = np.asarray(volume, dtype=float)
        self._pos = {d: i for i, d in enumerate(self.dates)}
        if len(self._pos) != len(self.dates):
            raise ValidationError("duplicate dates in price series")
        if any(b <= a for a, b in zip(self.dates, self.dates[1:])):
            raise ValidationError("price series must be sorted by date")

    @classmethod
    def from_bars(cls, bars: Sequence[PriceBar]) -> "PriceSeries":
        if isinstance(bars, PriceSeries):
            return bars
        bars = sorted(bars, key=lambda b: b.date)
        return cls([b.date for b in bars], [b.open for b in bars], [b.high for b in bars],
                   [b.low for b in bars], [b.close for b in bars], [b.volume for b in bars])

    def __len__(self):
        return len(self.dates)

    def __contains__(self, day) -> bool:
        return day in self._pos

    def position(self, day: dt.date) -> int | None:
        return self._pos.get(day)


def _series(bars) -> PriceSeries:
    return bars if isinstance(bars, PriceSeries) else PriceSeries.from_bars(bars)


def lagged_return(bars, t: dt.date, lag: int) -> float | None:
    """close(t) / close(t - lag) - 1, or None without enough history."""
    prices = _series(bars)
    i = prices.position(t)
    if i is None or i - lag < 0:
        return None
    return float(prices.close[i] / prices.close[i - lag] - 1.0)


def realized_vol(bars, t: dt.date, window: int) -> float | None:
    """Population std of the ``window`` daily simple returns ending at t."""
    prices = _series(bars)
    i = prices.position(t)
    if i is None or i - window < 0:
        return None
    c = prices.close[i - window:i + 1]
    return float(np.std(c[1:] / c[:-1] - 1.0))


def build_numeric_vector(bars, sentiment_row: Mapping[str, float] | None, spec: FeatureSpec,
                         t: dt.date) -> np.ndarray | None:
    """Fixed-order numeric vector for day t; None if any component is absent.

    Order: OHLCV of day t, returns in lag order, realized vol, sentiment
    columns in spec order.
    """
    prices = _series(bars)
    i = prices.position(t)
    if i is None:
        return None
    out: list[float] = []
    if spec.include_ohlcv:
        out += [prices.open[i], prices.high[i], prices.low[i], prices.close[i], prices.volume[i]]
    for lag in spec.return_lags:
        r = lagged_return(prices, t, lag)
        if r is None:
            return None
        out.append(r)
    if spec.vol_window is not None:
        v = realized_vol(prices, t, spec.vol_window)
        if v is None:
            return None
        out.append(v)
    for col in spec.sentiment_columns:
        if sentiment_row is None or col not in sentiment_row:
            return None
        out.append(float(sentiment_row[col]))
    return np.asarray(out, dtype=float)


def make_label(bars, t: dt.date) -> int | None:
    """1 if the next bar opens strictly above close(t), else 0; ties give 0."""
    prices = _series(bars)
    i = prices.position(t)
    if i is None or i + 1 >= len(prices):
        return None
    return int(prices.open[i + 1] > prices.close[i])


def forward_return(bars, t: dt.date) -> float | None:
    """Close-to-close return from t to the next bar."""
    prices = _series(bars)
    i = prices.position(t)
    if i is None or i + 1 >= len(prices):
        return None
    return float(prices.close[i + 1] / prices.close[i] - 1.0)
