"""Dated containers for prices, returns and sentiment scores.

The trading calendar is whatever the price rows say it is: a date is a trading day
if and only if a price row exists for it. Every container is immutable; value
arrays are float64 and flagged read-only.
"""

import datetime
import logging
from dataclasses import dataclass
from typing import Dict, Sequence, Tuple

import numpy as np
import pandas as pd

from .exceptions import (
    DomainError,
    EmptySeriesError,
    NotATradingDayError,
    ParseError,
    SymbolMismatchError,
    ValidationError,
)
from .utility import atomic_write

logger = logging.getLogger(__name__)

WINDOW_SIZE = 7
OUTLIER_POSITION = 3
N_CONDITIONING = OUTLIER_POSITION + 1
N_HORIZON = WINDOW_SIZE - N_CONDITIONING


# %% TYPES


@dataclass(frozen=True)
class TradingDay:
    date: datetime.date
    ordinal: int

    def __post_init__(self):
        assert self.ordinal >= 0, """ordinal must be non-negative"""


def _readonly(values):
    arr = np.array(values, dtype=np.float64)
    arr.setflags(write=False)
    return arr


def _check_dates(dates):
    for prev, nxt in zip(dates[:-1], dates[1:]):
        if not prev < nxt:
            raise ValidationError("dates must be strictly increasing ({0} then {1})".format(prev, nxt))


@dataclass(frozen=True, eq=False)
class _DatedSeries:
    symbol: str
    dates: Tuple[datetime.date, ...]
    values: np.ndarray
    ordinals: Tuple[int, ...] = None

    def __post_init__(self):
        dates = tuple(self.dates)
        values = _readonly(self.values)
        assert values.ndim == 1 and len(values) == len(dates), """dates and values must be parallel"""
        ordinals = tuple(range(len(dates))) if self.ordinals is None else tuple(int(o) for o in self.ordinals)
        assert len(ordinals) == len(dates), """ordinals and dates must be parallel"""
        _check_dates(dates)
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "ordinals", ordinals)

    def __len__(self):
        return len(self.dates)

    @property
    def days(self):
        return tuple(TradingDay(d, o) for d, o in zip(self.dates, self.ordinals))

    @property
    def points(self):
        return list(zip(self.days, self.values.tolist()))

    def position(self, date):
        """ Index of ``date`` in the series, ``NotATradingDayError`` if absent """
        lookup = self._lookup()
        if date not in lookup:
            raise NotATradingDayError("{0} is not a trading day of {1}".format(date, self.symbol))
        return lookup[date]

    def _lookup(self) -> Dict[datetime.date, int]:
        cached = self.__dict__.get("_lookup_cache")
        if cached is None:
            cached = {d: i for i, d in enumerate(self.dates)}
            object.__setattr__(self, "_lookup_cache", cached)
        return cached

    def _mask(self, years):
        years = set(years)
        return np.array([d.year in years for d in self.dates], dtype=bool)


@dataclass(frozen=True, eq=False)
class PriceSeries(_DatedSeries):
    industry: str = ""

    def __post_init__(self):
        super().__post_init__()
        bad = ~(np.isfinite(self.values) & (self.values > 0))
        if bad.any():
            i = int(np.argmax(bad))
            raise DomainError(
                "{0}: price {1!r} on {2} is not strictly positive".format(self.symbol, self.values[i], self.dates[i])
            )

    def years(self, *years):
        """ Restriction to the given calendar years, ordinals re-based to 0 """
        mask = self._mask(years)
        dates = [d for d, keep in zip(self.dates, mask) if keep]
        return PriceSeries(self.symbol, dates, self.values[mask], industry=self.industry)


@dataclass(frozen=True, eq=False)
class ReturnSeries(_DatedSeries):
    def __post_init__(self):
        super().__post_init__()
        if (self.values <= -1).any():
            raise DomainError("{0}: a percentage change <= -1 implies a non-positive price".format(self.symbol))


@dataclass(frozen=True, eq=False)
class SentimentSeries(_DatedSeries):
    def __post_init__(self):
        super().__post_init__()
        bad = ~(np.isfinite(self.values) & (np.abs(self.values) <= 1.0))
        if bad.any():
            i = int(np.argmax(bad))
            raise DomainError(
                "{0}: sentiment {1!r} on {2} lies outside [-1, 1]".format(self.symbol, self.values[i], self.dates[i])
            )

    def get(self, date, default=0.0):
        lookup = self._lookup()
        return float(self.values[lookup[date]]) if date in lookup else default


@dataclass(frozen=True)
class AnomalyWindow:
    """Seven consecutive trading days centred on one flagged day.

    Entry ``OUTLIER_POSITION`` (index 3) is the flagged day. ``returns[k]`` is the
    percentage change from the previous trading day into ``days[k]``. Windows that
    straddle New Year can be built but are dropped before training (``single_year``).
    """

    symbol: str
    days: Tuple[TradingDay, ...]
    returns: Tuple[float, ...]
    sentiments: Tuple[float, ...]
    actual_prices: Tuple[float, ...]

    def __post_init__(self):
        for name in ("days", "returns", "sentiments", "actual_prices"):
            value = tuple(getattr(self, name))
            if name != "days":
                value = tuple(float(v) for v in value)
            if len(value) != WINDOW_SIZE:
                raise ValidationError("window {0} needs exactly {1} entries, got {2}".format(name, WINDOW_SIZE, len(value)))
            object.__setattr__(self, name, value)
        if any(p <= 0 for p in self.actual_prices):
            raise DomainError("window prices must be strictly positive")
        if any(abs(s) > 1 for s in self.sentiments):
            raise DomainError("window sentiments must lie in [-1, 1]")
        _check_dates([d.date for d in self.days])

    @property
    def single_year(self):
        return self.days[0].date.year == self.days[-1].date.year

    @property
    def outlier_day(self):
        return self.days[OUTLIER_POSITION]

    @property
    def year(self):
        return self.outlier_day.date.year

    @property
    def key(self):
        return (self.symbol, self.outlier_day.date)

    @property
    def name(self):
        return "{0}_{1}".format(self.symbol, self.outlier_day.date.isoformat())

    @property
    def conditioning_returns(self):
        return self.returns[:N_CONDITIONING]

    @property
    def conditioning_sentiments(self):
        return self.sentiments[:N_CONDITIONING]

    @property
    def target_returns(self):
        return self.returns[N_CONDITIONING:]

    @property
    def target_prices(self):
        return self.actual_prices[N_CONDITIONING:]

    @property
    def anchor_price(self):
        return self.actual_prices[OUTLIER_POSITION]


# %% OPERATIONS


def pct_change(prices):
    """ Day-over-day percentage change of a price series

    Args:
        prices (PriceSeries): at least two strictly positive prices

    Returns:
        ReturnSeries: ``out[i] = p[i+1] / p[i] - 1``, dated by the later day
    """
    if len(prices) < 2:
        raise EmptySeriesError("{0}: need at least 2 prices, got {1}".format(prices.symbol, len(prices)))
    values = prices.values
    if (values <= 0).any():
        raise DomainError("{0}: prices must be strictly positive".format(prices.symbol))
    changes = values[1:] / values[:-1] - 1.0
    return ReturnSeries(prices.symbol, prices.dates[1:], changes, ordinals=prices.ordinals[1:])


def reconstruct_prices(anchor_price, returns):
    """ Inverse of :func:`pct_change`: compounds returns forward from an anchor price

    Args:
        anchor_price (float): last observed price, > 0
        returns (sequence of float): percentage changes, each > -1

    Returns:
        list of float: ``out[0] = anchor * (1 + r[0])``, ``out[k] = out[k-1] * (1 + r[k])``
    """
    if not anchor_price > 0:
        raise DomainError("anchor price must be > 0, got {0!r}".format(anchor_price))
    returns = np.asarray(list(returns), dtype=np.float64)
    if (returns <= -1).any():
        raise DomainError("a return <= -1 would produce a non-positive price")
    return (anchor_price * np.cumprod(1.0 + returns)).tolist()


def align(prices, sentiments):
    """ Joins prices and sentiment scores on the price calendar

    Price days without a score get 0; scored days without a price are dropped.

    Returns:
        pandas.DataFrame: columns Date, Ordinal, Actuals, S_Scores (one row per price day)
    """
    if sentiments.symbol != prices.symbol:
        raise SymbolMismatchError("cannot align {0} prices with {1} sentiment".format(prices.symbol, sentiments.symbol))
    scores = [sentiments.get(d, 0.0) for d in prices.dates]
    return pd.DataFrame(
        {
            "Date": list(prices.dates),
            "Ordinal": list(prices.ordinals),
            "Actuals": prices.values,
            "S_Scores": np.asarray(scores, dtype=np.float64),
        }
    )


def zero_sentiment(prices):
    """ All-zero sentiment on the price calendar """
    return SentimentSeries(prices.symbol, prices.dates, np.zeros(len(prices)))


class TradingCalendar:
    """Bijection between trading dates and trading-day ordinals.

    Ordinal 0 is the first trading day of ``reference_year``; days before it are not
    indexed.
    """

    def __init__(self, dates: Sequence[datetime.date], reference_year: int):
        self.reference_year = reference_year
        start = next((i for i, d in enumerate(dates) if d.year == reference_year), None)
        if start is None:
            raise NotATradingDayError("no trading day in {0}".format(reference_year))
        self.dates = tuple(dates[start:])
        self._ordinals = {d: i for i, d in enumerate(self.dates)}

    def __len__(self):
        return len(self.dates)

    def __contains__(self, date):
        return date in self._ordinals

    def ordinal(self, date):
        if date not in self._ordinals:
            raise NotATradingDayError("{0} is not an indexed trading day".format(date))
        return self._ordinals[date]

    def date(self, ordinal):
        if not 0 <= ordinal < len(self.dates):
            raise NotATradingDayError("ordinal {0} is outside the calendar".format(ordinal))
        return self.dates[ordinal]

    def items(self):
        return self._ordinals.items()


def ordinal_index(series, reference_year):
    """ Trading-day ordinals counted from the first trading day of ``reference_year``

    Args:
        series (PriceSeries): non-empty
        reference_year (int): anchor year

    Returns:
        TradingCalendar: ``ordinal(date)`` and ``date(ordinal)`` lookups
    """
    if len(series) == 0:
        raise EmptySeriesError("{0}: empty series".format(series.symbol))
    return TradingCalendar(series.dates, reference_year)


# %% FILES


def _read_frame(path, columns):
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, skipinitialspace=True)
    except pd.errors.EmptyDataError:
        return pd.DataFrame({c: [] for c in columns})
    except pd.errors.ParserError as e:
        raise ParseError(str(e), path=path)
    frame.columns = [c.strip() for c in frame.columns]
    missing = [c for c in columns if c not in frame.columns]
    if missing:
        raise ParseError("missing column(s) {0}".format(", ".join(missing)), path=path, line=1)
    return frame


def _parse_column(frame, column, parse, path):
    out = []
    for i, raw in enumerate(frame[column].tolist()):
        try:
            out.append(parse(raw.strip()))
        except ValueError:
            raise ParseError("bad {0} value {1!r}".format(column, raw), path=path, line=i + 2)
    return out


def read_dated_values(path, value_column):
    """ Parses a ``Date,<value_column>`` CSV into dates and floats with line-numbered errors """
    frame = _read_frame(path, ["Date", value_column])
    dates = _parse_column(frame, "Date", datetime.date.fromisoformat, path)
    values = _parse_column(frame, value_column, float, path)
    return dates, values


def read_prices(path, symbol, industry=""):
    """ Reads a ``Date,AdjClose`` price CSV

    Raises:
        ParseError: unparsable date or number (with the 1-based line)
        ValidationError: non-positive price or dates not strictly increasing
    """
    dates, values = read_dated_values(path, "AdjClose")
    for i, v in enumerate(values):
        if not (np.isfinite(v) and v > 0):
            raise ValidationError("price {0!r} is not strictly positive".format(v), path=path, line=i + 2)
    for i in range(1, len(dates)):
        if not dates[i - 1] < dates[i]:
            raise ValidationError("dates must be strictly increasing", path=path, line=i + 2)
    return PriceSeries(symbol, dates, values, industry=industry)


def _write_dated_values(path, dates, values, value_column):
    frame = pd.DataFrame(
        {"Date": [d.isoformat() for d in dates], value_column: [repr(float(v)) for v in values]}
    )
    atomic_write(path, frame.to_csv(index=False, lineterminator="\n"))


def write_prices(series, path):
    _write_dated_values(path, series.dates, series.values, "AdjClose")
