"""Contextual outlier flags from studentized ARIMA residuals, and the 7-day windows around them."""

import json
import logging
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from .arima import ROOT_MARGIN, detection_fit, one_step_residuals, studentize
from .core.series import (
    OUTLIER_POSITION,
    WINDOW_SIZE,
    AnomalyWindow,
    TradingDay,
    pct_change,
)

logger = logging.getLogger(__name__)

THRESHOLD = 2.0


@dataclass(frozen=True)
class OutlierFlag:
    day: TradingDay
    studentized_residual: float
    flagged: bool


@dataclass
class DetectionDiagnostics:
    """Per-symbol tally written to ``detection.json``."""

    symbol: str
    training_year_used: Optional[int] = None
    order: str = ""
    flagged: Dict[int, int] = field(default_factory=dict)
    windows_extracted: int = 0
    dropped_insufficient_context: int = 0
    dropped_year_crossing: int = 0
    train_windows: int = 0
    test_windows: int = 0
    error: Optional[str] = None

    def to_dict(self):
        out = asdict(self)
        out["flagged"] = {str(k): v for k, v in self.flagged.items()}
        return out

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2)


@dataclass(frozen=True)
class SymbolDetection:
    symbol: str
    model: object
    flags: Tuple[OutlierFlag, ...]
    train_windows: Tuple[AnomalyWindow, ...]
    test_windows: Tuple[AnomalyWindow, ...]
    diagnostics: DetectionDiagnostics


# %%
def flag_outliers(studentized, threshold=THRESHOLD):
    """ Flags days whose absolute studentized residual is strictly above ``threshold``

    Args:
        studentized (sequence of (TradingDay, float)): residuals in day order
        threshold (float): positive cut-off

    Returns:
        list of OutlierFlag: one per input, order preserved
    """
    assert threshold > 0, """threshold must be positive"""
    return [OutlierFlag(day, float(z), bool(abs(z) > threshold)) for day, z in studentized]


def extract_windows(flags, prices, returns, sentiments, diagnostics=None):
    """ Builds one AnomalyWindow per flagged day

    A window needs 3 trading days on each side, and each of its 7 days needs a
    return, so the first window day cannot be the first price row. Windows without
    that context are dropped and counted in ``diagnostics``. Days without a
    sentiment score get 0.

    Args:
        flags (list of OutlierFlag): flags on the price calendar
        prices (PriceSeries): prices
        returns (ReturnSeries): ``pct_change(prices)``
        sentiments (SentimentSeries): scores, possibly with gaps
        diagnostics (DetectionDiagnostics, optional): tally to update

    Returns:
        list of AnomalyWindow
    """
    assert len(returns) == len(prices) - 1, """returns must be the percentage changes of prices"""
    days = prices.days
    windows = []
    for flag in flags:
        if not flag.flagged:
            continue
        i = prices.position(flag.day.date)
        first, last = i - OUTLIER_POSITION, i + (WINDOW_SIZE - OUTLIER_POSITION - 1)
        if first < 1 or last >= len(prices):
            if diagnostics is not None:
                diagnostics.dropped_insufficient_context += 1
            logger.debug("%s: no 3-day context around %s", prices.symbol, flag.day.date)
            continue
        span = range(first, last + 1)
        windows.append(
            AnomalyWindow(
                symbol=prices.symbol,
                days=tuple(days[k] for k in span),
                returns=tuple(returns.values[k - 1] for k in span),
                sentiments=tuple(sentiments.get(prices.dates[k], 0.0) for k in span),
                actual_prices=tuple(prices.values[k] for k in span),
            )
        )
    if diagnostics is not None:
        diagnostics.windows_extracted += len(windows)
    return windows


def filter_year_crossing(windows, diagnostics=None):
    """ Keeps the windows whose 7 days share one calendar year """
    kept = [w for w in windows if w.single_year]
    if diagnostics is not None:
        diagnostics.dropped_year_crossing += len(windows) - len(kept)
    return kept


def year_residuals(model, prices, year):
    """ Studentized one-step residuals of one calendar year

    Residuals roll over all prices up to the end of ``year`` with the fitted
    coefficients fixed; the ones dated in ``year`` are studentized on their own.

    Returns:
        list of (TradingDay, float)
    """
    days = [d for d in prices.days if d.date.year <= year]
    values = prices.values[: len(days)]
    residuals = one_step_residuals(model, values)
    dated = list(zip(days[model.warmup :], residuals))
    in_year = [(d, r) for d, r in dated if d.date.year == year]
    if not in_year:
        return []
    z = studentize([r for _, r in in_year])
    return [(d, float(v)) for (d, _), v in zip(in_year, z)]


def detect_symbol(
    prices,
    sentiments,
    training_year,
    detect_years,
    fallback_year=None,
    threshold=THRESHOLD,
    max_sum=3,
    root_margin=ROOT_MARGIN,
):
    """ Detection for one symbol: fit, residuals, flags, windows, train/test split

    Args:
        prices (PriceSeries): full history covering the training and detect years
        sentiments (SentimentSeries): daily scores
        training_year (int): year the detection ARIMA is fitted on
        detect_years (tuple of int): (train-window year, test-window year)
        fallback_year (int, optional): refit year when the training year is degenerate
        threshold (float): studentized residual cut-off

    Returns:
        SymbolDetection
    """
    train_year, test_year = detect_years
    assert train_year != test_year, """train and test windows must come from different years"""
    diagnostics = DetectionDiagnostics(prices.symbol)
    model, year_used = detection_fit(prices, training_year, fallback_year, max_sum, root_margin)
    diagnostics.training_year_used = year_used
    diagnostics.order = str(model.order)
    logger.info("%s: ARIMA%s fitted on %d", prices.symbol, model.order, year_used)

    returns = pct_change(prices)
    flags: List[OutlierFlag] = []
    windows: List[AnomalyWindow] = []
    for year in (train_year, test_year):
        year_flags = flag_outliers(year_residuals(model, prices, year), threshold)
        diagnostics.flagged[year] = sum(f.flagged for f in year_flags)
        flags.extend(year_flags)
        extracted = extract_windows(year_flags, prices, returns, sentiments, diagnostics)
        windows.extend(filter_year_crossing(extracted, diagnostics))

    train = tuple(w for w in windows if w.year == train_year)
    test = tuple(w for w in windows if w.year == test_year)
    diagnostics.train_windows, diagnostics.test_windows = len(train), len(test)
    return SymbolDetection(prices.symbol, model, tuple(flags), train, test, diagnostics)


def flag_rate(flags):
    """ Share of flagged days """
    if not flags:
        return 0.0
    return float(np.mean([f.flagged for f in flags]))
