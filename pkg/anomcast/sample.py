"""Seeded synthetic dataset: AR(1) returns with one-day shocks, and correlated sentiment."""

import logging
import os

import numpy as np
import pandas as pd
import yaml

from .core.series import PriceSeries, SentimentSeries, write_prices
from .core.utility import atomic_write
from .sentiment import save_scores

logger = logging.getLogger(__name__)

SAMPLE_SYMBOLS = (
    ("UAL", "Airlines"),
    ("AAL", "Airlines"),
    ("DAL", "Airlines"),
    ("AAPL", "Consumer Electronics"),
    ("IRBT", "Consumer Electronics"),
    ("TSLA", "Auto Manufactures"),
    ("GM", "Auto Manufactures"),
    ("JPM", "Banks"),
    ("BAC", "Banks"),
    ("MSFT", "Software-Infrastructure"),
)

PHI = 0.1
SIGMA = 0.012
BOUND = 0.05
SHOCK_SIGMAS = 6.0
SHOCKS_PER_YEAR = 10
NO_COMMENT_SHARE = 1.0 / 3.0


def simulate_returns(rng, n, shocks_per_year=SHOCKS_PER_YEAR, days_per_year=252):
    """ AR(1) daily returns bounded by 5%, plus one-day shocks of 6 sigma

    Returns:
        tuple: (returns, boolean shock mask)
    """
    returns = np.zeros(n)
    for t in range(1, n):
        returns[t] = PHI * returns[t - 1] + SIGMA * rng.standard_normal()
    returns = np.clip(returns, -BOUND, BOUND)
    n_shocks = max(1, int(round(shocks_per_year * n / days_per_year)))
    candidates = np.arange(10, n - 10, 5)
    shock_days = rng.choice(candidates, size=min(n_shocks, len(candidates)), replace=False)
    shocks = np.zeros(n, dtype=bool)
    shocks[shock_days] = True
    returns[shocks] = SHOCK_SIGMAS * SIGMA * rng.choice([-1.0, 1.0], size=shocks.sum())
    return returns, shocks


def simulate_sentiment(rng, returns):
    """ Scores following the sign of the day's return, 0 on days without comments """
    latent = 0.6 * returns / SIGMA + 0.4 * rng.standard_normal(len(returns))
    scores = np.round(np.tanh(latent), 3)
    scores[rng.random(len(returns)) < NO_COMMENT_SHARE] = 0.0
    return scores


def generate_sample(out_dir, seed=0, symbols=5, years=(2017, 2018, 2019)):
    """ Writes prices/, sentiment/ and config.yaml under ``out_dir``

    Args:
        out_dir (str): destination directory
        seed (int): random seed
        symbols (int): number of symbols, at most 10
        years (tuple of int): training year then the two detect years

    Returns:
        str: path of the written config.yaml
    """
    assert 1 <= symbols <= len(SAMPLE_SYMBOLS), """symbols must lie in [1, {0}]""".format(len(SAMPLE_SYMBOLS))
    assert len(years) == 3, """need a training year and two detect years"""
    rng = np.random.default_rng(seed)
    dates = [d.date() for d in pd.bdate_range("{0}-01-01".format(years[0]), "{0}-12-31".format(years[-1]))]
    chosen = SAMPLE_SYMBOLS[:symbols]
    for symbol, industry in chosen:
        returns, shocks = simulate_returns(rng, len(dates))
        start = rng.uniform(20.0, 300.0)
        prices = np.round(start * np.cumprod(1.0 + returns), 6)
        write_prices(PriceSeries(symbol, dates, prices, industry=industry), os.path.join(out_dir, "prices", symbol + ".csv"))
        scores = simulate_sentiment(rng, returns)
        commented = scores != 0.0
        save_scores(
            SentimentSeries(symbol, [d for d, keep in zip(dates, commented) if keep], scores[commented]),
            os.path.join(out_dir, "sentiment", symbol + ".csv"),
        )
        logger.debug("%s: %d days, %d shocks", symbol, len(dates), int(shocks.sum()))

    config = {
        "experiment": {
            "seed": int(seed),
            "training_year": int(years[0]),
            "fallback_year": None,
            "detect_years": [int(years[1]), int(years[2])],
        },
        "paths": {"prices": "prices", "sentiments": "sentiment", "out": "results"},
        "symbols": {s: i for s, i in chosen},
    }
    path = os.path.join(out_dir, "config.yaml")
    atomic_write(path, yaml.safe_dump(config, sort_keys=False))
    logger.info("wrote a %d-symbol sample to %s", len(chosen), out_dir)
    return path
