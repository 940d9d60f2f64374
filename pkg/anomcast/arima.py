"""Univariate ARIMA(p, d, q) by conditional sum of squares.

The differenced series ``w`` follows

    w_t = c + phi_1 w_{t-1} + ... + phi_p w_{t-p} + e_t + theta_1 e_{t-1} + ... + theta_q e_{t-q}

The first ``p`` values of ``w`` are conditioned on and pre-sample innovations are 0.
Coefficients are found with a multi-start Nelder-Mead simplex on the standardised
series, then mapped back to the original scale.
"""

import itertools
import json
import logging
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize
from scipy.signal import lfilter
from tqdm import tqdm

from .core.exceptions import (
    AnomcastError,
    DegenerateInputError,
    InsufficientHistoryError,
    NonConvergenceError,
    OrderSelectionError,
)

logger = logging.getLogger(__name__)

STARTS = (0.0, 0.1, -0.1)
ROOT_MARGIN = 0.05
MIN_SELECT_LENGTH = 30
_PENALTY = 1e100


# %% TYPES


@dataclass(frozen=True, order=True)
class ArimaOrder:
    p: int
    d: int
    q: int

    def __post_init__(self):
        assert min(self.p, self.d, self.q) >= 0, """orders must be non-negative"""

    @property
    def total(self):
        return self.p + self.d + self.q

    @property
    def n_params(self):
        return self.p + self.q + 1

    def __str__(self):
        return "({0},{1},{2})".format(self.p, self.d, self.q)


@dataclass(frozen=True)
class ArimaModel:
    order: ArimaOrder
    ar_coeffs: Tuple[float, ...]
    ma_coeffs: Tuple[float, ...]
    intercept: float
    sigma2: float
    loglik: float = float("nan")
    aic: float = float("nan")
    n_obs: int = field(default=0, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "ar_coeffs", tuple(float(v) for v in self.ar_coeffs))
        object.__setattr__(self, "ma_coeffs", tuple(float(v) for v in self.ma_coeffs))
        assert len(self.ar_coeffs) == self.order.p, """need p AR coefficients"""
        assert len(self.ma_coeffs) == self.order.q, """need q MA coefficients"""
        assert self.sigma2 > 0, """innovation variance must be positive"""

    @property
    def warmup(self):
        """ Observations consumed before the first one-step residual """
        return self.order.d + self.order.p

    def to_json(self):
        return json.dumps(
            {
                "order": {"p": self.order.p, "d": self.order.d, "q": self.order.q},
                "ar": list(self.ar_coeffs),
                "ma": list(self.ma_coeffs),
                "intercept": self.intercept,
                "sigma2": self.sigma2,
                "aic": self.aic,
                "loglik": self.loglik,
            },
            indent=2,
        )

    @classmethod
    def from_json(cls, text):
        doc = json.loads(text)
        return cls(
            order=ArimaOrder(**doc["order"]),
            ar_coeffs=doc["ar"],
            ma_coeffs=doc["ma"],
            intercept=doc["intercept"],
            sigma2=doc["sigma2"],
            loglik=doc.get("loglik", float("nan")),
            aic=doc["aic"],
        )


# %% RECURSIONS


def difference(series, d):
    """ Applies the first-difference operator ``d`` times

    Raises:
        InsufficientHistoryError: ``len(series) <= d``
    """
    series = np.asarray(series, dtype=np.float64)
    if len(series) <= d:
        raise InsufficientHistoryError("cannot difference {0} points {1} times".format(len(series), d))
    return np.diff(series, n=d) if d > 0 else series.copy()


def innovations(w, intercept, ar, ma):
    """ CSS innovations ``e_t`` for ``t >= p`` of an ARMA recursion on ``w`` """
    p = len(ar)
    u = w[p:] - intercept
    for i, phi in enumerate(ar, start=1):
        u = u - phi * w[p - i : len(w) - i]
    if len(ma):
        return lfilter([1.0], np.r_[1.0, ma], u)
    return u


def is_stationary(ar, margin=0.0):
    """ True when every root of ``1 - phi_1 z - ... - phi_p z^p`` has modulus > 1 + margin """
    if not len(ar):
        return True
    roots = np.roots(np.r_[-np.asarray(ar, dtype=np.float64)[::-1], 1.0])
    return bool(len(roots) == 0 or np.min(np.abs(roots)) > 1.0 + margin)


def _split(theta, p, q):
    return theta[0], theta[1 : 1 + p], theta[1 + p : 1 + p + q]


def _nelder_mead(objective, x0, step=0.1):
    k = len(x0)
    simplex = np.vstack([x0, x0 + step * np.eye(k)])
    return minimize(
        objective,
        x0,
        method="Nelder-Mead",
        options={"initial_simplex": simplex, "xatol": 1e-7, "fatol": 1e-10, "maxiter": 1500 * k, "maxfev": 3000 * k},
    )


def multistart(objective, k, starts=STARTS):
    """ Runs the simplex from each start vector; returns (best converged, best overall) results """
    results = []
    for value in starts:
        x0 = np.full(k, value, dtype=np.float64)
        results.append(_nelder_mead(objective, x0))
    converged = [r for r in results if r.success and np.isfinite(r.fun)]
    best_converged = min(converged, key=lambda r: r.fun) if converged else None
    best = min(results, key=lambda r: r.fun)
    return best_converged, best


# %% ESTIMATION


def fit_arima(series, order, root_margin=ROOT_MARGIN, skip=0):
    """ Fits ARIMA(p, d, q) by conditional sum of squares

    Args:
        series (sequence of float): observations
        order (ArimaOrder): (p, d, q)
        root_margin (float): AR roots must have modulus above ``1 + root_margin``
        skip (int): leading innovations left out of the objective, so that orders
            with different ``d + p`` can be scored on the same observations

    Returns:
        ArimaModel: coefficients, ``sigma2 = SSE / n_effective``, Gaussian CSS loglik and AIC

    Raises:
        DegenerateInputError: the differenced series has zero variance
        NonConvergenceError: no start converged, or the fit is not stationary
    """
    p, d, q = order.p, order.d, order.q
    assert skip >= 0, """skip must be non-negative"""
    w = difference(series, d)
    n_eff = len(w) - p - skip
    if n_eff <= order.n_params:
        raise InsufficientHistoryError("{0} observations are too few for ARIMA{1}".format(len(w), order))
    mean = float(np.mean(w))
    scale = float(np.std(w))
    if not np.isfinite(scale) or scale <= np.finfo(np.float64).eps * max(1.0, abs(mean)):
        raise DegenerateInputError("differenced series has zero variance for ARIMA{0}".format(order))
    z = (w - mean) / scale

    def objective(theta):
        c, ar, ma = _split(theta, p, q)
        with np.errstate(all="ignore"):
            e = innovations(z, c, ar, ma)[skip:]
            sse = float(np.dot(e, e))
        return sse if np.isfinite(sse) else _PENALTY

    best_converged, best = multistart(objective, order.n_params)

    def to_model(result):
        c, ar, ma = _split(result.x, p, q)
        sse = scale ** 2 * result.fun
        sigma2 = sse / n_eff
        if not sigma2 > 0:
            raise DegenerateInputError("ARIMA{0} reproduces the series exactly".format(order))
        loglik = -0.5 * n_eff * (np.log(2.0 * np.pi * sigma2) + 1.0)
        return ArimaModel(
            order=order,
            ar_coeffs=ar,
            ma_coeffs=ma,
            intercept=scale * c + mean * (1.0 - float(np.sum(ar))),
            sigma2=sigma2,
            loglik=float(loglik),
            aic=float(-2.0 * loglik + 2.0 * order.n_params),
            n_obs=n_eff,
        )

    if best_converged is None:
        raise NonConvergenceError("ARIMA{0}: simplex did not converge".format(order), best=to_model(best))
    model = to_model(best_converged)
    if not is_stationary(model.ar_coeffs, root_margin):
        raise NonConvergenceError("ARIMA{0}: AR polynomial is not stationary".format(order), best=model)
    return model


def candidate_orders(max_sum=3):
    """ Every (p, d, q) with ``1 <= p + d + q <= max_sum``, in tie-break order """
    orders = [
        ArimaOrder(p, d, q)
        for p, d, q in itertools.product(range(max_sum + 1), repeat=3)
        if 1 <= p + d + q <= max_sum
    ]
    return sorted(orders, key=lambda o: (o.total, o.d, o.p, o.q))


def _select(series, max_sum, root_margin, progress):
    """ Exhaustive AIC search over the bounded (p, d, q) grid, returning the winning fit

    Every candidate is scored on the innovations from observation ``max_sum`` on, so
    AICs share one sample. Ties on AIC go to the smaller ``p + d + q``, then smaller
    ``d``, then smaller ``p``.

    Raises:
        DegenerateInputError: every candidate failed because the data is degenerate
        OrderSelectionError: every candidate failed, with per-order reasons
    """
    series = np.asarray(series, dtype=np.float64)
    if len(series) < MIN_SELECT_LENGTH:
        raise InsufficientHistoryError("order selection needs >= {0} points".format(MIN_SELECT_LENGTH))
    fitted: Dict[ArimaOrder, ArimaModel] = {}
    failures: Dict[ArimaOrder, str] = {}
    degenerate = True
    for order in tqdm(candidate_orders(max_sum), desc="ARIMA orders", unit="fit", disable=not progress, leave=False):
        try:
            fitted[order] = fit_arima(series, order, root_margin, skip=max_sum - order.d - order.p)
        except AnomcastError as e:
            failures[order] = str(e)
            degenerate = degenerate and isinstance(e, DegenerateInputError)
            logger.debug("ARIMA%s failed: %s", order, e)
    if not fitted:
        if degenerate:
            raise DegenerateInputError("every ARIMA candidate met degenerate data")
        raise OrderSelectionError("no ARIMA order could be fitted", failures={str(k): v for k, v in failures.items()})
    best = min(fitted.values(), key=lambda m: (m.aic, m.order.total, m.order.d, m.order.p))
    logger.debug("selected ARIMA%s (aic=%.3f)", best.order, best.aic)
    return best


def select_order(series, max_sum=3, root_margin=ROOT_MARGIN, progress=False):
    return _select(series, max_sum, root_margin, progress).order


def select_and_fit(series, max_sum=3, root_margin=ROOT_MARGIN, progress=False):
    """ Selects the order, then refits it on every observation

    A refit that does not converge inside the root margin is replaced by the model
    scored during selection.
    """
    selected = _select(series, max_sum, root_margin, progress)
    try:
        return fit_arima(series, selected.order, root_margin)
    except NonConvergenceError as e:
        logger.info("ARIMA%s refit failed (%s), keeping the selection fit", selected.order, e)
        return selected


def detection_fit(prices, training_year, fallback_year=None, max_sum=3, root_margin=ROOT_MARGIN):
    """ Fits the detection model on one calendar year of prices

    Falls back to ``fallback_year`` when the training year is degenerate.

    Args:
        prices (PriceSeries): full price history
        training_year (int): preferred training year
        fallback_year (int, optional): year used when the preferred one is degenerate

    Returns:
        tuple: (ArimaModel, year actually used)
    """
    try:
        return select_and_fit(prices.years(training_year).values, max_sum, root_margin), training_year
    except DegenerateInputError as e:
        if fallback_year is None:
            raise
        logger.warning("%s: %d is degenerate (%s), refitting on %d", prices.symbol, training_year, e, fallback_year)
    return select_and_fit(prices.years(fallback_year).values, max_sum, root_margin), fallback_year


# %% PREDICTION


def forecast(model, history, h):
    """ Recursive h-step forecast with future innovations set to 0

    Args:
        model (ArimaModel): fitted model
        history (sequence of float): observations, at least ``p + d + q`` of them
        h (int): horizon, > 0

    Returns:
        numpy.ndarray: ``h`` forecasts on the original (undifferenced) scale
    """
    assert h > 0, """horizon must be positive"""
    p, d, q = model.order.p, model.order.d, model.order.q
    history = np.asarray(history, dtype=np.float64)
    if len(history) < max(model.order.total, d + 1):
        raise InsufficientHistoryError("forecast needs >= {0} observations".format(model.order.total))
    levels = [history]
    for _ in range(d):
        levels.append(np.diff(levels[-1]))
    w = levels[-1]
    n = len(w)
    e = np.zeros(n)
    if n > p:
        e[p:] = innovations(w, model.intercept, model.ar_coeffs, model.ma_coeffs)
    w_ext = np.r_[w, np.zeros(h)]
    e_ext = np.r_[e, np.zeros(h)]
    for t in range(n, n + h):
        pred = model.intercept
        for i, phi in enumerate(model.ar_coeffs, start=1):
            pred += phi * w_ext[t - i] if t - i >= 0 else 0.0
        for j, theta in enumerate(model.ma_coeffs, start=1):
            pred += theta * e_ext[t - j] if t - j >= 0 else 0.0
        w_ext[t] = pred
    f = w_ext[n:]
    for level in reversed(levels[:-1]):
        f = level[-1] + np.cumsum(f)
    return f


def one_step_residuals(model, series):
    """ Rolling one-step residuals with the fitted coefficients held fixed

    Residual ``t`` is ``series[t]`` minus the one-step prediction from data through
    ``t - 1``. The first ``d + p`` observations are warm-up.

    Returns:
        numpy.ndarray: residuals aligned with ``series[d + p:]``
    """
    series = np.asarray(series, dtype=np.float64)
    if len(series) <= model.order.total or len(series) <= model.warmup:
        raise InsufficientHistoryError("residuals need more than {0} observations".format(model.order.total))
    w = difference(series, model.order.d)
    return innovations(w, model.intercept, model.ar_coeffs, model.ma_coeffs)


def studentize(residuals):
    """ Residuals divided by their sample standard deviation (n - 1 denominator)

    Raises:
        DegenerateInputError: zero standard deviation
    """
    residuals = np.asarray(residuals, dtype=np.float64)
    if len(residuals) < 3:
        raise InsufficientHistoryError("studentizing needs >= 3 residuals")
    sd = float(np.std(residuals, ddof=1))
    if not sd > 1e-12 * float(np.max(np.abs(residuals))):
        raise DegenerateInputError("residuals have zero standard deviation")
    return residuals / sd
