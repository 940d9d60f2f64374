"""Seasonal ARIMA with one exogenous sentiment regressor, fitted on anomaly windows.

With lag polynomials in the backshift operator ``B``

    phi(B) Phi(B^s) (1 - B)^d (1 - B^s)^D y_t = c + beta x_t + theta(B) Theta(B^s) e_t

where ``y`` are daily returns, ``x`` sentiment scores and ``s = 7``. Windows are
not contiguous in time, so each one is conditioned on its own: observations and
innovations before a window's first day are 0. Under that convention windows are
exchangeable and the training objective is the sum of per-window squared
innovations.
"""

import itertools
import json
import logging
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial import polynomial as P
from scipy.signal import lfilter
from tqdm import tqdm

from .arima import _PENALTY, multistart
from .core.exceptions import (
    AnomcastError,
    DegenerateInputError,
    InsufficientHistoryError,
    NonConvergenceError,
    OrderSelectionError,
)
from .core.series import N_CONDITIONING, N_HORIZON
from .core.utility import exog_policies

logger = logging.getLogger(__name__)

SEASON = 7
MIN_WINDOWS = 5


# %% TYPES


@dataclass(frozen=True)
class SarimaxOrder:
    p: int = 0
    d: int = 0
    q: int = 0
    P: int = 0
    D: int = 0
    Q: int = 0
    s: int = SEASON

    def __post_init__(self):
        assert min(self.p, self.d, self.q, self.P, self.D, self.Q) >= 0, """orders must be non-negative"""
        assert self.s == SEASON, """the seasonal period is fixed at {0}""".format(SEASON)

    @property
    def total(self):
        return self.p + self.d + self.q

    @property
    def seasonal_total(self):
        return self.P + self.D + self.Q

    @property
    def n_params(self):
        # intercept and beta on top of the lag coefficients
        return self.p + self.q + self.P + self.Q + 2

    @property
    def max_lag(self):
        return self.p + self.s * self.P + self.d + self.s * self.D

    @property
    def max_ma_lag(self):
        return self.q + self.s * self.Q

    def sort_key(self):
        return (self.total, self.d, self.p, self.q, self.seasonal_total, self.D, self.P, self.Q)

    def __str__(self):
        return "({0},{1},{2})({3},{4},{5})_{6}".format(self.p, self.d, self.q, self.P, self.D, self.Q, self.s)


@dataclass(frozen=True)
class SarimaxModel:
    order: SarimaxOrder
    ar: Tuple[float, ...] = ()
    ma: Tuple[float, ...] = ()
    seasonal_ar: Tuple[float, ...] = ()
    seasonal_ma: Tuple[float, ...] = ()
    beta: float = 0.0
    intercept: float = 0.0
    sigma2: float = 1.0
    aic: float = float("nan")
    n_obs: int = field(default=0, compare=False)

    def __post_init__(self):
        for name, size in (("ar", self.order.p), ("ma", self.order.q), ("seasonal_ar", self.order.P), ("seasonal_ma", self.order.Q)):
            value = tuple(float(v) for v in getattr(self, name))
            assert len(value) == size, """{0} needs {1} coefficients""".format(name, size)
            object.__setattr__(self, name, value)
        assert self.sigma2 > 0, """innovation variance must be positive"""

    def polynomials(self):
        """ (AR, MA, differencing) lag polynomials, ascending powers of B """
        return _polynomials(self.order, self.ar, self.ma, self.seasonal_ar, self.seasonal_ma)

    def to_json(self):
        o = self.order
        return json.dumps(
            {
                "order": {"p": o.p, "d": o.d, "q": o.q, "P": o.P, "D": o.D, "Q": o.Q, "s": o.s},
                "ar": list(self.ar),
                "ma": list(self.ma),
                "sar": list(self.seasonal_ar),
                "sma": list(self.seasonal_ma),
                "beta": self.beta,
                "intercept": self.intercept,
                "sigma2": self.sigma2,
                "aic": self.aic,
            },
            indent=2,
        )

    @classmethod
    def from_json(cls, text):
        doc = json.loads(text)
        return cls(
            order=SarimaxOrder(**doc["order"]),
            ar=doc["ar"],
            ma=doc["ma"],
            seasonal_ar=doc["sar"],
            seasonal_ma=doc["sma"],
            beta=doc["beta"],
            intercept=doc["intercept"],
            sigma2=doc["sigma2"],
            aic=doc["aic"],
        )


# %% POLYNOMIALS


def _seasonal(coeffs, s, sign):
    poly = np.zeros(s * len(coeffs) + 1)
    poly[0] = 1.0
    for k, c in enumerate(coeffs, start=1):
        poly[s * k] = sign * c
    return poly


def _polynomials(order, ar, ma, sar, sma):
    ar_poly = P.polymul(np.r_[1.0, -np.asarray(ar, dtype=np.float64)], _seasonal(sar, order.s, -1.0))
    ma_poly = P.polymul(np.r_[1.0, np.asarray(ma, dtype=np.float64)], _seasonal(sma, order.s, 1.0))
    diff_poly = np.array([1.0])
    for _ in range(order.d):
        diff_poly = P.polymul(diff_poly, [1.0, -1.0])
    seasonal_diff = np.zeros(order.s + 1)
    seasonal_diff[0], seasonal_diff[-1] = 1.0, -1.0
    for _ in range(order.D):
        diff_poly = P.polymul(diff_poly, seasonal_diff)
    return ar_poly, ma_poly, diff_poly


def _window_innovations(Y, X, intercept, beta, polys):
    """ Innovations of every window (rows of Y, X) with zero pre-window state """
    ar_poly, ma_poly, diff_poly = polys
    W = lfilter(diff_poly, [1.0], Y, axis=1)
    U = lfilter(ar_poly, [1.0], W, axis=1) - intercept - beta * X
    if len(ma_poly) > 1:
        return lfilter([1.0], ma_poly, U, axis=1)
    return U


def _stack(windows):
    Y = np.array([w.returns for w in windows], dtype=np.float64).reshape(len(windows), -1)
    X = np.array([w.sentiments for w in windows], dtype=np.float64).reshape(len(windows), -1)
    return Y, X


def _unpack(theta, order):
    p, q, Ps, Qs = order.p, order.q, order.P, order.Q
    c, beta = theta[0], theta[1]
    i = 2
    ar = theta[i : i + p]
    i += p
    ma = theta[i : i + q]
    i += q
    sar = theta[i : i + Ps]
    i += Ps
    sma = theta[i : i + Qs]
    return c, beta, ar, ma, sar, sma


# %% OPERATIONS


def sarimax_one_step(model, history_y, history_eps, x_t):
    """ Conditional expectation of ``y_t`` given the past and ``x_t`` (with ``e_t = 0``)

    Args:
        model (SarimaxModel): coefficients
        history_y (sequence of float): past observations, at least ``p + s P + d + s D``
        history_eps (sequence of float): past innovations; missing lags count as 0
        x_t (float): exogenous value at ``t``

    Returns:
        float: one-step prediction
    """
    ar_poly, ma_poly, diff_poly = model.polynomials()
    lag = model.order.max_lag
    y = np.asarray(history_y, dtype=np.float64)
    eps = np.asarray(history_eps, dtype=np.float64)
    n, m = len(y), len(eps)
    if n < lag:
        raise InsufficientHistoryError("need {0} past observations, got {1}".format(lag, n))

    def w_lag(i):
        return sum(diff_poly[k] * y[n - i - k] for k in range(len(diff_poly)) if diff_poly[k] != 0.0)

    w_hat = model.intercept + model.beta * x_t
    for i in range(1, len(ar_poly)):
        if ar_poly[i] != 0.0:
            w_hat -= ar_poly[i] * w_lag(i)
    for j in range(1, len(ma_poly)):
        if ma_poly[j] != 0.0 and j <= m:
            w_hat += ma_poly[j] * eps[m - j]
    y_hat = w_hat
    for k in range(1, len(diff_poly)):
        if diff_poly[k] != 0.0:
            y_hat -= diff_poly[k] * y[n - k]
    return float(y_hat)


def window_sse(model, windows):
    """ Total squared innovation over windows, each conditioned on its own """
    Y, X = _stack(windows)
    E = _window_innovations(Y, X, model.intercept, model.beta, model.polynomials())
    return float(np.sum(E * E))


def fit_sarimax(training_windows, order):
    """ Fits SARIMAX by conditional sum of squares over stacked windows

    Args:
        training_windows (list of AnomalyWindow): at least 5 windows; returns are ``y``,
            sentiment scores are ``x``
        order (SarimaxOrder): lag orders

    Returns:
        SarimaxModel

    Raises:
        DegenerateInputError: all returns are zero
        InsufficientHistoryError: too few windows or observations for the differencing
        NonConvergenceError: no start converged (``best`` carries the best model found)
    """
    windows = list(training_windows)
    if len(windows) < MIN_WINDOWS:
        raise InsufficientHistoryError("SARIMAX needs >= {0} windows, got {1}".format(MIN_WINDOWS, len(windows)))
    Y, X = _stack(windows)
    n_eff = Y.size
    if n_eff < order.d + order.s * order.D + 1 or n_eff <= order.n_params:
        raise InsufficientHistoryError("{0} observations are too few for SARIMAX{1}".format(n_eff, order))
    scale = float(np.sqrt(np.mean(Y * Y)))
    if not scale > 0:
        raise DegenerateInputError("training returns are all zero")
    Ys = Y / scale

    def objective(theta):
        c, beta, ar, ma, sar, sma = _unpack(theta, order)
        with np.errstate(all="ignore"):
            E = _window_innovations(Ys, X, c, beta, _polynomials(order, ar, ma, sar, sma))
            sse = float(np.sum(E * E))
        return sse if np.isfinite(sse) else _PENALTY

    best_converged, best = multistart(objective, order.n_params)

    def to_model(result):
        c, beta, ar, ma, sar, sma = _unpack(result.x, order)
        sigma2 = scale ** 2 * result.fun / n_eff
        if not sigma2 > 0:
            raise DegenerateInputError("SARIMAX{0} reproduces the returns exactly".format(order))
        loglik = -0.5 * n_eff * (np.log(2.0 * np.pi * sigma2) + 1.0)
        return SarimaxModel(
            order=order,
            ar=ar,
            ma=ma,
            seasonal_ar=sar,
            seasonal_ma=sma,
            beta=scale * beta,
            intercept=scale * c,
            sigma2=sigma2,
            aic=float(-2.0 * loglik + 2.0 * order.n_params),
            n_obs=n_eff,
        )

    if best_converged is None:
        raise NonConvergenceError("SARIMAX{0}: simplex did not converge".format(order), best=to_model(best))
    return to_model(best_converged)


def candidate_orders(max_sum=3, max_seasonal_sum=2):
    nonseasonal = [o for o in itertools.product(range(max_sum + 1), repeat=3) if sum(o) <= max_sum]
    seasonal = [o for o in itertools.product(range(max_seasonal_sum + 1), repeat=3) if sum(o) <= max_seasonal_sum]
    orders = [SarimaxOrder(p, d, q, Ps, Ds, Qs) for (p, d, q), (Ps, Ds, Qs) in itertools.product(nonseasonal, seasonal)]
    return sorted(orders, key=SarimaxOrder.sort_key)


def select_sarimax_order(training_windows, max_sum=3, max_seasonal_sum=2, progress=False):
    """ Minimum-AIC order over the bounded grid (``p+d+q <= max_sum``, ``P+D+Q <= max_seasonal_sum``)

    Candidates that cannot be fitted (too few observations, non-convergence, an exact
    fit) are skipped. Ties go to the smaller non-seasonal order, then the smaller seasonal one.

    Raises:
        DegenerateInputError: every candidate failed because the data is degenerate
        OrderSelectionError: every candidate failed, with per-order reasons
    """
    windows = list(training_windows)
    fitted: Dict[SarimaxOrder, SarimaxModel] = {}
    failures: Dict[str, str] = {}
    degenerate = True
    candidates = candidate_orders(max_sum, max_seasonal_sum)
    for order in tqdm(candidates, desc="SARIMAX orders", unit="fit", disable=not progress, leave=False):
        try:
            fitted[order] = fit_sarimax(windows, order)
        except AnomcastError as e:
            failures[str(order)] = str(e)
            degenerate = degenerate and isinstance(e, DegenerateInputError)
            logger.debug("SARIMAX%s skipped: %s", order, e)
    if not fitted:
        if degenerate:
            raise DegenerateInputError("every SARIMAX candidate met degenerate data")
        raise OrderSelectionError("no SARIMAX order could be fitted", failures=failures)
    best = min(fitted.values(), key=lambda m: (m.aic,) + m.order.sort_key())
    logger.debug("selected SARIMAX%s (aic=%.3f) out of %d candidates", best.order, best.aic, len(candidates))
    return best.order


def select_and_fit(training_windows, max_sum=3, max_seasonal_sum=2, progress=False):
    windows = list(training_windows)
    order = select_sarimax_order(windows, max_sum, max_seasonal_sum, progress)
    return fit_sarimax(windows, order)


def future_exog(policy, sentiments, oracle=None, h=N_HORIZON):
    """ Sentiment values fed to the forecast steps

    Args:
        policy (str): ``zero``, ``hold-last`` or ``oracle``
        sentiments (sequence of float): observed conditioning sentiments
        oracle (sequence of float, optional): the true future sentiments (``oracle`` only)
    """
    exog_policies.check(policy)
    policy = exog_policies.default(policy)
    if policy == exog_policies.zero:
        return [0.0] * h
    if policy == exog_policies.hold_last:
        return [float(sentiments[-1])] * h
    assert oracle is not None and len(oracle) == h, """oracle policy needs the {0} future sentiments""".format(h)
    return [float(v) for v in oracle]


def forecast_window(model, returns, sentiments, exog_policy=exog_policies.hold_last, future_sentiments=None):
    """ Forecasts the returns of the 3 days after the outlier day

    The window's 4 observed days are run through the model from a zero pre-window
    state, as in fitting; future innovations are 0.

    Args:
        model (SarimaxModel): fitted model
        returns (sequence of float): the 4 conditioning returns
        sentiments (sequence of float): the 4 conditioning sentiments
        exog_policy (str): how future sentiment is supplied (``zero``, ``hold-last``, ``oracle``)
        future_sentiments (sequence of float, optional): true future sentiments for ``oracle``

    Returns:
        list of float: 3 forecast returns
    """
    assert len(returns) == N_CONDITIONING and len(sentiments) == N_CONDITIONING, (
        """a window forecast needs exactly {0} conditioning days""".format(N_CONDITIONING)
    )
    returns = np.asarray(returns, dtype=np.float64)
    sentiments = np.asarray(sentiments, dtype=np.float64)
    E = _window_innovations(returns[None, :], sentiments[None, :], model.intercept, model.beta, model.polynomials())
    y = np.r_[np.zeros(model.order.max_lag), returns].tolist()
    eps = np.r_[np.zeros(model.order.max_ma_lag), E[0]].tolist()
    out = []
    for x_t in future_exog(exog_policy, sentiments, future_sentiments):
        y_hat = sarimax_one_step(model, y, eps, x_t)
        out.append(y_hat)
        y.append(y_hat)
        eps.append(0.0)
    return out
