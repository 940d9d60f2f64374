# %%
import os

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from anomcast.arima import (
    ArimaModel,
    ArimaOrder,
    candidate_orders,
    detection_fit,
    difference,
    fit_arima,
    forecast,
    is_stationary,
    one_step_residuals,
    select_and_fit,
    select_order,
    studentize,
)
from anomcast import arima
from anomcast.core.exceptions import DegenerateInputError, InsufficientHistoryError, NonConvergenceError
from anomcast.core.series import read_prices
from anomcast.sample import generate_sample


def ar1(phi, n, seed, sigma=1.0, burn=100):
    rng = np.random.default_rng(seed)
    e = sigma * rng.standard_normal(n + burn)
    y = np.zeros(n + burn)
    for t in range(1, n + burn):
        y[t] = phi * y[t - 1] + e[t]
    return y[burn:]


def model(p=0, d=0, q=0, ar=(), ma=(), intercept=0.0):
    return ArimaModel(ArimaOrder(p, d, q), ar, ma, intercept, sigma2=1.0)


# %% DIFFERENCING


def test_difference():
    assert_array_equal(difference([1, 2, 4, 7], 1), [1, 2, 3])
    assert_array_equal(difference([1, 2, 4, 7], 2), [1, 1])
    assert_array_equal(difference([3.5, -1.0, 2.0], 0), [3.5, -1.0, 2.0])
    with pytest.raises(InsufficientHistoryError):
        difference([1, 2], 2)


def test_cumulative_sums_undo_differencing():
    y = 40.0 + np.cumsum(np.random.default_rng(4).standard_normal(50))
    for d in range(1, 4):
        level = difference(y, d)
        for k in reversed(range(d)):
            first = difference(y, k)[0]
            level = np.r_[first, first + np.cumsum(level)]
        assert_allclose(level, y, atol=1e-9)


def test_is_stationary():
    assert is_stationary([0.5])
    assert not is_stationary([1.0])
    assert not is_stationary([0.97], margin=0.05)
    assert is_stationary([])


# %% ESTIMATION


def test_ar1_coefficient_recovery_over_seeds():
    hits = 0
    for seed in range(20):
        fitted = fit_arima(ar1(0.6, 500, seed), ArimaOrder(1, 0, 0))
        hits += abs(fitted.ar_coeffs[0] - 0.6) <= 0.1
    assert hits >= 16


def test_fit_reports_variance_and_aic():
    fitted = fit_arima(ar1(0.6, 500, 3), ArimaOrder(1, 0, 0))
    assert 0.8 < fitted.sigma2 < 1.2
    assert fitted.n_obs == 499
    assert_allclose(fitted.aic, -2.0 * fitted.loglik + 2.0 * 2)


def test_white_noise_gives_small_coefficients():
    noise = np.random.default_rng(7).standard_normal(500)
    assert abs(fit_arima(noise, ArimaOrder(1, 0, 0)).ar_coeffs[0]) < 0.15
    assert abs(fit_arima(noise, ArimaOrder(0, 0, 1)).ma_coeffs[0]) < 0.15


def test_fit_recovers_scale_and_intercept():
    y = 50.0 + 10.0 * ar1(0.6, 500, 11)
    fitted = fit_arima(y, ArimaOrder(1, 0, 0))
    assert abs(fitted.ar_coeffs[0] - 0.6) < 0.1
    assert abs(fitted.intercept / (1.0 - fitted.ar_coeffs[0]) - 50.0) < 4.0
    assert 80.0 < fitted.sigma2 < 120.0


def test_constant_series_is_degenerate():
    with pytest.raises(DegenerateInputError):
        fit_arima(np.full(100, 3.0), ArimaOrder(1, 0, 0))


# %% ORDER SELECTION


def test_candidate_orders():
    assert set(candidate_orders(1)) == {ArimaOrder(1, 0, 0), ArimaOrder(0, 1, 0), ArimaOrder(0, 0, 1)}
    orders = candidate_orders(3)
    assert ArimaOrder(0, 0, 0) not in orders
    assert all(o.total <= 3 for o in orders)
    assert orders == sorted(orders, key=lambda o: (o.total, o.d, o.p, o.q))


def test_select_order_prefers_ar_term():
    order = select_order(ar1(0.7, 500, 1))
    assert order.p >= 1
    assert order.d == 0


def test_select_order_differences_a_random_walk():
    walk = np.cumsum(np.random.default_rng(2).standard_normal(500))
    assert select_order(walk).d >= 1


@pytest.mark.slow
def test_aic_recovers_the_true_order_in_most_seeds():
    hits = sum(select_order(ar1(0.6, 500, seed)) == ArimaOrder(1, 0, 0) for seed in range(30))
    assert hits > 15


def test_select_order_needs_history():
    with pytest.raises(InsufficientHistoryError):
        select_order(np.arange(10.0))


def test_select_order_on_constant_series():
    with pytest.raises(DegenerateInputError):
        select_order(np.full(60, 1.0))


def test_failed_refit_keeps_the_selection_fit(monkeypatch):
    fit = arima.fit_arima
    n_candidates = len(candidate_orders(3))
    calls = []

    def refit_fails(series, order, root_margin=arima.ROOT_MARGIN, skip=0):
        calls.append(order)
        if len(calls) > n_candidates:
            raise NonConvergenceError("ARIMA{0}: AR polynomial is not stationary".format(order))
        return fit(series, order, root_margin, skip)

    y = ar1(0.7, 300, 6)
    expected = select_order(y)
    monkeypatch.setattr(arima, "fit_arima", refit_fails)
    fitted = select_and_fit(y)
    assert len(calls) == n_candidates + 1
    assert fitted.order == expected
    assert is_stationary(fitted.ar_coeffs, arima.ROOT_MARGIN)


def test_detection_fit_near_the_root_margin(tmp_path):
    config = generate_sample(str(tmp_path), seed=0, symbols=5)
    prices = read_prices(os.path.join(os.path.dirname(config), "prices", "IRBT.csv"), "IRBT")
    fitted, year = detection_fit(prices, 2017)
    assert year == 2017
    assert fitted.order == select_order(prices.years(2017).values)
    assert is_stationary(fitted.ar_coeffs, 0.05)


# %% FORECAST AND RESIDUALS


def test_forecast_mean_model():
    assert_allclose(forecast(model(intercept=5.0), [1.0, 2.0, 3.0], 3), [5.0, 5.0, 5.0])


def test_forecast_ar1_by_hand():
    assert_allclose(forecast(model(p=1, ar=(0.5,)), [8.0], 2), [4.0, 2.0], atol=1e-12)


def test_forecast_random_walk_is_flat():
    assert_allclose(forecast(model(d=1), [3.0, 7.0, 10.0], 3), [10.0, 10.0, 10.0], atol=1e-12)


def test_forecast_needs_history():
    with pytest.raises(InsufficientHistoryError):
        forecast(model(p=2, ar=(0.5, 0.1)), [1.0], 1)


@pytest.mark.parametrize(
    "order, ar, ma",
    [((1, 0, 0), (0.5,), ()), ((1, 1, 1), (0.4,), (0.3,)), ((2, 0, 1), (0.5, -0.2), (0.4,)), ((0, 2, 2), (), (0.3, -0.2))],
)
def test_one_step_forecast_is_the_observation_minus_its_residual(order, ar, ma):
    y = 100.0 + np.cumsum(np.random.default_rng(10).standard_normal(60))
    fitted = ArimaModel(ArimaOrder(*order), ar, ma, 0.1, sigma2=1.0)
    assert_allclose(forecast(fitted, y[:-1], 1)[0], y[-1] - one_step_residuals(fitted, y)[-1], atol=1e-9)


def test_residuals_by_hand():
    residuals = one_step_residuals(model(p=1, ar=(0.5,)), [2.0, 1.0, 3.0])
    assert_allclose(residuals[-1], 2.5, atol=1e-12)


def test_residuals_of_null_model_are_the_series():
    s = [0.3, -1.2, 4.0, 2.2]
    assert_allclose(one_step_residuals(model(), s), s)


def test_residuals_of_a_perfect_model_vanish():
    assert_allclose(one_step_residuals(model(p=1, ar=(0.5,)), [8.0, 4.0, 2.0, 1.0, 0.5]), 0.0, atol=1e-15)


def test_studentize():
    assert_allclose(studentize([1, -1, 2, -2]), [0.5477, -0.5477, 1.0954, -1.0954], atol=1e-3)
    with pytest.raises(DegenerateInputError):
        studentize([2.0, 2.0, 2.0, 2.0])


def test_studentize_ignores_scale():
    r = np.random.default_rng(9).standard_normal(40)
    for a in (1e-3, 2.5, 1e4):
        assert_allclose(studentize(a * r), studentize(r), rtol=1e-10)
    assert_allclose(studentize(-r), -studentize(r), rtol=1e-10)

# %% SERIALIZATION


def test_model_json_round_trip():
    fitted = fit_arima(ar1(0.6, 300, 5), ArimaOrder(1, 0, 1))
    back = ArimaModel.from_json(fitted.to_json())
    assert back == fitted
