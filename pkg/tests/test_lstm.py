# %%
import math

import numpy as np
import pandas as pd
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from anomcast.core.exceptions import TrainingError
from anomcast.core.series import AnomalyWindow, TradingDay
from anomcast.lstm import (
    PARAM_NAMES,
    AdamState,
    LstmModel,
    SentimentLstm,
    TrainConfig,
    adam_step,
    backward,
    cell_step,
    forward,
    get_backend,
    gradient_check,
    l1_loss,
    load_model,
    save_model,
    train,
)


def window_of(returns, sentiments, index=0, symbol="TSLA"):
    dates = [d.date() for d in pd.bdate_range("2018-02-01", periods=7 * (index + 1))][-7:]
    days = tuple(TradingDay(d, 7 * index + k) for k, d in enumerate(dates))
    prices = 300.0 * np.cumprod(1.0 + np.asarray(returns))
    return AnomalyWindow(symbol, days, returns, sentiments, prices)


def random_windows(n, seed):
    rng = np.random.default_rng(seed)
    return [
        window_of(rng.uniform(-0.05, 0.05, 7), np.round(rng.uniform(-1.0, 1.0, 7), 3), index=i) for i in range(n)
    ]


def sigmoid(x):
    return 1.0 / (1.0 + math.exp(-x))


# %% CELL


def test_zero_cell_is_a_fixed_point():
    model = LstmModel.zeros()
    h, c, s = cell_step(model, np.zeros(8), np.zeros(8), np.zeros(8), np.zeros(8), 0.0)
    assert_array_equal(h, 0.0)
    assert_array_equal(c, 0.0)
    assert_array_equal(s, 0.0)


def test_sentiment_state_stays_zero_without_sentiment():
    a = LstmModel.init(seed=1)
    b = a.copy()
    b.params["W_s"] = np.random.default_rng(2).normal(size=b.params["W_s"].shape)
    x, h, c = np.random.default_rng(3).uniform(-1, 1, (3, 8))
    out_a = cell_step(a, x, h, c, np.zeros(8), 0.0)
    out_b = cell_step(b, x, h, c, np.zeros(8), 0.0)
    assert_array_equal(out_a[2], 0.0)
    for u, v in zip(out_a, out_b):
        assert_array_equal(u, v)


def test_scalar_cell_by_hand():
    model = LstmModel.zeros(input_size=1, hidden_size=1)
    for name in PARAM_NAMES:
        model.params[name][...] = 0.5
    x, h_prev, c_prev, s_prev, sentiment = 0.3, 0.1, 0.2, -0.4, 0.6
    z = 0.5 * (x + h_prev) + 0.5
    i = f = o = sigmoid(z)
    g = math.tanh(z)
    c = f * c_prev + i * g
    gs = sigmoid(z)
    s = gs * s_prev + (1.0 - gs) * sentiment
    h = o * math.tanh(c + s)
    out = cell_step(model, [x], [h_prev], [c_prev], [s_prev], sentiment)
    assert_allclose([out[0][0], out[1][0], out[2][0]], [h, c, s], atol=1e-12)


def test_cell_shape_mismatch():
    with pytest.raises(AssertionError):
        cell_step(LstmModel.zeros(), np.zeros(7), np.zeros(8), np.zeros(8), np.zeros(8), 0.0)


# %% FORWARD AND LOSS


def test_zero_network_predicts_the_head_bias():
    model = LstmModel.zeros()
    model.params["b_out"][0] = 0.37
    assert_array_equal(forward(model, [0.01, 0.02, -0.03, 0.07], [0.1, 0.0, -0.5, 0.889]), [0.37] * 3)


def test_forward_is_deterministic_and_bounded():
    model = LstmModel.init(seed=4)
    rng = np.random.default_rng(5)
    for _ in range(20):
        r, s = rng.uniform(-0.2, 0.2, 4), rng.uniform(-1.0, 1.0, 4)
        first, second = forward(model, r, s), forward(model, r, s)
        assert_array_equal(first, second)
        assert np.all(np.isfinite(first))


def test_l1_loss():
    assert l1_loss([0.1, 0.2, 0.3], [0.1, 0.2, 0.3]) == 0.0
    assert_allclose(l1_loss([0.1, 0.0, 0.0], [0.2, 0.0, 0.0]), 0.1 / 3.0, rtol=1e-12)
    assert_allclose(l1_loss([1.0, -1.0, 0.0], [0.0, 0.0, 0.0]), 2.0 / 3.0, rtol=1e-12)
    with pytest.raises(AssertionError):
        l1_loss([0.0, 0.0], [0.0, 0.0, 0.0])


# %% GRADIENTS


@pytest.mark.parametrize("seed", range(5))
def test_gradient_check(seed):
    model = LstmModel.init(seed=seed)
    window = random_windows(1, seed=100 + seed)[0]
    preds = forward(model, window.conditioning_returns, window.conditioning_sentiments)
    target = preds + np.array([0.05, -0.04, 0.03])
    assert gradient_check(model, window, target) < 1e-4


def test_gradients_vanish_at_zero_loss():
    model = LstmModel.init(seed=7)
    window = random_windows(1, seed=8)[0]
    preds = forward(model, window.conditioning_returns, window.conditioning_sentiments)
    loss, grads, _ = backward(model, window, preds)
    assert loss == 0.0
    for g in grads.values():
        assert_array_equal(g, 0.0)


def test_head_bias_gradient_without_feedback():
    model = LstmModel.init(seed=9)
    model.params["W_in"][:, 0] = 0.0
    window = random_windows(1, seed=10)[0]
    preds = forward(model, window.conditioning_returns, window.conditioning_sentiments)
    target = preds + np.array([0.1, -0.1, 0.1])
    _, grads, _ = backward(model, window, target)
    assert_allclose(grads["b_out"], [np.mean(np.sign(preds - target))], atol=1e-15)


@pytest.mark.parametrize("name", ["numpy", "pytorch"])
def test_backend_helpers(name):
    if name == "pytorch":
        pytest.importorskip("torch")
    backend = get_backend(name)
    params = backend.to_params(LstmModel.zeros().params)
    assert all(isinstance(p, backend.backend_type()) for p in params.values())
    assert_array_equal(backend.tonumpy(backend.zeros_like(params["b_out"])), [0.0])
    assert_array_equal(backend.tonumpy(backend.to([1.5, -2.0])), [1.5, -2.0])


def test_pytorch_backend_matches_numpy():
    pytest.importorskip("torch")
    model = LstmModel.init(seed=11)
    window = random_windows(1, seed=12)[0]
    r, s = window.conditioning_returns, window.conditioning_sentiments
    assert_allclose(forward(model, r, s, "pytorch"), forward(model, r, s, "numpy"), atol=1e-10)
    target = forward(model, r, s) + np.array([0.02, -0.03, 0.01])
    loss_np, grads_np, _ = backward(model, window, target, "numpy")
    loss_pt, grads_pt, _ = backward(model, window, target, "pytorch")
    assert_allclose(loss_pt, loss_np, atol=1e-10)
    for name in PARAM_NAMES:
        assert_allclose(grads_pt[name], grads_np[name], atol=1e-10)


# %% OPTIMIZER


def test_adam_first_step_moves_by_the_learning_rate():
    for g in (5.0, -0.002, 1e4):
        params = {"w": np.array([2.0])}
        adam_step(params, {"w": np.array([g])}, AdamState.zeros(params), TrainConfig())
        assert_allclose(params["w"], [2.0 - 0.001 * np.sign(g)], atol=1e-8)


def test_adam_zero_gradient_keeps_parameters():
    params = {"w": np.array([1.5, -0.5])}
    state = AdamState.zeros(params)
    for _ in range(10):
        adam_step(params, {"w": np.zeros(2)}, state, TrainConfig())
    assert_array_equal(params["w"], [1.5, -0.5])
    assert state.step == 10


def test_adam_rejects_non_finite_gradients():
    params = {"w": np.array([1.0])}
    with pytest.raises(TrainingError):
        adam_step(params, {"w": np.array([np.nan])}, AdamState.zeros(params), TrainConfig())


@pytest.mark.parametrize("weight_decay, amsgrad", [(0.0, False), (0.01, False), (0.0, True)])
def test_adam_matches_torch(weight_decay, amsgrad):
    torch = pytest.importorskip("torch")
    rng = np.random.default_rng(13)
    start = rng.normal(size=5)
    steps = [rng.normal(size=5) for _ in range(25)]
    config = TrainConfig(weight_decay=weight_decay, amsgrad=amsgrad)

    params = {"w": start.copy()}
    state = AdamState.zeros(params)
    for g in steps:
        adam_step(params, {"w": g}, state, config)

    w = torch.tensor(start, dtype=torch.float64, requires_grad=True)
    opt = torch.optim.Adam([w], lr=0.001, betas=(0.9, 0.999), eps=1e-8, weight_decay=weight_decay, amsgrad=amsgrad)
    for g in steps:
        opt.zero_grad()
        w.grad = torch.tensor(g, dtype=torch.float64)
        opt.step()
    assert_allclose(params["w"], w.detach().numpy(), atol=1e-12)


# %% TRAINING


def test_zero_epochs_leave_the_model_unchanged():
    model = LstmModel.init(seed=14)
    trained, trace = train(model, random_windows(3, seed=15), TrainConfig(epochs=0))
    assert trace == []
    for name in PARAM_NAMES:
        assert_array_equal(trained.params[name], model.params[name])


def test_training_is_deterministic():
    windows = random_windows(6, seed=16)
    a, trace_a = train(LstmModel.init(seed=17), windows, TrainConfig(epochs=5, seed=3))
    b, trace_b = train(LstmModel.init(seed=17), windows, TrainConfig(epochs=5, seed=3))
    assert trace_a == trace_b
    for name in PARAM_NAMES:
        assert_array_equal(a.params[name], b.params[name])


def test_training_does_not_touch_the_input_model():
    model = LstmModel.init(seed=18)
    before = model.copy()
    train(model, random_windows(2, seed=19), TrainConfig(epochs=3))
    for name in PARAM_NAMES:
        assert_array_equal(model.params[name], before.params[name])


def test_single_window_is_memorised():
    window = window_of([0.01] * 7, [0.5] * 7)
    _, trace = train(LstmModel.init(seed=20), [window], TrainConfig(epochs=500))
    assert np.mean(trace[-20:]) < 0.001


def test_loss_trends_down():
    _, trace = train(LstmModel.init(seed=21), random_windows(20, seed=22), TrainConfig(epochs=60))
    assert np.mean(trace[-10:]) < np.mean(trace[:10])


# %% SERIALIZATION


def test_save_load_round_trip(tmp_path):
    model = LstmModel.init(seed=23)
    config = TrainConfig(epochs=7, seed=2, amsgrad=True)
    path = tmp_path / "models" / "lstm.npz"
    save_model(model, path, config)
    back, back_config = load_model(path)
    assert back_config == config
    for name in PARAM_NAMES:
        assert_array_equal(back.params[name], model.params[name])


def test_sentiment_lstm_facade(tmp_path):
    net = SentimentLstm(seed=24)
    windows = random_windows(4, seed=25)
    trace = net.fit(windows, TrainConfig(epochs=3, seed=24))
    assert len(trace) == 3
    prediction = net.predict(windows[0])
    assert prediction.shape == (3,)
    path = tmp_path / "net.npz"
    net.save(path)
    again = SentimentLstm.load(path)
    assert_array_equal(again.predict(windows[0]), prediction)
    assert "Sentiment LSTM" in repr(net)
