import numpy as np
from scipy.special import expit

from ...core.exceptions import TrainingError

# %% FORWARD


def _cell(params, x, h_prev, c_prev, s_prev, sentiment):
    H = h_prev.shape[0]
    v = np.concatenate([x, h_prev])
    z = params["W"] @ v + params["b"]
    i = expit(z[:H])
    f = expit(z[H : 2 * H])
    o = expit(z[2 * H : 3 * H])
    g = np.tanh(z[3 * H :])
    c = f * c_prev + i * g
    gs = expit(params["W_s"] @ v + params["b_s"])
    s = gs * s_prev + (1.0 - gs) * sentiment
    m = np.tanh(c + s)
    h = o * m
    cache = dict(v=v, i=i, f=f, o=o, g=g, c_prev=c_prev, s_prev=s_prev, gs=gs, m=m, sentiment=sentiment)
    return h, c, s, cache


def cell_step(params, x, h_prev, c_prev, s_prev, sentiment):
    h, c, s, _ = _cell(params, x, h_prev, c_prev, s_prev, sentiment)
    return h, c, s


def _unroll(params, returns, sentiments, n_horizon):
    H = params["b_s"].shape[0]
    h, c, s = np.zeros(H), np.zeros(H), np.zeros(H)
    tape = []
    for r, sent in zip(returns, sentiments):
        feat = np.array([r, sent], dtype=np.float64)
        x = params["W_in"] @ feat + params["b_in"]
        h, c, s, cache = _cell(params, x, h, c, s, float(sent))
        tape.append((feat, h, cache))
    preds = np.zeros(n_horizon)
    fed = float(returns[-1])
    for k in range(n_horizon):
        feat = np.array([fed, 0.0])
        x = params["W_in"] @ feat + params["b_in"]
        h, c, s, cache = _cell(params, x, h, c, s, 0.0)
        tape.append((feat, h, cache))
        preds[k] = (params["W_out"] @ h + params["b_out"])[0]
        fed = preds[k]
    return preds, tape


def forward(params, returns, sentiments, n_horizon=3):
    preds, _ = _unroll(params, returns, sentiments, n_horizon)
    return preds


def l1_loss(pred, actual):
    pred, actual = np.asarray(pred, dtype=np.float64), np.asarray(actual, dtype=np.float64)
    assert pred.shape == actual.shape, """prediction and target lengths differ"""
    return float(np.mean(np.abs(pred - actual)))


# %% BACKWARD


def backward(params, returns, sentiments, actual):
    """ L1 loss, gradients of every parameter and predictions, by backpropagation through time """
    actual = np.asarray(actual, dtype=np.float64)
    n_horizon = len(actual)
    preds, tape = _unroll(params, returns, sentiments, n_horizon)
    n_encode = len(tape) - n_horizon
    I = params["W_in"].shape[0]
    H = params["b_s"].shape[0]
    grads = {k: np.zeros_like(v) for k, v in params.items()}
    d_pred = np.sign(preds - actual) / n_horizon

    dh_next, dc_next, ds_next = np.zeros(H), np.zeros(H), np.zeros(H)
    d_fed = 0.0
    for t in reversed(range(len(tape))):
        feat, h, cache = tape[t]
        dh = dh_next
        k = t - n_encode
        if k >= 0:
            dy = d_pred[k] + d_fed
            grads["W_out"] += dy * h[None, :]
            grads["b_out"] += dy
            dh = dh + params["W_out"][0] * dy

        i, f, o, g, gs, m = cache["i"], cache["f"], cache["o"], cache["g"], cache["gs"], cache["m"]
        do = dh * m
        dcs = dh * o * (1.0 - m * m)
        dc = dc_next + dcs
        ds = ds_next + dcs
        di, dg, df = dc * g, dc * i, dc * cache["c_prev"]
        dgs = ds * (cache["s_prev"] - cache["sentiment"])

        dz = np.concatenate([di * i * (1.0 - i), df * f * (1.0 - f), do * o * (1.0 - o), dg * (1.0 - g * g)])
        da = dgs * gs * (1.0 - gs)
        v = cache["v"]
        grads["W"] += np.outer(dz, v)
        grads["b"] += dz
        grads["W_s"] += np.outer(da, v)
        grads["b_s"] += da

        dv = params["W"].T @ dz + params["W_s"].T @ da
        dx = dv[:I]
        dh_next = dv[I:]
        dc_next = dc * f
        ds_next = ds * gs
        grads["W_in"] += np.outer(dx, feat)
        grads["b_in"] += dx
        # decode inputs after the first carry the previous prediction
        d_fed = float(params["W_in"][:, 0] @ dx) if k >= 1 else 0.0

    return l1_loss(preds, actual), grads, preds


# %% OPTIMIZER


def adam_step(params, grads, state, config):
    """ In-place bias-corrected Adam update of ``params``; ``state`` holds the moments """
    for name, grad in grads.items():
        if not np.all(np.isfinite(grad)):
            raise TrainingError("non-finite gradient for {0}".format(name), diagnostics={"parameter": name, "step": state.step})
    state.step += 1
    t = state.step
    bias1 = 1.0 - config.beta1 ** t
    bias2 = 1.0 - config.beta2 ** t
    for name, grad in grads.items():
        if config.weight_decay:
            grad = grad + config.weight_decay * params[name]
        m = state.m[name] = config.beta1 * state.m[name] + (1.0 - config.beta1) * grad
        v = state.v[name] = config.beta2 * state.v[name] + (1.0 - config.beta2) * grad * grad
        if config.amsgrad:
            v = state.v_max[name] = np.maximum(state.v_max[name], v)
        params[name] -= config.learning_rate * (m / bias1) / (np.sqrt(v / bias2) + config.epsilon)
    return params, state
