import torch

from ...core.exceptions import TrainingError

# %% FORWARD


def cell_step(params, x, h_prev, c_prev, s_prev, sentiment):
    H = h_prev.shape[0]
    v = torch.cat([x, h_prev])
    z = torch.matmul(params["W"], v) + params["b"]
    i = torch.sigmoid(z[:H])
    f = torch.sigmoid(z[H : 2 * H])
    o = torch.sigmoid(z[2 * H : 3 * H])
    g = torch.tanh(z[3 * H :])
    c = f * c_prev + i * g
    gs = torch.sigmoid(torch.matmul(params["W_s"], v) + params["b_s"])
    s = gs * s_prev + (1.0 - gs) * sentiment
    h = o * torch.tanh(c + s)
    return h, c, s


def forward(params, returns, sentiments, n_horizon=3):
    dtype, device = params["W"].dtype, params["W"].device
    H = params["b_s"].shape[0]
    h = torch.zeros(H, dtype=dtype, device=device)
    c, s = h, h
    for r, sent in zip(returns, sentiments):
        feat = torch.tensor([float(r), float(sent)], dtype=dtype, device=device)
        x = torch.matmul(params["W_in"], feat) + params["b_in"]
        h, c, s = cell_step(params, x, h, c, s, float(sent))
    preds = []
    fed = torch.tensor(float(returns[-1]), dtype=dtype, device=device)
    for _ in range(n_horizon):
        feat = torch.stack([fed, torch.zeros((), dtype=dtype, device=device)])
        x = torch.matmul(params["W_in"], feat) + params["b_in"]
        h, c, s = cell_step(params, x, h, c, s, 0.0)
        fed = (torch.matmul(params["W_out"], h) + params["b_out"])[0]
        preds.append(fed)
    return torch.stack(preds)


def l1_loss(pred, actual):
    assert pred.shape == actual.shape, """prediction and target lengths differ"""
    return torch.mean(torch.abs(pred - actual))


# %% BACKWARD


def backward(params, returns, sentiments, actual):
    """ L1 loss, autograd gradients of every parameter and predictions """
    leaves = {k: v.detach().clone().requires_grad_(True) for k, v in params.items()}
    actual = torch.as_tensor(actual, dtype=leaves["W"].dtype, device=leaves["W"].device)
    pred = forward(leaves, returns, sentiments, len(actual))
    loss = l1_loss(pred, actual)
    loss.backward()
    return float(loss.item()), {k: v.grad for k, v in leaves.items()}, pred.detach()


# %% OPTIMIZER


def adam_step(params, grads, state, config):
    """ In-place bias-corrected Adam update of ``params``; ``state`` holds the moments """
    for name, grad in grads.items():
        if not bool(torch.all(torch.isfinite(grad))):
            raise TrainingError("non-finite gradient for {0}".format(name), diagnostics={"parameter": name, "step": state.step})
    state.step += 1
    t = state.step
    bias1 = 1.0 - config.beta1 ** t
    bias2 = 1.0 - config.beta2 ** t
    with torch.no_grad():
        for name, grad in grads.items():
            if config.weight_decay:
                grad = grad + config.weight_decay * params[name]
            m = state.m[name] = config.beta1 * state.m[name] + (1.0 - config.beta1) * grad
            v = state.v[name] = config.beta2 * state.v[name] + (1.0 - config.beta2) * grad * grad
            if config.amsgrad:
                v = state.v_max[name] = torch.maximum(state.v_max[name], v)
            params[name] -= config.learning_rate * (m / bias1) / (torch.sqrt(v / bias2) + config.epsilon)
    return params, state
