import torch

from .recurrent import adam_step, backward, cell_step, forward, l1_loss

# %%
def assert_version():
    numbers = torch.__version__.split(".")
    version = float(numbers[0] + "." + numbers[1])
    assert (
        version >= 1.10
    ), """ You are using a older installation of pytorch, please install 1.10
            or newer """


# %%
def to(x, dtype=torch.float64, device=None):
    if torch.is_tensor(x):
        out = x.detach().clone().to(dtype=dtype)
        return out if device is None else out.to(device)
    return torch.tensor(x, dtype=dtype, device=device)


# %%
def tonumpy(x):
    return x.detach().cpu().numpy()


# %%
def backend_type():
    return torch.Tensor


# %%
def to_params(params):
    """ Working copies of a parameter dict, owned by the training loop """
    return {k: to(v) for k, v in params.items()}


def zeros_like(x):
    return torch.zeros_like(x)
