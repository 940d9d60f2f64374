# %%

import io
import json
import logging
from dataclasses import asdict, dataclass, field
from types import ModuleType
from typing import Dict, List

import matplotlib
import matplotlib.pyplot as plt
import numpy as np
from tqdm import tqdm

from .core.exceptions import TrainingError
from .core.series import N_CONDITIONING, N_HORIZON
from .core.utility import Parameters, atomic_write, backends

logger = logging.getLogger(__name__)

HIDDEN_SIZE = 8
INPUT_SIZE = 8
N_FEATURES = 2
PARAM_NAMES = ("W_in", "b_in", "W", "b", "W_s", "b_s", "W_out", "b_out")


def parameter_shapes(input_size=INPUT_SIZE, hidden_size=HIDDEN_SIZE, n_features=N_FEATURES):
    gate_in = input_size + hidden_size
    return {
        "W_in": (input_size, n_features),
        "b_in": (input_size,),
        "W": (4 * hidden_size, gate_in),
        "b": (4 * hidden_size,),
        "W_s": (hidden_size, gate_in),
        "b_s": (hidden_size,),
        "W_out": (1, hidden_size),
        "b_out": (1,),
    }


# %% TYPES


@dataclass
class LstmModel:
    """Weights of the sentiment-injected LSTM.

    ``W`` stacks the input, forget, output and candidate gates (in that order) over
    ``[x; h]``. ``W_s`` drives the sentiment gate. All arrays are float64 numpy.
    """

    params: Dict[str, np.ndarray]
    input_size: int = INPUT_SIZE
    hidden_size: int = HIDDEN_SIZE

    def __post_init__(self):
        shapes = parameter_shapes(self.input_size, self.hidden_size)
        assert set(self.params) == set(shapes), """parameters must be exactly {0}""".format(", ".join(PARAM_NAMES))
        params = {}
        for name in PARAM_NAMES:
            value = np.array(self.params[name], dtype=np.float64)
            assert value.shape == shapes[name], """{0} has shape {1}, expected {2}""".format(
                name, value.shape, shapes[name]
            )
            params[name] = value
        self.params = params

    @classmethod
    def init(cls, seed=0, input_size=INPUT_SIZE, hidden_size=HIDDEN_SIZE):
        """ Uniform weights in [-1/sqrt(hidden), 1/sqrt(hidden)] drawn from ``seed`` """
        rng = np.random.default_rng(seed)
        bound = 1.0 / np.sqrt(hidden_size)
        shapes = parameter_shapes(input_size, hidden_size)
        return cls({k: rng.uniform(-bound, bound, size=shapes[k]) for k in PARAM_NAMES}, input_size, hidden_size)

    @classmethod
    def zeros(cls, input_size=INPUT_SIZE, hidden_size=HIDDEN_SIZE):
        shapes = parameter_shapes(input_size, hidden_size)
        return cls({k: np.zeros(shapes[k]) for k in PARAM_NAMES}, input_size, hidden_size)

    def copy(self):
        return LstmModel({k: v.copy() for k, v in self.params.items()}, self.input_size, self.hidden_size)

    @property
    def n_params(self):
        return int(sum(v.size for v in self.params.values()))


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    weight_decay: float = 0.0
    amsgrad: bool = False
    epochs: int = 100
    seed: int = 0

    def __post_init__(self):
        assert self.learning_rate > 0, """learning_rate must be positive"""
        assert 0 <= self.beta1 < 1 and 0 <= self.beta2 < 1, """betas must lie in [0, 1)"""
        assert self.epsilon > 0, """epsilon must be positive"""
        assert self.weight_decay >= 0, """weight_decay must be non-negative"""
        assert self.epochs >= 0, """epochs must be non-negative"""

    def to_dict(self):
        return asdict(self)


@dataclass
class AdamState:
    step: int = 0
    m: Dict[str, object] = field(default_factory=dict)
    v: Dict[str, object] = field(default_factory=dict)
    v_max: Dict[str, object] = field(default_factory=dict)

    @classmethod
    def zeros(cls, params, zeros_like=np.zeros_like):
        return cls(
            0,
            {k: zeros_like(p) for k, p in params.items()},
            {k: zeros_like(p) for k, p in params.items()},
            {k: zeros_like(p) for k, p in params.items()},
        )


# %% BACKEND SELECTION


def get_backend(name=None):
    name = backends.default(name)
    backends.check(name)
    if name == backends.numpy:
        from .backend.numpy import functions as backend
    else:
        from .backend.pytorch import functions as backend
    backend.assert_version()
    return backend


def _split_window(window):
    return list(window.conditioning_returns), list(window.conditioning_sentiments), list(window.target_returns)


# %% OPERATIONS


def cell_step(model, input_vec, h_prev, c_prev, s_prev, sentiment_scalar):
    """ One recurrent step; returns ``(h, c, s)``

    The LSTM gates update ``c`` from ``[input_vec; h_prev]``. The sentiment gate
    ``g = sigmoid(W_s [input_vec; h_prev] + b_s)`` mixes the previous sentiment state
    with the scalar, ``s = g * s_prev + (1 - g) * sentiment_scalar``, and the output
    is ``h = o * tanh(c + s)``.
    """
    backend = get_backend(backends.numpy)
    H = model.hidden_size
    x, h_prev, c_prev, s_prev = (np.asarray(a, dtype=np.float64) for a in (input_vec, h_prev, c_prev, s_prev))
    assert x.shape == (model.input_size,), """input_vec must have {0} entries""".format(model.input_size)
    assert h_prev.shape == c_prev.shape == s_prev.shape == (H,), """states must have {0} entries""".format(H)
    return backend.cell_step(model.params, x, h_prev, c_prev, s_prev, float(sentiment_scalar))


def forward(model, returns, sentiments, backend=None):
    """ Encodes 4 observed (return, sentiment) days, decodes 3 returns

    Each decode step reads the previous step's prediction (the last observed return
    for the first one) with sentiment 0.

    Returns:
        numpy.ndarray: 3 predicted returns
    """
    assert len(returns) == N_CONDITIONING and len(sentiments) == N_CONDITIONING, (
        """forward needs exactly {0} conditioning days""".format(N_CONDITIONING)
    )
    backend = get_backend(backend)
    params = backend.to_params(model.params)
    return np.asarray(backend.tonumpy(backend.forward(params, list(returns), list(sentiments), N_HORIZON)), dtype=np.float64)


def l1_loss(pred, actual):
    assert len(pred) == len(actual), """prediction and target lengths differ"""
    return float(np.mean(np.abs(np.asarray(pred, dtype=np.float64) - np.asarray(actual, dtype=np.float64))))


def backward(model, window, actual_returns=None, backend=None):
    """ Gradients of ``l1_loss(forward(window), actual_returns)`` for every parameter

    The subgradient of ``|x|`` at 0 is 0.

    Returns:
        tuple: (loss, {name: numpy.ndarray}, predictions)
    """
    backend = get_backend(backend)
    returns, sentiments, target = _split_window(window)
    if actual_returns is not None:
        target = list(actual_returns)
    assert len(target) == N_HORIZON, """need {0} target returns""".format(N_HORIZON)
    loss, grads, preds = backend.backward(backend.to_params(model.params), returns, sentiments, backend.to(target))
    return loss, {k: np.asarray(backend.tonumpy(g), dtype=np.float64) for k, g in grads.items()}, np.asarray(backend.tonumpy(preds))


def adam_step(params, grads, state, config):
    """ Bias-corrected Adam on numpy parameter dicts, in place

    Raises:
        TrainingError: a gradient is not finite
    """
    return get_backend(backends.numpy).adam_step(params, grads, state, config)


def train(model, training_windows, config, backend=None, progress=False):
    """ Per-window Adam training on the L1 loss

    Every epoch visits the windows in an order shuffled by ``config.seed``.

    Args:
        model (LstmModel): starting weights (left untouched)
        training_windows (list of AnomalyWindow): at least one window
        config (TrainConfig): optimiser settings
        backend (str): ``numpy`` or ``pytorch``
        progress (bool): show a tqdm bar over epochs

    Returns:
        tuple: (trained LstmModel, list of per-epoch mean losses)

    Raises:
        TrainingError: a loss or gradient became non-finite
    """
    windows = list(training_windows)
    assert len(windows) >= 1, """training needs at least one window"""
    backend = get_backend(backend)
    params = backend.to_params(model.params)
    state = AdamState.zeros(params, backend.zeros_like)
    rng = np.random.default_rng(config.seed)
    data = [(r, s, backend.to(t)) for r, s, t in map(_split_window, windows)]
    trace: List[float] = []

    pb = tqdm(range(config.epochs), desc="LSTM", unit="epoch", disable=not progress, leave=False)
    for epoch in pb:
        losses = []
        for idx in rng.permutation(len(windows)):
            returns, sentiments, target = data[idx]
            loss, grads, _ = backend.backward(params, returns, sentiments, target)
            if not np.isfinite(loss):
                raise TrainingError(
                    "non-finite loss in epoch {0}".format(epoch),
                    trace=trace,
                    diagnostics={"epoch": epoch, "window": windows[idx].name},
                )
            try:
                backend.adam_step(params, grads, state, config)
            except TrainingError as e:
                raise TrainingError(str(e), trace=trace, diagnostics=dict(e.diagnostics, epoch=epoch, window=windows[idx].name))
            losses.append(loss)
        trace.append(float(np.mean(losses)))
        pb.set_postfix({"loss": trace[-1]})
    logger.debug("trained %d epochs on %d windows, final loss %s", config.epochs, len(windows), trace[-1] if trace else None)
    trained = LstmModel({k: backend.tonumpy(v) for k, v in params.items()}, model.input_size, model.hidden_size)
    return trained, trace


def gradient_check(model, window, actual_returns=None, h=1e-5, floor=1e-6):
    """ Largest relative gap between BPTT and central-difference gradients

    Entries are compared as ``|a - n| / max(|a|, |n|, floor)``.
    """
    returns, sentiments, target = _split_window(window)
    if actual_returns is not None:
        target = list(actual_returns)
    _, grads, _ = backward(model, window, target, backend=backends.numpy)
    backend = get_backend(backends.numpy)
    params = model.copy().params
    worst = 0.0
    for name in PARAM_NAMES:
        p = params[name]
        numeric = np.zeros_like(p)
        for idx in np.ndindex(p.shape):
            old = p[idx]
            p[idx] = old + h
            up = l1_loss(backend.forward(params, returns, sentiments, N_HORIZON), target)
            p[idx] = old - h
            down = l1_loss(backend.forward(params, returns, sentiments, N_HORIZON), target)
            p[idx] = old
            numeric[idx] = (up - down) / (2.0 * h)
        gap = np.abs(grads[name] - numeric) / np.maximum(np.maximum(np.abs(grads[name]), np.abs(numeric)), floor)
        worst = max(worst, float(np.max(gap)))
    return worst


# %% SERIALIZATION


def save_model(model, path, config=None):
    """ Writes the weights and the training config to an ``.npz`` archive """
    meta = {"input_size": model.input_size, "hidden_size": model.hidden_size}
    if config is not None:
        meta["config"] = config.to_dict()
    buffer = io.BytesIO()
    np.savez(buffer, meta=np.array(json.dumps(meta, sort_keys=True)), **model.params)
    atomic_write(path, buffer.getvalue(), mode="wb")


def load_model(path):
    """ Reads an archive written by :func:`save_model`; returns ``(LstmModel, TrainConfig or None)`` """
    with np.load(path, allow_pickle=False) as archive:
        meta = json.loads(str(archive["meta"]))
        params = {k: archive[k] for k in PARAM_NAMES}
    config = TrainConfig(**meta["config"]) if "config" in meta else None
    return LstmModel(params, meta["input_size"], meta["hidden_size"]), config


# %%
class SentimentLstm:
    """Sentiment-injected LSTM forecaster. Package main class for the neural model.

    Args:
        backend (str, optional): computational backend to use. Choose between "*numpy*", or "*pytorch*". Defaults to "*numpy*".
        seed (int, optional): seed of the weight initialization. Defaults to 0.
        hidden_size (int, optional): hidden and input width. Defaults to 8.
    """

    params: Parameters
    backend_name: str
    backend: ModuleType
    model: LstmModel

    def __init__(self, backend: str = "numpy", seed: int = 0, hidden_size: int = HIDDEN_SIZE):
        self._check_input(backend, seed, hidden_size)

        self.params = Parameters()
        self.params.seed = seed
        self.params.hidden_size = hidden_size
        self.params.input_size = hidden_size
        self.params.config = None
        self.trace = []

        self.backend_name = backend
        self.backend = get_backend(backend)
        self.model = LstmModel.init(seed, hidden_size, hidden_size)

    def forward(self, returns, sentiments):
        """ 3 predicted returns from 4 conditioning returns and sentiments """
        return forward(self.model, returns, sentiments, self.backend_name)

    def predict(self, window):
        return self.forward(window.conditioning_returns, window.conditioning_sentiments)

    def fit(self, windows, config: TrainConfig = None, progress: bool = False):
        """ Trains on the windows from the current weights; returns the per-epoch losses """
        config = TrainConfig(seed=self.params.seed) if config is None else config
        self.model, trace = train(self.model, windows, config, self.backend_name, progress)
        self.params.config = config
        self.trace.extend(trace)
        return trace

    def save(self, path):
        save_model(self.model, path, self.params.config)

    @classmethod
    def load(cls, path, backend: str = "numpy"):
        model, config = load_model(path)
        out = cls(backend, seed=config.seed if config is not None else 0, hidden_size=model.hidden_size)
        out.model = model
        out.params.config = config
        return out

    def visualize_loss(self, fig: matplotlib.figure.Figure = None):
        """ Plots the per-epoch training loss

        Args:
            fig (matplotlib.figure.Figure): matplotlib figure handle

        Returns:
            plot: handle to the axes
        """
        if fig is None:
            fig = plt.figure()

        ax = fig.add_subplot(1, 1, 1)
        ax.plot(np.arange(1, len(self.trace) + 1), self.trace, color="blue")
        ax.set_title("Training Loss")
        ax.set_xlabel("Epoch")
        ax.set_ylabel("L1 loss")
        ax.grid(alpha=0.3)
        return ax

    def _check_input(self, backend: str, seed: int, hidden_size: int):
        """ Checks the input to the class

            backend (str, optional): computational backend to use. Choose between "*numpy*", or "*pytorch*".
            seed (int): weight initialization seed
            hidden_size (int): hidden width
        """
        assert backend in backends.values, """Unknown backend, choose between 'numpy' or 'pytorch' """
        assert isinstance(seed, (int, np.integer)) and seed >= 0, """seed must be a non-negative integer"""
        assert hidden_size >= 1, """hidden size must be >= 1"""

    def __repr__(self):
        output = """
        Sentiment LSTM forecaster.
            Parameters:
                Hidden size:                {0}
                Input size:                 {1}
                Trainable parameters:       {2}
                Seed:                       {3}
                Epochs trained:             {4}
            Backend:                        {5}
        """.format(
            self.params.hidden_size,
            self.params.input_size,
            self.model.n_params,
            self.params.seed,
            len(self.trace),
            self.backend_name,
        )
        return output
