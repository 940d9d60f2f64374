"""Experiment configuration: a YAML document merged over defaults.

    experiment: seed, training_year, fallback_year, detect_years, outlier_threshold,
                scales, models
    paths:      prices, sentiments, comments, lexicon, out
    arima:      max_sum, root_margin
    sarimax:    max_sum, max_seasonal_sum, exog_policy
    lstm:       epochs (int or list), backend, learning_rate, beta1, beta2, epsilon,
                weight_decay, amsgrad
    symbols:    ticker -> industry (defaults to the bundled 20 x 5 taxonomy)

Relative paths resolve against the directory of the config file.
"""

import copy
import dataclasses
import logging
import os
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import yaml

from .core.exceptions import ConfigError
from .core.utility import backends, data_path, exog_policies, model_classes, scales
from .lstm import TrainConfig

logger = logging.getLogger(__name__)

DEFAULTS = {
    "experiment": {
        "seed": 0,
        "training_year": 2017,
        "fallback_year": 2016,
        "detect_years": [2018, 2019],
        "outlier_threshold": 2.0,
        "scales": list(scales.values),
        "models": list(model_classes.values),
    },
    "paths": {"prices": "prices", "sentiments": "sentiment", "comments": None, "lexicon": None, "out": "results"},
    "arima": {"max_sum": 3, "root_margin": 0.05},
    "sarimax": {"max_sum": 3, "max_seasonal_sum": 2, "exog_policy": exog_policies.hold_last},
    "lstm": {
        "epochs": [100],
        "backend": backends.numpy,
        "learning_rate": 0.001,
        "beta1": 0.9,
        "beta2": 0.999,
        "epsilon": 1e-8,
        "weight_decay": 0.0,
        "amsgrad": False,
    },
    "symbols": None,
}


def load_industries(path=None):
    """ Reads an ``industry: [symbols]`` YAML file into ``{symbol: industry}``

    A trailing ``*`` on a symbol is a marker and is stripped.
    """
    path = data_path("industries.yaml") if path is None else path
    with open(path, encoding="utf-8") as f:
        doc = yaml.safe_load(f) or {}
    symbols: Dict[str, str] = {}
    for industry, members in doc.items():
        for symbol in members:
            symbol = str(symbol).rstrip("*").strip()
            if symbol in symbols:
                raise ConfigError("{0} is listed under {1} and {2}".format(symbol, symbols[symbol], industry))
            symbols[symbol] = str(industry)
    return symbols


@dataclass(frozen=True)
class ExperimentConfig:
    symbols: Dict[str, str]
    prices_dir: str
    sentiments_dir: str
    out_dir: str
    comments_path: Optional[str] = None
    lexicon_path: Optional[str] = None
    seed: int = 0
    training_year: int = 2017
    fallback_year: Optional[int] = 2016
    detect_years: Tuple[int, int] = (2018, 2019)
    outlier_threshold: float = 2.0
    scales: Tuple[str, ...] = scales.values
    models: Tuple[str, ...] = model_classes.values
    arima_max_sum: int = 3
    root_margin: float = 0.05
    sarimax_max_sum: int = 3
    sarimax_max_seasonal_sum: int = 2
    exog_policy: str = exog_policies.hold_last
    epochs: Tuple[int, ...] = (100,)
    backend: str = backends.numpy
    lstm: TrainConfig = TrainConfig()

    def __post_init__(self):
        object.__setattr__(self, "detect_years", tuple(int(y) for y in self.detect_years))
        object.__setattr__(self, "scales", tuple(self.scales))
        object.__setattr__(self, "models", tuple(self.models))
        object.__setattr__(self, "epochs", tuple(int(e) for e in self.epochs))
        if len(self.detect_years) != 2 or self.detect_years[0] == self.detect_years[1]:
            raise ConfigError("detect_years must be two different years, got {0}".format(list(self.detect_years)))
        if self.training_year in self.detect_years:
            logger.warning("training year %d is also a detect year", self.training_year)
        if not self.symbols:
            raise ConfigError("no symbols configured")
        if not self.outlier_threshold > 0:
            raise ConfigError("outlier_threshold must be positive")
        if not self.epochs or min(self.epochs) < 0:
            raise ConfigError("epochs must be a non-empty list of non-negative integers")
        for value, options in (
            (self.scales, scales),
            (self.models, model_classes),
            ((self.exog_policy,), exog_policies),
            ((self.backend,), backends),
        ):
            bad = [v for v in value if v not in options.values]
            if bad or not value:
                raise ConfigError("unknown {0} {1}, choose between {2}".format(options.label, bad, ", ".join(options.values)))

    @property
    def train_year(self):
        return self.detect_years[0]

    @property
    def test_year(self):
        return self.detect_years[1]

    def train_config(self, epochs=None):
        """ TrainConfig of one epoch count, seeded with the experiment seed """
        epochs = self.epochs[0] if epochs is None else epochs
        return dataclasses.replace(self.lstm, epochs=int(epochs), seed=self.seed)

    def industry_of(self, symbol):
        return self.symbols[symbol]

    def replace(self, **overrides):
        """ New config with the given fields replaced; ``None`` values are ignored """
        overrides = {k: v for k, v in overrides.items() if v is not None}
        return dataclasses.replace(self, **overrides)


def _merge(base, update, where=""):
    out = copy.deepcopy(base)
    for key, value in (update or {}).items():
        if key not in base:
            raise ConfigError("unknown config key '{0}{1}'".format(where, key))
        if isinstance(base[key], dict) and base[key] and key != "symbols":
            if not isinstance(value, dict):
                raise ConfigError("'{0}{1}' must be a mapping".format(where, key))
            out[key] = _merge(base[key], value, where + key + ".")
        else:
            out[key] = value
    return out


def _resolve(path, base_dir):
    if path is None:
        return None
    path = os.path.expanduser(str(path))
    return path if os.path.isabs(path) else os.path.normpath(os.path.join(base_dir, path))


def from_dict(doc, base_dir="."):
    """ Builds an ExperimentConfig from a nested mapping laid out like the YAML file """
    doc = _merge(DEFAULTS, doc)
    exp, paths, arima, sarimax, lstm = doc["experiment"], doc["paths"], doc["arima"], doc["sarimax"], doc["lstm"]
    symbols = doc["symbols"]
    if symbols is None:
        symbols = load_industries()
    if not isinstance(symbols, dict):
        raise ConfigError("'symbols' must map ticker to industry")
    epochs = lstm["epochs"]
    epochs = [epochs] if isinstance(epochs, int) else list(epochs)
    try:
        train = TrainConfig(
            learning_rate=float(lstm["learning_rate"]),
            beta1=float(lstm["beta1"]),
            beta2=float(lstm["beta2"]),
            epsilon=float(lstm["epsilon"]),
            weight_decay=float(lstm["weight_decay"]),
            amsgrad=bool(lstm["amsgrad"]),
            epochs=int(epochs[0]) if epochs else 0,
            seed=int(exp["seed"]),
        )
    except (AssertionError, TypeError, ValueError) as e:
        raise ConfigError("invalid lstm section: {0}".format(e))
    return ExperimentConfig(
        symbols={str(k): str(v) for k, v in symbols.items()},
        prices_dir=_resolve(paths["prices"], base_dir),
        sentiments_dir=_resolve(paths["sentiments"], base_dir),
        out_dir=_resolve(paths["out"], base_dir),
        comments_path=_resolve(paths["comments"], base_dir),
        lexicon_path=_resolve(paths["lexicon"], base_dir),
        seed=int(exp["seed"]),
        training_year=int(exp["training_year"]),
        fallback_year=None if exp["fallback_year"] is None else int(exp["fallback_year"]),
        detect_years=tuple(exp["detect_years"]),
        outlier_threshold=float(exp["outlier_threshold"]),
        scales=tuple(exp["scales"]),
        models=tuple(exp["models"]),
        arima_max_sum=int(arima["max_sum"]),
        root_margin=float(arima["root_margin"]),
        sarimax_max_sum=int(sarimax["max_sum"]),
        sarimax_max_seasonal_sum=int(sarimax["max_seasonal_sum"]),
        exog_policy=str(sarimax["exog_policy"]),
        epochs=tuple(epochs),
        backend=str(lstm["backend"]),
        lstm=train,
    )


def load_config(path):
    """ Reads a YAML experiment configuration

    Raises:
        ConfigError: unreadable YAML, unknown keys or invalid values
    """
    try:
        with open(path, encoding="utf-8") as f:
            doc = yaml.safe_load(f)
    except yaml.YAMLError as e:
        raise ConfigError("{0}: {1}".format(path, e))
    if doc is not None and not isinstance(doc, dict):
        raise ConfigError("{0}: top level must be a mapping".format(path))
    return from_dict(doc or {}, os.path.dirname(os.path.abspath(path)))


def dump_config(config):
    """ YAML text that :func:`load_config` reads back into ``config`` (paths absolute) """
    doc = {
        "experiment": {
            "seed": config.seed,
            "training_year": config.training_year,
            "fallback_year": config.fallback_year,
            "detect_years": list(config.detect_years),
            "outlier_threshold": config.outlier_threshold,
            "scales": list(config.scales),
            "models": list(config.models),
        },
        "paths": {
            "prices": config.prices_dir,
            "sentiments": config.sentiments_dir,
            "comments": config.comments_path,
            "lexicon": config.lexicon_path,
            "out": config.out_dir,
        },
        "arima": {"max_sum": config.arima_max_sum, "root_margin": config.root_margin},
        "sarimax": {
            "max_sum": config.sarimax_max_sum,
            "max_seasonal_sum": config.sarimax_max_seasonal_sum,
            "exog_policy": config.exog_policy,
        },
        "lstm": {
            "epochs": list(config.epochs),
            "backend": config.backend,
            "learning_rate": config.lstm.learning_rate,
            "beta1": config.lstm.beta1,
            "beta2": config.lstm.beta2,
            "epsilon": config.lstm.epsilon,
            "weight_decay": config.lstm.weight_decay,
            "amsgrad": config.lstm.amsgrad,
        },
        "symbols": dict(config.symbols),
    }
    return yaml.safe_dump(doc, sort_keys=False)
