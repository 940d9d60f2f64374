"""End-to-end experiment: ingest, detect, pool, train, evaluate, report.

Each stage can run on its own from the artifacts the previous one left in the output
directory, or all of them in one process through :func:`run_experiment`.
"""

import datetime
import json
import logging
import os
import re
import time
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from tqdm import tqdm

from . import sarimax
from .core.exceptions import AnomcastError, DomainError, ParseError, ValidationError
from .core.series import (
    N_CONDITIONING,
    N_HORIZON,
    OUTLIER_POSITION,
    WINDOW_SIZE,
    AnomalyWindow,
    TradingDay,
    _read_frame,
    read_prices,
    reconstruct_prices,
    zero_sentiment,
)
from .core.utility import atomic_write, model_classes, scales
from .lstm import SentimentLstm
from .outliers import detect_symbol
from .sentiment import default_lexicon, load_comments, load_lexicon, load_scores, score_comments

logger = logging.getLogger(__name__)

WINDOW_COLUMNS = ["Symbols", "Date", "Outliers", "Actuals", "Percentage", "S_Scores", "Ordinal"]
PREDICTION_COLUMNS = [
    "Model",
    "Scale",
    "Pool",
    "Symbols",
    "Window",
    "Step",
    "Date",
    "Predicted_Return",
    "Predicted",
    "Actual",
    "Accuracy",
    "Window_Accuracy",
]
RESULT_COLUMNS = ["Model", "Scale", "Symbols", "Date", "Outliers", "Actuals", "Percentage", "S_Scores", "Predicted Price"]
NOT_AVAILABLE = "N/A"


# %% TYPES


@dataclass(frozen=True)
class SymbolData:
    prices: object
    sentiments: object


@dataclass(frozen=True)
class WindowDatasetRow:
    symbol: str
    date: datetime.date
    outlier_flag: int
    actual_price: float
    pct_change: float
    sentiment_score: float
    ordinal: int
    predicted_price: Optional[float] = None


@dataclass(frozen=True)
class Variant:
    """One trainable model family; the LSTM gets one variant per epoch count."""

    label: str
    model_class: str
    epochs: Optional[int] = None


@dataclass
class DetectionResult:
    detections: Dict[str, object] = field(default_factory=dict)
    failures: Dict[str, str] = field(default_factory=dict)

    @property
    def train_windows(self):
        return {s: list(d.train_windows) for s, d in self.detections.items()}

    @property
    def test_windows(self):
        return {s: list(d.test_windows) for s, d in self.detections.items()}

    def diagnostics(self):
        out = {s: d.diagnostics.to_dict() for s, d in self.detections.items()}
        for symbol, reason in self.failures.items():
            out[symbol] = {"symbol": symbol, "error": reason}
        return out


@dataclass
class TrainedCell:
    variant: Variant
    scale: str
    models: Dict[str, object] = field(default_factory=dict)
    sizes: Dict[str, int] = field(default_factory=dict)
    seconds: float = 0.0
    skipped: Dict[str, str] = field(default_factory=dict)


@dataclass(frozen=True)
class WindowResult:
    model: str
    scale: str
    pool: str
    symbol: str
    window: str
    dates: Tuple[datetime.date, ...]
    predicted_returns: Tuple[float, ...]
    predicted_prices: Tuple[float, ...]
    actual_prices: Tuple[float, ...]
    day_accuracies: Tuple[float, ...]
    accuracy: float


@dataclass
class CellResult:
    model: str
    scale: str
    accuracy: float
    seconds: float
    seconds_per_symbol: float
    n_windows: int
    n_symbols: int
    n_pools: int
    skipped: Dict[str, str] = field(default_factory=dict)


@dataclass
class EvaluationReport:
    cells: List[CellResult] = field(default_factory=list)
    windows: List[WindowResult] = field(default_factory=list)
    detection: Dict[str, dict] = field(default_factory=dict)
    failures: Dict[str, str] = field(default_factory=dict)

    def cell(self, model, scale):
        for c in self.cells:
            if c.model == model and c.scale == scale:
                return c
        raise KeyError((model, scale))

    def cost_ratios(self):
        """ Universal over single time per target symbol, per model variant where both cells exist """
        out = {}
        for c in self.cells:
            if c.scale != scales.universal:
                continue
            single = [s for s in self.cells if s.model == c.model and s.scale == scales.single]
            if single and np.isfinite(c.seconds_per_symbol) and single[0].seconds_per_symbol > 0:
                out[c.model] = c.seconds_per_symbol / single[0].seconds_per_symbol
        return out

    def to_dict(self):
        return {
            "cells": [asdict(c) for c in self.cells],
            "cost_ratios": self.cost_ratios(),
            "failures": dict(self.failures),
            "detection": self.detection,
        }

    def to_json(self):
        return json.dumps(_finite(self.to_dict()), indent=2, sort_keys=True)


def _finite(obj):
    if isinstance(obj, float):
        return obj if np.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite(v) for v in obj]
    return obj


def variants(config):
    out = []
    for model_class in config.models:
        if model_class == model_classes.sarimax:
            out.append(Variant(model_classes.sarimax, model_classes.sarimax))
        else:
            grid = len(config.epochs) > 1
            for epochs in config.epochs:
                label = "lstm_e{0}".format(epochs) if grid else model_classes.lstm
                out.append(Variant(label, model_classes.lstm, epochs))
    return out


def slug(name):
    return re.sub(r"[^A-Za-z0-9]+", "-", name).strip("-")


# %% STAGES


def ingest(config):
    """ Loads every configured symbol's prices and sentiment

    A symbol without a sentiment file is scored from the comments file when one is
    configured, and gets all-zero sentiment otherwise.

    Raises:
        FileNotFoundError: a price file is missing
        ParseError, ValidationError: a file violates its format
    """
    comments, lexicon = None, None
    if config.comments_path is not None:
        comments = load_comments(config.comments_path)
        lexicon = load_lexicon(config.lexicon_path) if config.lexicon_path else default_lexicon()
    data = {}
    for symbol, industry in config.symbols.items():
        price_path = os.path.join(config.prices_dir, symbol + ".csv")
        if not os.path.exists(price_path):
            raise FileNotFoundError("no price file for {0} at {1}".format(symbol, price_path))
        prices = read_prices(price_path, symbol, industry)
        score_path = os.path.join(config.sentiments_dir, symbol + ".csv")
        if os.path.exists(score_path):
            sentiments = load_scores(score_path, symbol)
        elif comments is not None and symbol in comments:
            sentiments = score_comments(comments[symbol], lexicon, symbol, prices.dates)
        else:
            logger.warning("%s: no sentiment available, using 0 on every day", symbol)
            sentiments = zero_sentiment(prices)
        data[symbol] = SymbolData(prices, sentiments)
    logger.info("ingested %d symbols", len(data))
    return data


def detect(config, data, progress=False):
    """ Runs outlier detection for every symbol; failures are recorded, not raised """
    result = DetectionResult()
    for symbol, d in tqdm(data.items(), desc="detect", unit="symbol", disable=not progress, leave=False):
        try:
            result.detections[symbol] = detect_symbol(
                d.prices,
                d.sentiments,
                config.training_year,
                config.detect_years,
                config.fallback_year,
                config.outlier_threshold,
                config.arima_max_sum,
                config.root_margin,
            )
        except AnomcastError as e:
            result.failures[symbol] = "{0}: {1}".format(type(e).__name__, e)
            logger.warning("%s: detection failed (%s)", symbol, e)
    return result


def pool_key(scale, symbol, industries):
    scales.check(scale)
    if scale == scales.universal:
        return scales.universal
    if scale == scales.industry:
        return industries[symbol]
    return symbol


def build_datasets(windows_by_symbol, scale, industries):
    """ Training pools of one scale

    Args:
        windows_by_symbol (dict): symbol -> training windows
        scale (str): ``universal``, ``industry`` or ``single``
        industries (dict): symbol -> industry

    Returns:
        dict: pool name -> windows, in symbol order
    """
    pools: Dict[str, List[AnomalyWindow]] = {}
    for symbol, windows in windows_by_symbol.items():
        pools.setdefault(pool_key(scale, symbol, industries), []).extend(windows)
    return pools


def leakage_check(datasets, test_windows):
    """ Raises ValidationError when a test window also sits in a training pool """
    train_keys = {w.key for windows in datasets.values() for w in windows}
    test_keys = {w.key for windows in test_windows.values() for w in windows}
    leaked = train_keys & test_keys
    if leaked:
        raise ValidationError("{0} test window(s) appear in training pools".format(len(leaked)))
    return True


def evaluate(predicted_prices, actual_prices):
    """ Accuracy in percent, ``(1 - mean(|A - F| / A)) * 100``

    Raises:
        DomainError: an actual price is not positive
    """
    F = np.asarray(predicted_prices, dtype=np.float64)
    A = np.asarray(actual_prices, dtype=np.float64)
    assert F.shape == A.shape and A.ndim == 1 and len(A) > 0, """need matching non-empty price lists"""
    if (A <= 0).any():
        raise DomainError("actual prices must be positive")
    return float((1.0 - np.mean(np.abs(A - F) / A)) * 100.0)


def fit_pool(variant, windows, config, progress=False):
    if variant.model_class == model_classes.sarimax:
        return sarimax.select_and_fit(windows, config.sarimax_max_sum, config.sarimax_max_seasonal_sum, progress)
    net = SentimentLstm(config.backend, seed=config.seed)
    net.fit(windows, config.train_config(variant.epochs), progress)
    return net


def predict_window(variant, model, window, config):
    """ 3 predicted returns for a window from its first 4 days """
    if variant.model_class == model_classes.sarimax:
        return sarimax.forecast_window(
            model,
            window.conditioning_returns,
            window.conditioning_sentiments,
            config.exog_policy,
            window.sentiments[N_CONDITIONING:],
        )
    return [float(v) for v in model.predict(window)]


def score_window(variant, scale, pool, model, window, config):
    predicted = predict_window(variant, model, window, config)
    prices = reconstruct_prices(window.anchor_price, predicted)
    actual = window.target_prices
    days = tuple(evaluate([f], [a]) for f, a in zip(prices, actual))
    return WindowResult(
        model=variant.label,
        scale=scale,
        pool=pool,
        symbol=window.symbol,
        window=window.name,
        dates=tuple(d.date for d in window.days[N_CONDITIONING:]),
        predicted_returns=tuple(float(r) for r in predicted),
        predicted_prices=tuple(prices),
        actual_prices=tuple(actual),
        day_accuracies=days,
        accuracy=float(np.mean(days)),
    )


def model_key(variant, scale, symbol, industries):
    """ Key of the model that forecasts ``symbol``

    SARIMAX models are fitted per target symbol on that symbol's pool, so the universal
    cell fits one model on every window for each symbol. An LSTM network is trained
    once per pool and shared by the pool's symbols.
    """
    if variant.model_class == model_classes.sarimax:
        return symbol
    return pool_key(scale, symbol, industries)


def train_cells(config, train_by_symbol, progress=False):
    """ Trains every (variant, scale) cell on its pools, timing each cell """
    cells = []
    for variant in variants(config):
        for scale in config.scales:
            cell = TrainedCell(variant, scale)
            keys: Dict[str, List[str]] = {}
            for symbol in train_by_symbol:
                owners = keys.setdefault(pool_key(scale, symbol, config.symbols), [])
                key = model_key(variant, scale, symbol, config.symbols)
                if key not in owners:
                    owners.append(key)
            start = time.perf_counter()
            for pool, windows in build_datasets(train_by_symbol, scale, config.symbols).items():
                if not windows:
                    cell.skipped.update((key, "empty pool") for key in keys[pool])
                    logger.warning("%s/%s: pool %s has no training windows", variant.label, scale, pool)
                    continue
                for key in keys[pool]:
                    try:
                        cell.models[key] = fit_pool(variant, windows, config, progress)
                        cell.sizes[key] = len(windows)
                    except AnomcastError as e:
                        # the same windows fail the same way for every key of the pool
                        reason = "{0}: {1}".format(type(e).__name__, e)
                        cell.skipped.update((k, reason) for k in keys[pool] if k not in cell.models)
                        logger.warning("%s/%s: pool %s skipped (%s)", variant.label, scale, pool, e)
                        break
            cell.seconds = time.perf_counter() - start
            logger.info("%s/%s: %d model(s) trained in %.2fs", variant.label, scale, len(cell.models), cell.seconds)
            cells.append(cell)
    return cells


def evaluate_cells(config, cells, test_by_symbol):
    """ Predicts every test window with the model serving its symbol and aggregates the cells """
    report = EvaluationReport()
    for cell in cells:
        start = time.perf_counter()
        skipped = dict(cell.skipped)
        results = []
        targets, pools = set(), set()
        for symbol, windows in test_by_symbol.items():
            if not windows:
                continue
            pool = pool_key(cell.scale, symbol, config.symbols)
            model = cell.models.get(model_key(cell.variant, cell.scale, symbol, config.symbols))
            if model is None:
                skipped.setdefault(symbol, "no model for pool {0}".format(pool))
                continue
            targets.add(symbol)
            pools.add(pool)
            for window in windows:
                try:
                    results.append(score_window(cell.variant, cell.scale, pool, model, window, config))
                except AnomcastError as e:
                    skipped[window.name] = "{0}: {1}".format(type(e).__name__, e)
                    logger.warning("%s/%s: %s not scored (%s)", cell.variant.label, cell.scale, window.name, e)
        seconds = cell.seconds + time.perf_counter() - start
        report.windows.extend(results)
        report.cells.append(
            CellResult(
                model=cell.variant.label,
                scale=cell.scale,
                accuracy=_cell_accuracy([r.accuracy for r in results]),
                seconds=seconds,
                seconds_per_symbol=seconds / len(targets) if targets else float("nan"),
                n_windows=len(results),
                n_symbols=len(targets),
                n_pools=len(pools),
                skipped=skipped,
            )
        )
    return report


def _cell_accuracy(window_accuracies):
    return float(np.mean(window_accuracies)) if len(window_accuracies) else float("nan")


def audit(report, rows=None):
    """ Recomputes every cell average from per-window accuracies

    Args:
        report (EvaluationReport): aggregated report
        rows (pandas.DataFrame, optional): predictions table; defaults to ``report.windows``

    Returns:
        list of str: mismatches, empty when the report is consistent
    """
    if rows is None:
        rows = predictions_frame(report.windows)
    problems = []
    for c in report.cells:
        mine = rows[(rows["Model"] == c.model) & (rows["Scale"] == c.scale)]
        per_window = mine.drop_duplicates("Window", keep="first")["Window_Accuracy"].astype(float).tolist()
        if len(per_window) != c.n_windows:
            problems.append("{0}/{1}: {2} windows listed, {3} reported".format(c.model, c.scale, len(per_window), c.n_windows))
            continue
        if (mine.groupby("Window").size() != N_HORIZON).any():
            problems.append("{0}/{1}: a window lacks 3 predicted prices".format(c.model, c.scale))
        recomputed = _cell_accuracy(per_window)
        same = (np.isnan(recomputed) and np.isnan(c.accuracy)) or recomputed == c.accuracy
        if not same:
            problems.append("{0}/{1}: {2!r} != {3!r}".format(c.model, c.scale, recomputed, c.accuracy))
    return problems


# %% FILES


def dataset_rows(windows):
    """ The 7 rows of every window, outlier flag set on the 4th """
    return [
        WindowDatasetRow(
            symbol=w.symbol,
            date=day.date,
            outlier_flag=int(k == OUTLIER_POSITION),
            actual_price=w.actual_prices[k],
            pct_change=w.returns[k],
            sentiment_score=w.sentiments[k],
            ordinal=day.ordinal,
        )
        for w in windows
        for k, day in enumerate(w.days)
    ]


def windows_frame(windows):
    records = [
        {
            "Symbols": row.symbol,
            "Date": row.date.isoformat(),
            "Outliers": row.outlier_flag,
            "Actuals": repr(row.actual_price),
            "Percentage": repr(row.pct_change),
            "S_Scores": repr(row.sentiment_score),
            "Ordinal": row.ordinal,
        }
        for row in dataset_rows(windows)
    ]
    return pd.DataFrame.from_records(records, columns=WINDOW_COLUMNS)


def write_windows(windows, path):
    """ Writes windows as stacked 7-row blocks (outlier flag on the 4th row) """
    atomic_write(path, windows_frame(windows).to_csv(index=False, lineterminator="\n"))


def read_windows(path):
    """ Reads a file written by :func:`write_windows`

    Raises:
        ParseError: malformed value
        ValidationError: a block is not 7 rows of one symbol with the flag on row 4
    """
    frame = _read_frame(path, WINDOW_COLUMNS)
    if len(frame) % WINDOW_SIZE:
        raise ValidationError("{0} rows do not form 7-row blocks".format(len(frame)), path=path)
    windows = []
    for start in range(0, len(frame), WINDOW_SIZE):
        block = frame.iloc[start : start + WINDOW_SIZE]
        line = start + 2
        try:
            dates = [datetime.date.fromisoformat(v.strip()) for v in block["Date"]]
            flags = [int(v) for v in block["Outliers"]]
            ordinals = [int(v) for v in block["Ordinal"]]
            actuals = [float(v) for v in block["Actuals"]]
            returns = [float(v) for v in block["Percentage"]]
            scores = [float(v) for v in block["S_Scores"]]
        except ValueError as e:
            raise ParseError(str(e), path=path, line=line)
        symbols = set(v.strip() for v in block["Symbols"])
        if len(symbols) != 1 or flags != [int(k == OUTLIER_POSITION) for k in range(WINDOW_SIZE)]:
            raise ValidationError("malformed window block", path=path, line=line)
        windows.append(
            AnomalyWindow(
                symbol=symbols.pop(),
                days=tuple(TradingDay(d, o) for d, o in zip(dates, ordinals)),
                returns=returns,
                sentiments=scores,
                actual_prices=actuals,
            )
        )
    return windows


def group_by_symbol(windows, symbols):
    out = {s: [] for s in symbols}
    for w in windows:
        out.setdefault(w.symbol, []).append(w)
    return out


def predictions_frame(results):
    records = []
    for r in results:
        for k in range(len(r.predicted_prices)):
            records.append(
                {
                    "Model": r.model,
                    "Scale": r.scale,
                    "Pool": r.pool,
                    "Symbols": r.symbol,
                    "Window": r.window,
                    "Step": k + 1,
                    "Date": r.dates[k].isoformat(),
                    "Predicted_Return": repr(r.predicted_returns[k]),
                    "Predicted": repr(r.predicted_prices[k]),
                    "Actual": repr(r.actual_prices[k]),
                    "Accuracy": repr(r.day_accuracies[k]),
                    "Window_Accuracy": repr(r.accuracy),
                }
            )
    return pd.DataFrame.from_records(records, columns=PREDICTION_COLUMNS)


def read_predictions(path):
    frame = _read_frame(path, PREDICTION_COLUMNS)
    results = []
    for _, block in frame.groupby(["Model", "Scale", "Window"], sort=False):
        first = block.iloc[0]
        results.append(
            WindowResult(
                model=first["Model"],
                scale=first["Scale"],
                pool=first["Pool"],
                symbol=first["Symbols"],
                window=first["Window"],
                dates=tuple(datetime.date.fromisoformat(v) for v in block["Date"]),
                predicted_returns=tuple(float(v) for v in block["Predicted_Return"]),
                predicted_prices=tuple(float(v) for v in block["Predicted"]),
                actual_prices=tuple(float(v) for v in block["Actual"]),
                day_accuracies=tuple(float(v) for v in block["Accuracy"]),
                accuracy=float(first["Window_Accuracy"]),
            )
        )
    return results


def results_frame(report, test_windows):
    """ Test windows with predicted prices on their last 3 rows, one block per cell """
    by_name = {w.name: w for w in test_windows}
    frames = []
    for r in report.windows:
        block = windows_frame([by_name[r.window]]).drop(columns=["Ordinal"])
        block.insert(0, "Scale", r.scale)
        block.insert(0, "Model", r.model)
        block["Predicted Price"] = [NOT_AVAILABLE] * N_CONDITIONING + [repr(p) for p in r.predicted_prices]
        frames.append(block)
    if not frames:
        return pd.DataFrame(columns=RESULT_COLUMNS)
    return pd.concat(frames, ignore_index=True)[RESULT_COLUMNS]


def plot_blocks(report, test_windows):
    """ Per test window: day index, actual price, one predicted-price column per cell """
    by_name = {w.name: w for w in test_windows}
    blocks = {}
    for r in report.windows:
        w = by_name[r.window]
        if r.window not in blocks:
            blocks[r.window] = pd.DataFrame(
                {
                    "Day": np.arange(1, WINDOW_SIZE + 1),
                    "Date": [d.date.isoformat() for d in w.days],
                    "Actual": [repr(p) for p in w.actual_prices],
                }
            )
        blocks[r.window]["{0}_{1}".format(r.model, r.scale)] = [""] * N_CONDITIONING + [repr(p) for p in r.predicted_prices]
    return blocks


def emit_results(report, test_windows, out_dir, png=False):
    """ Writes results.csv, plots/<window>.csv (and .png) and report.json under ``out_dir`` """
    atomic_write(os.path.join(out_dir, "results.csv"), results_frame(report, test_windows).to_csv(index=False, lineterminator="\n"))
    blocks = plot_blocks(report, test_windows)
    plot_dir = os.path.join(out_dir, "plots")
    os.makedirs(plot_dir, exist_ok=True)
    for name, block in blocks.items():
        atomic_write(os.path.join(plot_dir, name + ".csv"), block.to_csv(index=False, lineterminator="\n"))
        if png:
            from .visualize import save_window_plot

            save_window_plot(name, block, os.path.join(plot_dir, name + ".png"))
    atomic_write(os.path.join(out_dir, "report.json"), report.to_json())
    logger.info("wrote %d plot block(s) to %s", len(blocks), plot_dir)


def write_json(path, doc):
    atomic_write(path, json.dumps(_finite(doc), indent=2, sort_keys=True))


# %% STAGE ARTIFACTS


def save_detection(result, out_dir):
    windows_train = [w for ws in result.train_windows.values() for w in ws]
    windows_test = [w for ws in result.test_windows.values() for w in ws]
    write_windows(windows_train, os.path.join(out_dir, "windows_train.csv"))
    write_windows(windows_test, os.path.join(out_dir, "windows_test.csv"))
    write_json(os.path.join(out_dir, "detection.json"), result.diagnostics())
    for symbol, d in result.detections.items():
        atomic_write(os.path.join(out_dir, "arima", symbol + ".json"), d.model.to_json())


def load_detection(config):
    train = read_windows(os.path.join(config.out_dir, "windows_train.csv"))
    test = read_windows(os.path.join(config.out_dir, "windows_test.csv"))
    return group_by_symbol(train, config.symbols), group_by_symbol(test, config.symbols)


def save_cells(cells, out_dir):
    doc = []
    for cell in cells:
        models = {}
        for key, model in cell.models.items():
            stem = "{0}_{1}_{2}".format(cell.variant.label, cell.scale, slug(key))
            if cell.variant.model_class == model_classes.sarimax:
                rel = os.path.join("models", stem + ".json")
                atomic_write(os.path.join(out_dir, rel), model.to_json())
            else:
                rel = os.path.join("models", stem + ".npz")
                model.save(os.path.join(out_dir, rel))
            models[key] = {"file": rel, "n_windows": cell.sizes[key]}
        doc.append(
            {
                "model": cell.variant.label,
                "model_class": cell.variant.model_class,
                "epochs": cell.variant.epochs,
                "scale": cell.scale,
                "seconds": cell.seconds,
                "models": models,
                "skipped": cell.skipped,
            }
        )
    write_json(os.path.join(out_dir, "training.json"), {"cells": doc})


def load_cells(config):
    with open(os.path.join(config.out_dir, "training.json"), encoding="utf-8") as f:
        doc = json.load(f)
    cells = []
    for entry in doc["cells"]:
        variant = Variant(entry["model"], entry["model_class"], entry["epochs"])
        cell = TrainedCell(variant, entry["scale"], seconds=entry["seconds"], skipped=dict(entry["skipped"]))
        for key, meta in entry["models"].items():
            path = os.path.join(config.out_dir, meta["file"])
            if variant.model_class == model_classes.sarimax:
                with open(path, encoding="utf-8") as f:
                    cell.models[key] = sarimax.SarimaxModel.from_json(f.read())
            else:
                cell.models[key] = SentimentLstm.load(path, config.backend)
            cell.sizes[key] = meta["n_windows"]
        cells.append(cell)
    return cells


def save_evaluation(report, out_dir):
    atomic_write(os.path.join(out_dir, "predictions.csv"), predictions_frame(report.windows).to_csv(index=False, lineterminator="\n"))
    atomic_write(os.path.join(out_dir, "report.json"), report.to_json())


def load_report(config):
    """ Rebuilds the report from report.json and predictions.csv """
    with open(os.path.join(config.out_dir, "report.json"), encoding="utf-8") as f:
        doc = json.load(f)
    nan = float("nan")
    cells = []
    for c in doc["cells"]:
        c = {k: (nan if v is None and k in ("accuracy", "seconds_per_symbol") else v) for k, v in c.items()}
        cells.append(CellResult(**c))
    windows = read_predictions(os.path.join(config.out_dir, "predictions.csv"))
    return EvaluationReport(cells, windows, doc.get("detection", {}), doc.get("failures", {}))


# %% EXPERIMENT


def run_detect(config, progress=False):
    data = ingest(config)
    result = detect(config, data, progress)
    save_detection(result, config.out_dir)
    return result


def run_train(config, progress=False):
    train, _ = load_detection(config)
    cells = train_cells(config, train, progress)
    save_cells(cells, config.out_dir)
    return cells


def run_evaluate(config):
    train, test = load_detection(config)
    for scale in config.scales:
        leakage_check(build_datasets(train, scale, config.symbols), test)
    report = evaluate_cells(config, load_cells(config), test)
    with open(os.path.join(config.out_dir, "detection.json"), encoding="utf-8") as f:
        report.detection = json.load(f)
    report.failures = {s: d["error"] for s, d in report.detection.items() if d.get("error")}
    save_evaluation(report, config.out_dir)
    return report


def run_report(config, png=False):
    report = load_report(config)
    _, test = load_detection(config)
    problems = audit(report)
    for problem in problems:
        logger.warning("audit: %s", problem)
    emit_results(report, [w for ws in test.values() for w in ws], config.out_dir, png)
    return report


def run_experiment(config, progress=False, png=False):
    """ Every stage in one process; writes all stage artifacts under ``config.out_dir``

    Returns:
        EvaluationReport
    """
    data = ingest(config)
    detection = detect(config, data, progress)
    save_detection(detection, config.out_dir)
    train, test = detection.train_windows, detection.test_windows
    for scale in config.scales:
        leakage_check(build_datasets(train, scale, config.symbols), test)
    cells = train_cells(config, train, progress)
    save_cells(cells, config.out_dir)
    report = evaluate_cells(config, cells, test)
    report.detection = detection.diagnostics()
    report.failures = dict(detection.failures)
    save_evaluation(report, config.out_dir)
    for problem in audit(report):
        logger.warning("audit: %s", problem)
    emit_results(report, [w for ws in test.values() for w in ws], config.out_dir, png)
    return report
