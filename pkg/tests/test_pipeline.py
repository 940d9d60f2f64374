# %%
import json
import os

import numpy as np
import pandas as pd
import pytest
from numpy.testing import assert_allclose

from anomcast.config import ExperimentConfig
from anomcast.core.exceptions import DomainError, ValidationError
from anomcast.core.series import AnomalyWindow, PriceSeries, SentimentSeries, TradingDay, write_prices
from anomcast.lstm import SentimentLstm
from anomcast.pipeline import (
    NOT_AVAILABLE,
    RESULT_COLUMNS,
    CellResult,
    EvaluationReport,
    TrainedCell,
    Variant,
    audit,
    build_datasets,
    emit_results,
    evaluate,
    evaluate_cells,
    ingest,
    leakage_check,
    load_cells,
    load_report,
    read_windows,
    run_evaluate,
    save_cells,
    save_evaluation,
    score_window,
    train_cells,
    variants,
    write_json,
    write_windows,
)
from anomcast.sarimax import SarimaxModel, SarimaxOrder
from anomcast.sentiment import save_scores

INDUSTRIES = {"UAL": "Airlines", "AAL": "Airlines", "AAPL": "Consumer Electronics"}


def config_for(tmp_path, **overrides):
    config = ExperimentConfig(
        symbols=dict(INDUSTRIES),
        prices_dir=str(tmp_path / "prices"),
        sentiments_dir=str(tmp_path / "sentiment"),
        out_dir=str(tmp_path / "out"),
        fallback_year=None,
    )
    return config.replace(**overrides)


def window_of(symbol, index, year=2018, seed=0):
    rng = np.random.default_rng(seed + 31 * index)
    dates = [d.date() for d in pd.bdate_range("{0}-01-08".format(year), periods=7 * (index + 1))][-7:]
    days = tuple(TradingDay(d, 7 * index + k) for k, d in enumerate(dates))
    returns = rng.uniform(-0.03, 0.03, 7)
    return AnomalyWindow(symbol, days, returns, np.round(rng.uniform(-1, 1, 7), 3), 50.0 * np.cumprod(1.0 + returns))


def windows_by_symbol(counts, year=2018):
    return {s: [window_of(s, i, year, seed=len(s)) for i in range(n)] for s, n in counts.items()}


def null_cell(scale="single", pools=("UAL", "AAL", "AAPL")):
    cell = TrainedCell(Variant("sarimax", "sarimax"), scale)
    for pool in pools:
        cell.models[pool] = SarimaxModel(SarimaxOrder(), aic=0.0)
        cell.sizes[pool] = 5
    return cell


# %% ACCURACY


def test_evaluate_examples():
    assert evaluate([101.5, 99.0, 87.25], [101.5, 99.0, 87.25]) == 100.0
    assert_allclose(evaluate([308.9663321], [298.920013]), 96.639, atol=0.01)
    assert_allclose(evaluate([110.0, 100.0, 90.0], [100.0, 100.0, 100.0]), 93.3333333, atol=1e-6)


def test_evaluate_is_scale_free():
    F, A = np.array([10.2, 9.7, 10.9]), np.array([10.0, 10.1, 10.5])
    assert_allclose(evaluate(F * 7.3, A * 7.3), evaluate(F, A), rtol=1e-12)


def test_evaluate_rejects_non_positive_actuals():
    with pytest.raises(DomainError):
        evaluate([1.0, 1.0, 1.0], [1.0, 0.0, 1.0])


# %% POOLS


def test_build_datasets_scales():
    windows = windows_by_symbol({"UAL": 3, "AAL": 2, "AAPL": 4})
    universal = build_datasets(windows, "universal", INDUSTRIES)
    assert list(universal) == ["universal"]
    assert len(universal["universal"]) == 9
    industry = build_datasets(windows, "industry", INDUSTRIES)
    assert {k: len(v) for k, v in industry.items()} == {"Airlines": 5, "Consumer Electronics": 4}
    single = build_datasets(windows, "single", INDUSTRIES)
    assert single["AAL"] == windows["AAL"]


def test_leakage_check():
    train = windows_by_symbol({"UAL": 3, "AAPL": 2}, year=2018)
    test = windows_by_symbol({"UAL": 2}, year=2019)
    assert leakage_check(build_datasets(train, "universal", INDUSTRIES), test)
    with pytest.raises(ValidationError):
        leakage_check(build_datasets(train, "universal", INDUSTRIES), {"UAL": train["UAL"][:1]})


def test_variants_follow_the_epoch_grid(tmp_path):
    labels = [v.label for v in variants(config_for(tmp_path, epochs=(10, 100, 1000)))]
    assert labels == ["sarimax", "lstm_e10", "lstm_e100", "lstm_e1000"]
    assert [v.label for v in variants(config_for(tmp_path))] == ["sarimax", "lstm"]


# %% WINDOW FILES


def test_windows_csv_round_trip(tmp_path):
    windows = [w for ws in windows_by_symbol({"UAL": 3, "AAPL": 2}).values() for w in ws]
    path = tmp_path / "windows.csv"
    write_windows(windows, path)
    assert read_windows(path) == windows
    frame = pd.read_csv(path)
    assert len(frame) == 35
    assert frame["Outliers"].tolist()[:7] == [0, 0, 0, 1, 0, 0, 0]


def test_read_windows_rejects_misplaced_flag(tmp_path):
    path = tmp_path / "windows.csv"
    write_windows([window_of("UAL", 0)], path)
    lines = path.read_text().splitlines()
    lines[4], lines[5] = lines[4].replace(",1,", ",0,"), lines[5].replace(",0,", ",1,", 1)
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(ValidationError):
        read_windows(path)


# %% SCORING AND REPORTS


def test_score_window_with_a_null_model(tmp_path):
    window = window_of("UAL", 0)
    result = score_window(Variant("sarimax", "sarimax"), "single", "UAL", SarimaxModel(SarimaxOrder()), window, config_for(tmp_path))
    assert result.predicted_prices == (window.anchor_price,) * 3
    assert result.actual_prices == window.target_prices
    assert_allclose(result.accuracy, evaluate([window.anchor_price] * 3, window.target_prices), rtol=1e-12)


def test_report_files_and_audit(tmp_path):
    config = config_for(tmp_path)
    test = windows_by_symbol({"UAL": 2, "AAL": 1, "AAPL": 2}, year=2019)
    report = evaluate_cells(config, [null_cell()], test)
    cell = report.cell("sarimax", "single")
    assert cell.n_windows == 5 and cell.n_symbols == 3
    assert_allclose(cell.accuracy, np.mean([w.accuracy for w in report.windows]), rtol=1e-15)
    assert audit(report) == []

    flat = [w for ws in test.values() for w in ws]
    emit_results(report, flat, config.out_dir)
    results = pd.read_csv(tmp_path / "out" / "results.csv", dtype=str, keep_default_na=False)
    assert list(results.columns) == RESULT_COLUMNS
    assert len(results) == 35
    assert results["Predicted Price"].tolist()[:4] == [NOT_AVAILABLE] * 4
    assert float(results["Predicted Price"][4]) == flat[0].anchor_price
    plots = sorted(p.name for p in (tmp_path / "out" / "plots").iterdir())
    assert plots == sorted(w.name + ".csv" for w in flat)

    save_evaluation(report, config.out_dir)
    back = load_report(config)
    assert back.cells == report.cells
    assert back.windows == report.windows

    report.cells[0].accuracy += 0.5
    assert audit(report)


def test_empty_report_writes_headers_only(tmp_path):
    emit_results(EvaluationReport(), [], str(tmp_path))
    assert (tmp_path / "results.csv").read_text().strip() == ",".join(RESULT_COLUMNS)
    assert list((tmp_path / "plots").iterdir()) == []


def test_missing_pool_model_is_recorded(tmp_path):
    test = windows_by_symbol({"UAL": 1, "AAPL": 1}, year=2019)
    report = evaluate_cells(config_for(tmp_path), [null_cell(pools=("UAL",))], test)
    cell = report.cells[0]
    assert cell.n_symbols == 1
    assert "AAPL" in cell.skipped


# %% TRAINING CELLS


def test_train_cells_skips_small_and_empty_pools(tmp_path):
    config = config_for(tmp_path, models=("sarimax",), scales=("single",), sarimax_max_sum=0, sarimax_max_seasonal_sum=0)
    train = windows_by_symbol({"UAL": 6, "AAPL": 2, "AAL": 0})
    (cell,) = train_cells(config, train)
    assert list(cell.models) == ["UAL"]
    assert set(cell.skipped) == {"AAPL", "AAL"}
    assert cell.sizes["UAL"] == 6


def test_sarimax_cells_fit_one_model_per_target(tmp_path):
    config = config_for(
        tmp_path, models=("sarimax",), scales=("universal", "industry"), sarimax_max_sum=0, sarimax_max_seasonal_sum=0
    )
    train = windows_by_symbol({"UAL": 4, "AAL": 3, "AAPL": 2})
    universal, industry = train_cells(config, train)
    assert list(universal.models) == ["UAL", "AAL", "AAPL"]
    assert set(universal.sizes.values()) == {9}
    assert universal.models["UAL"] == universal.models["AAPL"]
    assert set(industry.models) == {"UAL", "AAL"}
    assert industry.sizes["AAL"] == 7
    assert "AAPL" in industry.skipped


def test_lstm_cells_share_one_network_per_pool(tmp_path):
    config = config_for(tmp_path, models=("lstm",), scales=("universal",), epochs=(1,))
    (cell,) = train_cells(config, windows_by_symbol({"UAL": 2, "AAL": 1, "AAPL": 2}))
    assert list(cell.models) == ["universal"]
    assert cell.sizes["universal"] == 5


def test_cost_ratios_compare_time_per_target_symbol():
    def cell(model, scale, seconds, n_symbols):
        return CellResult(model, scale, 99.0, seconds, seconds / n_symbols, 6, n_symbols, 1)

    report = EvaluationReport(
        [
            cell("sarimax", "universal", 30.0, 3),
            cell("sarimax", "single", 6.0, 3),
            cell("lstm", "universal", 3.0, 3),
            cell("lstm", "industry", 3.5, 3),
            cell("lstm", "single", 4.0, 2),
            cell("lstm_e10", "universal", 1.0, 3),
        ]
    )
    ratios = report.cost_ratios()
    assert set(ratios) == {"sarimax", "lstm"}
    assert_allclose(ratios["sarimax"], 5.0, rtol=1e-12)
    assert_allclose(ratios["lstm"], 0.5, rtol=1e-12)


def test_saved_cells_load_back(tmp_path):
    config = config_for(tmp_path)
    lstm = TrainedCell(Variant("lstm", "lstm", 3), "universal", {"universal": SentimentLstm(seed=1)}, {"universal": 9})
    cells = [null_cell(), lstm]
    save_cells(cells, config.out_dir)
    back = load_cells(config)
    assert [c.variant for c in back] == [c.variant for c in cells]
    assert back[0].models["UAL"] == cells[0].models["UAL"]
    window = window_of("UAL", 0)
    assert_allclose(back[1].models["universal"].predict(window), lstm.models["universal"].predict(window), rtol=0, atol=0)


def test_evaluate_stage_carries_detection_failures(tmp_path):
    config = config_for(tmp_path)
    out = config.out_dir
    train = windows_by_symbol({"UAL": 2, "AAPL": 2})
    test = windows_by_symbol({"UAL": 1, "AAPL": 1}, year=2019)
    write_windows([w for ws in train.values() for w in ws], os.path.join(out, "windows_train.csv"))
    write_windows([w for ws in test.values() for w in ws], os.path.join(out, "windows_test.csv"))
    save_cells([null_cell()], out)
    reason = "DegenerateInputError: every ARIMA candidate met degenerate data"
    write_json(
        os.path.join(out, "detection.json"),
        {"UAL": {"symbol": "UAL", "order": "(1,0,0)", "error": None}, "AAL": {"symbol": "AAL", "error": reason}},
    )
    report = run_evaluate(config)
    assert report.failures == {"AAL": reason}
    assert report.cell("sarimax", "single").n_symbols == 2
    with open(os.path.join(out, "report.json")) as f:
        assert json.load(f)["failures"] == {"AAL": reason}


# %% INGEST


def test_ingest_zero_fills_missing_sentiment(tmp_path):
    config = config_for(tmp_path, symbols={"UAL": "Airlines", "AAL": "Airlines"})
    dates = [d.date() for d in pd.bdate_range("2018-01-02", periods=10)]
    for symbol in ("UAL", "AAL"):
        write_prices(PriceSeries(symbol, dates, np.linspace(20, 30, 10)), tmp_path / "prices" / (symbol + ".csv"))
    save_scores(SentimentSeries("UAL", dates[:2], [0.5, -0.5]), tmp_path / "sentiment" / "UAL.csv")
    data = ingest(config)
    assert len(data["UAL"].sentiments) == 2
    assert len(data["AAL"].sentiments) == 10
    assert np.all(data["AAL"].sentiments.values == 0.0)


def test_ingest_requires_price_files(tmp_path):
    with pytest.raises(FileNotFoundError):
        ingest(config_for(tmp_path))


def test_ingest_rejects_negative_prices(tmp_path):
    config = config_for(tmp_path, symbols={"UAL": "Airlines"})
    (tmp_path / "prices").mkdir()
    (tmp_path / "prices" / "UAL.csv").write_text("Date,AdjClose\n2018-01-02,10\n2018-01-03,-1\n")
    with pytest.raises(ValidationError):
        ingest(config)
