# ============================================================
# pipeline.py
# Stage commands of a sector run. Stages talk through files in
# <output_dir>/<sector_slug>/ so each one can be rerun alone:
#
#   ingest   -> prices_train.csv, coverage.csv, stats.json
#   frontier -> frontier.json, frontier_weights.csv, frontier.svg
#   eigen    -> eigen.json, eigen_candidates.csv, explained_variance.svg
#   train    -> checkpoints/<ticker>.json, training_summary.csv
#   predict  -> predictions.json, predictions.csv
#   backtest -> table_*.csv, bundle.json
#   report   -> <output_dir>/summary.csv, summary.json (all bundles)
#   plot     -> figures for one ticker + frontier / eigen figures
# ============================================================

import glob
import logging
import os
from dataclasses import dataclass, field
from datetime import timedelta
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
from tqdm import tqdm

from modules import backtest as bt
from modules.config import RunConfig
from modules.eigen import EigenResult, eigen_selection_from_dict, run_eigen
from modules.errors import ArgumentError, MissingArtifactError, MissingDataError
from modules.frontier import FrontierResult, frontier_from_dict, run_frontier
from modules.lstm_model import (
    load_checkpoint,
    predict_next,
    predict_path,
    save_checkpoint,
    train,
)
from modules.market_data import (
    PricePanel,
    PriceSeries,
    align,
    annualized_volatility,
    coverage_table,
    daily_returns,
    load_prices_file,
    price_on_or_before,
    select_tickers,
    slice_panel,
    write_prices,
)
from modules.plots import (
    plot_explained_variance,
    plot_frontier,
    plot_prediction,
    plot_training_history,
)
from modules.portfolio_core import estimate_return_stats
from modules.report_generator import (
    write_backtest_table,
    write_eigen_outputs,
    write_frontier_outputs,
    write_summary,
)
from modules.utils import ensure_directory, read_json, sector_slug, write_json

logger = logging.getLogger(__name__)


@dataclass
class SectorReportBundle:
    sector: str
    source: str
    optimum: Dict
    eigen: Dict
    predictions: Dict[str, float]
    reports: Dict[str, Optional[dict]] = field(default_factory=dict)

    @property
    def summary_row(self) -> Dict[str, float]:
        def pct(key):
            r = self.reports.get(key)
            return r["return_pct"] if r else np.nan

        return {"optimum": pct("optimum"), "eigen": pct("eigen"), "predicted": pct("predicted")}

    def to_dict(self) -> dict:
        return {
            "sector": self.sector,
            "source": self.source,
            "optimum": self.optimum,
            "eigen": self.eigen,
            "predictions": self.predictions,
            "reports": self.reports,
            "summary": self.summary_row,
        }


# ============================================================
# Shared helpers
# ============================================================

def _artifact(config: RunConfig, name: str) -> str:
    return os.path.join(config.sector_dir, name)


def _require(path: str, producer: str) -> str:
    if not os.path.exists(path):
        raise MissingArtifactError(path, producer)
    return path


def _checkpoint_path(config: RunConfig, ticker: str) -> str:
    return os.path.join(config.sector_dir, "checkpoints", f"{ticker}.json")


def load_universe(config: RunConfig) -> List[PriceSeries]:
    """Price series of the configured tickers (all tickers in the file if none given)."""
    if not os.path.exists(config.data_path):
        raise MissingDataError(f"Price file not found: {config.data_path}")
    series = load_prices_file(config.data_path)
    if config.tickers:
        series = select_tickers(series, config.tickers)
    if not series:
        raise MissingDataError(f"No price rows in {config.data_path}")
    return series


def train_panel(config: RunConfig, series: Optional[Sequence[PriceSeries]] = None) -> PricePanel:
    series = series if series is not None else load_universe(config)
    return slice_panel(align(series), config.train_start, config.train_end)


def _train_stats(config: RunConfig):
    returns = daily_returns(train_panel(config))
    return returns, estimate_return_stats(returns, config.trading_days)


def _ticker_closes(series: PriceSeries, start, end) -> pd.Series:
    return series.closes.loc[pd.Timestamp(start):pd.Timestamp(end)]


# ============================================================
# ingest / frontier / eigen
# ============================================================

def cmd_ingest(config: RunConfig) -> PricePanel:
    logger.info(f"=== Ingest for sector: {config.sector} ===")
    series = load_universe(config)
    panel = train_panel(config, series)
    returns = daily_returns(panel)
    stats = estimate_return_stats(returns, config.trading_days)

    ensure_directory(config.sector_dir)
    prices_path = write_prices(panel.series(), _artifact(config, "prices_train.csv"))
    logger.info(f"  -> Aligned training prices saved: {prices_path} "
                f"({len(panel.dates)} dates x {len(panel.tickers)} tickers)")

    cov_path = _artifact(config, "coverage.csv")
    coverage_table(series, config.trading_days).to_csv(cov_path, index=False)
    logger.info(f"  -> Coverage saved: {cov_path}")

    doc = stats.to_dict()
    doc["volatility_from_returns"] = annualized_volatility(returns, config.trading_days).to_dict()
    doc["train_window"] = [config.train_start, config.train_end]
    doc["dates"] = len(panel.dates)
    stats_path = write_json(doc, _artifact(config, "stats.json"))
    logger.info(f"  -> Return statistics saved: {stats_path}")
    return panel


def cmd_frontier(config: RunConfig) -> FrontierResult:
    logger.info(f"=== Frontier for sector: {config.sector} ===")
    _, stats = _train_stats(config)
    result = run_frontier(stats, config.sample_count, config.seed, config.rf, config.frontier_bins)

    ensure_directory(config.sector_dir)
    write_frontier_outputs(result, config.sector_dir)
    plot_frontier(result, _artifact(config, "frontier.svg"), title=f"Efficient frontier - {config.sector}")
    return result


def cmd_eigen(config: RunConfig) -> EigenResult:
    logger.info(f"=== Eigen portfolios for sector: {config.sector} ===")
    returns, stats = _train_stats(config)
    result = run_eigen(returns, stats, config.rf, config.variance_target)

    ensure_directory(config.sector_dir)
    write_eigen_outputs(result, config.sector_dir)
    plot_explained_variance(
        result.pca.explained_ratio_all,
        result.pca.k,
        _artifact(config, "explained_variance.svg"),
        title=f"Explained variance - {config.sector}",
    )
    return result


# ============================================================
# train / predict
# ============================================================

def _checkpoint_is_current(path: str, config: RunConfig) -> bool:
    if not os.path.exists(path):
        return False
    try:
        return read_json(path).get("config") == config.lstm.to_dict()
    except ValueError:
        return False


def cmd_train(config: RunConfig, tickers: Optional[Sequence[str]] = None, force: bool = False) -> Dict[str, dict]:
    """One model per ticker on its training-window closes."""
    logger.info(f"=== LSTM training for sector: {config.sector} ===")
    series = load_universe(config)
    if tickers:
        series = select_tickers(series, tickers)

    ensure_directory(os.path.join(config.sector_dir, "checkpoints"))
    results = {}
    for s in tqdm(series, desc="Training", unit="ticker"):
        path = _checkpoint_path(config, s.ticker)
        if not force and _checkpoint_is_current(path, config):
            logger.info(f"  Checkpoint already present - reusing: {path}")
            results[s.ticker] = read_json(path).get("training", {})
            continue

        closes = _ticker_closes(s, config.train_start, config.train_end)
        model, report = train(closes.to_numpy(dtype=float), config.lstm, label=s.ticker)
        save_checkpoint(model, path, report)
        results[s.ticker] = report.to_dict()
        logger.info(f"  -> Checkpoint saved: {path}")

    rows = []
    for ticker, rep in results.items():
        rows.append(
            {
                "ticker": ticker,
                "epochs": rep.get("epochs", 0),
                "train_loss": rep["train_loss"][-1] if rep.get("train_loss") else np.nan,
                "train_mae": rep["train_mae"][-1] if rep.get("train_mae") else np.nan,
                "val_loss": rep["val_loss"][-1] if rep.get("val_loss") else np.nan,
                "val_mae": rep["val_mae"][-1] if rep.get("val_mae") else np.nan,
            }
        )
    summary_path = _artifact(config, "training_summary.csv")
    pd.DataFrame(rows).to_csv(summary_path, index=False)
    logger.info(f"  -> Training summary saved: {summary_path}")
    return results


def cmd_predict(config: RunConfig) -> Dict[str, float]:
    """Predicted close on exit_date from the `lookback` closes before it."""
    logger.info(f"=== Predictions for sector: {config.sector} (exit {config.exit_date}) ===")
    series = load_universe(config)
    day_before = pd.Timestamp(config.exit_date) - timedelta(days=1)

    predicted, actual = {}, {}
    for s in series:
        model = load_checkpoint(_require(_checkpoint_path(config, s.ticker), "train"))
        history = s.closes.loc[:day_before].to_numpy(dtype=float)
        lookback = model.config.lookback
        if len(history) < lookback:
            raise MissingDataError(
                f"{s.ticker}: {len(history)} closes before {config.exit_date}, prediction needs {lookback}."
            )
        predicted[s.ticker] = predict_next(model, history[-lookback:])
        try:
            actual[s.ticker] = price_on_or_before(s, config.exit_date)[1]
        except MissingDataError:
            actual[s.ticker] = None
        logger.info(f"  {s.ticker}: predicted {predicted[s.ticker]:.2f}")

    doc = {"exit_date": config.exit_date, "predicted": predicted, "actual": actual}
    json_path = write_json(doc, _artifact(config, "predictions.json"))
    csv_path = _artifact(config, "predictions.csv")
    pd.DataFrame(
        {"ticker": list(predicted), "predicted": list(predicted.values()),
         "actual": [actual[t] for t in predicted]}
    ).round(2).to_csv(csv_path, index=False)
    logger.info(f"  -> Predictions saved: {json_path}")
    return predicted


def _load_predicted_prices(config: RunConfig) -> Dict[str, float]:
    if config.predicted_prices_path:
        path = config.predicted_prices_path
        if not os.path.exists(path):
            raise MissingDataError(f"Predicted-price file not found: {path}")
        if path.lower().endswith(".csv"):
            df = pd.read_csv(path)
            return dict(zip(df["ticker"].astype(str), df["predicted"].astype(float)))
        doc = read_json(path)
        return {str(k): float(v) for k, v in doc.get("predicted", doc).items()}
    doc = read_json(_require(_artifact(config, "predictions.json"), "predict"))
    return {str(k): float(v) for k, v in doc["predicted"].items()}


# ============================================================
# backtest / report
# ============================================================

def _report_entry(alloc: bt.Allocation, report: bt.BacktestReport) -> dict:
    doc = report.to_dict()
    doc["allocation"] = [
        {"ticker": t, "weight": w, "amount_invested": a, "entry_price": p, "shares": n}
        for t, w, a, p, n in zip(alloc.tickers, alloc.weights, alloc.amounts, alloc.entry_prices, alloc.shares)
    ]
    return doc


def _backtest_from_fixtures(config: RunConfig) -> SectorReportBundle:
    results = {}
    for portfolio, path in config.fixtures.items():
        if not os.path.exists(path):
            raise MissingDataError(f"Backtest fixture not found: {path}")
        results[portfolio] = bt.run_fixture(bt.load_fixture(path))

    bundle = SectorReportBundle(
        sector=config.sector,
        source="fixtures",
        optimum={}, eigen={}, predictions={},
    )
    for portfolio, res in results.items():
        section = {"weights": dict(zip(res.allocation.tickers, res.allocation.weights))}
        setattr(bundle, portfolio, section)
        bundle.reports[portfolio] = _report_entry(res.allocation, res.actual)
        write_backtest_table(res.allocation, res.actual,
                             _artifact(config, f"table_{portfolio}_actual.csv"))

    # predicted table: optimum fixture first, else whichever fixture carries predictions
    for portfolio in ("optimum", "eigen"):
        res = results.get(portfolio)
        if res is not None and res.predicted is not None:
            bundle.predictions = dict(zip(res.predicted.tickers, res.predicted.exit_prices))
            bundle.reports["predicted"] = _report_entry(res.predicted_allocation, res.predicted)
            bundle.reports["predicted"]["portfolio"] = portfolio
            write_backtest_table(res.predicted_allocation, res.predicted,
                                 _artifact(config, f"table_{portfolio}_predicted.csv"))
            break
    return bundle


def _backtest_from_artifacts(config: RunConfig) -> SectorReportBundle:
    frontier = frontier_from_dict(read_json(_require(_artifact(config, "frontier.json"), "frontier")))
    eigen_tickers, eigen_sel = eigen_selection_from_dict(
        read_json(_require(_artifact(config, "eigen.json"), "eigen"))
    )
    predicted = _load_predicted_prices(config)

    series = {s.ticker: s for s in load_universe(config)}
    missing = [t for t in list(frontier.tickers) + eigen_tickers if t not in series]
    if missing:
        raise MissingDataError(f"No price data for ticker(s): {', '.join(sorted(set(missing)))}")
    entry = {t: price_on_or_before(s, config.entry_date)[1] for t, s in series.items()}
    exit_ = {t: price_on_or_before(s, config.exit_date)[1] for t, s in series.items()}

    best = frontier.max_sharpe_sample
    opt_weights = dict(zip(frontier.tickers, best.weights))
    opt_alloc = bt.allocate(config.capital, opt_weights, entry)
    opt_actual = bt.realize(opt_alloc, exit_)
    opt_pred = bt.predicted_report(opt_alloc, predicted)

    bundle = SectorReportBundle(
        sector=config.sector,
        source="pipeline",
        optimum={"weights": opt_weights, "return": best.ann_return,
                 "volatility": best.ann_volatility, "sharpe": best.sharpe},
        eigen={"component": eigen_sel.component_index,
               "weights": dict(zip(eigen_tickers, eigen_sel.weights)),
               "return": eigen_sel.ann_return, "volatility": eigen_sel.ann_volatility,
               "sharpe": eigen_sel.sharpe},
        predictions={t: predicted[t] for t in opt_alloc.tickers},
    )
    bundle.reports["optimum"] = _report_entry(opt_alloc, opt_actual)
    bundle.reports["predicted"] = _report_entry(opt_alloc, opt_pred)
    write_backtest_table(opt_alloc, opt_actual, _artifact(config, "table_optimum_actual.csv"))
    write_backtest_table(opt_alloc, opt_pred, _artifact(config, "table_optimum_predicted.csv"))

    if eigen_sel.has_shorts:
        logger.warning(
            f"  [Warning] Eigen portfolio (component {eigen_sel.component_index}) holds short "
            "positions; the long-only backtest skips it."
        )
        bundle.reports["eigen"] = None
    else:
        eig_alloc = bt.allocate(config.capital, bundle.eigen["weights"], entry)
        eig_actual = bt.realize(eig_alloc, exit_)
        bundle.reports["eigen"] = _report_entry(eig_alloc, eig_actual)
        write_backtest_table(eig_alloc, eig_actual, _artifact(config, "table_eigen_actual.csv"))
    return bundle


def cmd_backtest(config: RunConfig) -> SectorReportBundle:
    logger.info(f"=== Backtest for sector: {config.sector} "
                f"({config.entry_date} -> {config.exit_date}, capital {config.capital:.0f}) ===")
    ensure_directory(config.sector_dir)
    if config.uses_fixtures:
        bundle = _backtest_from_fixtures(config)
    else:
        bundle = _backtest_from_artifacts(config)

    path = write_json(bundle.to_dict(), _artifact(config, "bundle.json"))
    row = bundle.summary_row
    logger.info(
        "  -> Returns (%): optimum {}, eigen {}, predicted {}".format(
            *("n/a" if pd.isna(v) else f"{v:.2f}" for v in (row["optimum"], row["eigen"], row["predicted"]))
        )
    )
    logger.info(f"  -> Bundle saved: {path}")
    return bundle


def cmd_report(config: RunConfig, bundle_paths: Optional[Sequence[str]] = None) -> pd.DataFrame:
    """Summary table over every sector bundle (one row per sector)."""
    logger.info("=== Summary report ===")
    if bundle_paths:
        paths = [_require(p, "backtest") for p in bundle_paths]
    else:
        paths = sorted(glob.glob(os.path.join(config.output_dir, "*", "bundle.json")))
    if not paths:
        raise MissingArtifactError(
            os.path.join(config.output_dir, sector_slug(config.sector), "bundle.json"), "backtest"
        )

    rows = {}
    for p in paths:
        try:
            doc = read_json(p)
        except ValueError as e:
            raise MissingDataError(f"Bundle {p} is not valid JSON ({e}).") from e
        s = doc.get("summary") if isinstance(doc, dict) else None
        if not isinstance(s, dict) or not doc.get("sector"):
            raise MissingDataError(f"Bundle {p} lacks a sector summary.")
        rows[doc["sector"]] = {
            k: (np.nan if s.get(k) is None else float(s[k])) for k in ("optimum", "eigen", "predicted")
        }
        logger.info(f"  Bundle read: {p}")

    table = bt.summary(rows)
    write_summary(table, config.output_dir)
    return table


# ============================================================
# plot
# ============================================================

def cmd_plot_prediction(config: RunConfig, ticker: str) -> Optional[str]:
    """Actual vs predicted closes over [entry_date, exit_date] for one ticker."""
    series = {s.ticker: s for s in load_universe(config)}
    if ticker not in series:
        raise MissingDataError(f"No price data for ticker: {ticker}")
    ckpt = _require(_checkpoint_path(config, ticker), "train")
    model = load_checkpoint(ckpt)

    path_df = predict_path(model, series[ticker].closes, config.entry_date, config.exit_date)
    figures = os.path.join(config.sector_dir, "figures")
    out = plot_prediction(path_df, ticker, os.path.join(figures, f"prediction_{ticker}.svg"))
    plot_training_history(read_json(ckpt).get("training", {}), ticker,
                          os.path.join(figures, f"training_{ticker}.svg"))
    return out


def cmd_plot(config: RunConfig, ticker: Optional[str] = None) -> List[str]:
    logger.info(f"=== Figures for sector: {config.sector} ===")
    written = []
    frontier_doc = _artifact(config, "frontier.json")
    if os.path.exists(frontier_doc):
        written.append(plot_frontier(frontier_from_dict(read_json(frontier_doc)),
                                     _artifact(config, "frontier.svg"),
                                     title=f"Efficient frontier - {config.sector}"))
    eigen_doc = _artifact(config, "eigen.json")
    if os.path.exists(eigen_doc):
        doc = read_json(eigen_doc)
        written.append(plot_explained_variance(doc["explained_ratio_all"], doc["k"],
                                               _artifact(config, "explained_variance.svg"),
                                               title=f"Explained variance - {config.sector}"))

    ticker = ticker or config.plot_ticker or (config.tickers[0] if config.tickers else None)
    if ticker is None:
        if not written:
            raise ArgumentError("Nothing to plot: no frontier/eigen result and no ticker given.")
        return written
    out = cmd_plot_prediction(config, ticker)
    if out:
        written.append(out)
    return written
