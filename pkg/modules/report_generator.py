# ============================================================
# report_generator.py
# JSON and CSV writers for the result tables of a sector run.
#
# CSV tables keep the published column order; weights are written
# with 4 decimals, prices / amounts / share counts with 2.
# ============================================================

import logging
import os

import pandas as pd

from modules.backtest import SUMMARY_COLUMNS, report_table
from modules.utils import ensure_directory, write_json

logger = logging.getLogger(__name__)

_FOUR_DECIMALS = {"Wts", "weight", "return", "volatility", "sharpe"}


def _round_table(df: pd.DataFrame) -> pd.DataFrame:
    out = df.copy()
    for col in out.columns:
        if pd.api.types.is_float_dtype(out[col]):
            out[col] = out[col].round(4 if col in _FOUR_DECIMALS else 2)
    return out


def write_table_csv(df: pd.DataFrame, path):
    """Write a table CSV (rounded copy); returns the path."""
    folder = os.path.dirname(str(path))
    if folder:
        ensure_directory(folder)
    _round_table(df).to_csv(path, index=False)
    return str(path)


# ------------------------------------------------------------
# Frontier / eigen
# ------------------------------------------------------------

def write_frontier_outputs(result, sector_dir):
    json_path = write_json(result.to_dict(), os.path.join(sector_dir, "frontier.json"))
    logger.info(f"  -> Frontier result saved: {json_path}")

    df = pd.DataFrame(
        {
            "Stock": list(result.tickers),
            "Min variance Wts": result.min_variance_sample.weights,
            "Optimum risk Wts": result.max_sharpe_sample.weights,
        }
    )
    csv_path = os.path.join(sector_dir, "frontier_weights.csv")
    df.round(4).to_csv(csv_path, index=False)
    logger.info(f"  -> Frontier weights saved: {csv_path}")
    return json_path, csv_path


def write_eigen_outputs(result, sector_dir):
    json_path = write_json(result.to_dict(), os.path.join(sector_dir, "eigen.json"))
    logger.info(f"  -> Eigen result saved: {json_path}")

    rows = []
    for c in result.candidates:
        row = {"component": c.component_index, "return": c.ann_return,
               "volatility": c.ann_volatility, "sharpe": c.sharpe}
        row.update({t: w for t, w in zip(result.pca.tickers, c.weights)})
        rows.append(row)
    csv_path = os.path.join(sector_dir, "eigen_candidates.csv")
    pd.DataFrame(rows).round(4).to_csv(csv_path, index=False)
    logger.info(f"  -> Eigen candidates saved: {csv_path}")
    return json_path, csv_path


# ------------------------------------------------------------
# Backtest tables and summary
# ------------------------------------------------------------

def write_backtest_table(alloc, report, path):
    path = write_table_csv(report_table(alloc, report), path)
    logger.info(f"  -> Backtest table saved: {path} (return {report.return_pct:.2f} %)")
    return path


def summary_display(summary_df: pd.DataFrame) -> pd.DataFrame:
    """Values rendered to 2 decimals (strings); missing values as 'n/a'."""
    out = summary_df.copy()
    for col in SUMMARY_COLUMNS[1:]:
        out[col] = [("n/a" if pd.isna(v) else f"{float(v):.2f}") for v in out[col]]
    return out


def write_summary(summary_df: pd.DataFrame, out_dir):
    ensure_directory(out_dir)
    csv_path = os.path.join(out_dir, "summary.csv")
    summary_display(summary_df).to_csv(csv_path, index=False)

    records = [
        {
            "sector": row[SUMMARY_COLUMNS[0]],
            "optimum": row[SUMMARY_COLUMNS[1]],
            "eigen": row[SUMMARY_COLUMNS[2]],
            "predicted": row[SUMMARY_COLUMNS[3]],
        }
        for _, row in summary_df.iterrows()
    ]
    json_path = write_json({"summary": records}, os.path.join(out_dir, "summary.json"))
    logger.info(f"  -> Summary saved: {csv_path}")
    return csv_path, json_path
