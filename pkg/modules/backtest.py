# ============================================================
# backtest.py
# Buy-and-hold evaluation of a portfolio: capital split by weights
# at the entry prices, valued at actual or predicted exit prices.
#
# Conventions:
# - Long-only; fractional shares kept at full precision.
# - No transaction costs, dividends or rebalancing.
# - return_pct = (value / capital - 1) * 100
# ============================================================

import logging
import os
from dataclasses import dataclass
from typing import Mapping, Optional, Tuple

import numpy as np
import pandas as pd

from modules.errors import (
    ArgumentError,
    DomainError,
    MissingDataError,
    ParseError,
    UnsupportedShortError,
)
from modules.utils import read_json, to_date

logger = logging.getLogger(__name__)

ACTUAL = "actual"
PREDICTED = "predicted"


@dataclass(frozen=True)
class Allocation:
    capital: float
    tickers: Tuple[str, ...]
    weights: np.ndarray
    entry_prices: np.ndarray
    amounts: np.ndarray
    shares: np.ndarray

    @property
    def invested(self) -> float:
        return float(self.amounts.sum())

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "weight": self.weights,
                "amount_invested": self.amounts,
                "entry_price": self.entry_prices,
                "shares": self.shares,
            },
            index=pd.Index(self.tickers, name="ticker"),
        )


@dataclass(frozen=True)
class BacktestReport:
    kind: str
    tickers: Tuple[str, ...]
    exit_prices: np.ndarray
    exit_values: np.ndarray
    capital: float

    @property
    def value(self) -> float:
        return float(self.exit_values.sum())

    @property
    def return_pct(self) -> float:
        return (self.value / self.capital - 1.0) * 100.0

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "capital": self.capital,
            "value": self.value,
            "return_pct": self.return_pct,
            "rows": [
                {"ticker": t, "exit_price": p, "exit_value": v}
                for t, p, v in zip(self.tickers, self.exit_prices, self.exit_values)
            ],
        }


# ============================================================
# 1. Allocation
# ============================================================

def _check_capital(capital: float):
    if not np.isfinite(capital) or capital <= 0:
        raise DomainError(f"Capital must be > 0, got {capital}.")


def _prices_for(tickers, prices: Mapping[str, float], what: str) -> np.ndarray:
    values = []
    for t in tickers:
        if t not in prices or prices[t] is None or pd.isna(prices[t]):
            raise MissingDataError(f"No {what} price for {t}.")
        p = float(prices[t])
        if p <= 0:
            raise DomainError(f"{what.capitalize()} price for {t} must be > 0, got {p}.")
        values.append(p)
    return np.asarray(values, dtype=float)


def allocate(capital: float, weights: Mapping[str, float], entry_prices: Mapping[str, float]) -> Allocation:
    """amount_i = capital * w_i, shares_i = amount_i / entry_price_i."""
    _check_capital(capital)
    tickers = tuple(weights.keys())
    if not tickers:
        raise ArgumentError("Cannot allocate an empty portfolio.")
    w = np.asarray([float(weights[t]) for t in tickers], dtype=float)
    if not np.isfinite(w).all():
        raise DomainError("Weights must be finite.")
    shorts = [t for t, x in zip(tickers, w) if x < 0]
    if shorts:
        raise UnsupportedShortError(
            f"Backtest is long-only; negative weight for {', '.join(shorts)}."
        )

    prices = _prices_for(tickers, entry_prices, "entry")
    amounts = capital * w
    return Allocation(float(capital), tickers, w, prices, amounts, amounts / prices)


def allocation_from_shares(capital: float, shares: Mapping[str, float], entry_prices: Mapping[str, float]) -> Allocation:
    """Allocation from given share counts; weights are implied by amount / capital."""
    _check_capital(capital)
    tickers = tuple(shares.keys())
    if not tickers:
        raise ArgumentError("Cannot allocate an empty portfolio.")
    n = np.asarray([float(shares[t]) for t in tickers], dtype=float)
    if (n < 0).any():
        raise UnsupportedShortError("Backtest is long-only; share counts must be >= 0.")
    prices = _prices_for(tickers, entry_prices, "entry")
    amounts = n * prices
    return Allocation(float(capital), tickers, amounts / capital, prices, amounts, n)


# ============================================================
# 2. Valuation
# ============================================================

def _value(alloc: Allocation, exit_prices: Mapping[str, float], kind: str) -> BacktestReport:
    prices = _prices_for(alloc.tickers, exit_prices, "predicted" if kind == PREDICTED else "exit")
    return BacktestReport(kind, alloc.tickers, prices, alloc.shares * prices, alloc.capital)


def realize(alloc: Allocation, exit_prices: Mapping[str, float]) -> BacktestReport:
    return _value(alloc, exit_prices, ACTUAL)


def predicted_report(alloc: Allocation, predicted_prices: Mapping[str, float]) -> BacktestReport:
    return _value(alloc, predicted_prices, PREDICTED)


# ============================================================
# 3. Summary
# ============================================================

SUMMARY_COLUMNS = ["Sector", "Optimum Portfolio (%)", "Eigen Portfolio (%)", "Predicted (%)"]


def summary(reports: Mapping[str, Mapping[str, float]]) -> pd.DataFrame:
    """One row per sector (sorted by name): optimum, eigen and predicted return %."""
    if not reports:
        raise ArgumentError("Summary needs at least one sector.")
    rows = []
    for sector in sorted(reports):
        r = reports[sector]
        rows.append([sector, r.get("optimum", np.nan), r.get("eigen", np.nan), r.get("predicted", np.nan)])
    return pd.DataFrame(rows, columns=SUMMARY_COLUMNS)


def report_table(alloc: Allocation, report: BacktestReport) -> pd.DataFrame:
    """Allocation and valuation in the published table layout, with a Total row."""
    price_col = "Pred Price" if report.kind == PREDICTED else "Exit Price"
    df = pd.DataFrame(
        {
            "Stock": list(alloc.tickers),
            "Wts": alloc.weights,
            "Amnt Invstd": alloc.amounts,
            "Entry Price": alloc.entry_prices,
            "No of Stocks": alloc.shares,
            price_col: report.exit_prices,
            "Value": report.exit_values,
        }
    )
    total = {
        "Stock": "Total",
        "Wts": alloc.weights.sum(),
        "Amnt Invstd": alloc.invested,
        "Entry Price": np.nan,
        "No of Stocks": np.nan,
        price_col: np.nan,
        "Value": report.value,
    }
    return pd.concat([df, pd.DataFrame([total])], ignore_index=True)


# ============================================================
# 4. Fixtures (printed tables as JSON)
# ============================================================

@dataclass(frozen=True)
class BacktestFixture:
    sector: str
    portfolio: str
    capital: float
    entry_date: object
    exit_date: object
    rows: pd.DataFrame

    @property
    def has_predictions(self) -> bool:
        return "predicted_price" in self.rows and self.rows["predicted_price"].notna().all()


@dataclass(frozen=True)
class FixtureResult:
    fixture: BacktestFixture
    allocation: Allocation
    actual: BacktestReport
    predicted_allocation: Optional[Allocation] = None
    predicted: Optional[BacktestReport] = None


def load_fixture(path) -> BacktestFixture:
    name = os.path.basename(str(path))
    try:
        doc = read_json(str(path))
    except ValueError as e:
        raise ParseError(getattr(e, "lineno", 1), f"{name}: {e}") from e
    if not isinstance(doc, dict):
        raise MissingDataError(f"{name}: a fixture must be a JSON object.")
    for key in ("sector", "entry_date"):
        if doc.get(key) in (None, ""):
            raise MissingDataError(f"{name}: fixture lacks '{key}'.")
    rows = pd.DataFrame(doc.get("rows") or [])
    for col in ("ticker", "weight", "entry_price", "exit_price"):
        if col not in rows:
            raise MissingDataError(f"{name}: fixture rows lack '{col}'.")
    try:
        entry_date = to_date(doc["entry_date"])
        exit_date = to_date(doc["exit_date"]) if doc.get("exit_date") else None
    except ValueError as e:
        raise DomainError(f"{name}: invalid fixture date ({e}).") from e
    logger.debug(f"Loaded fixture {name} ({len(rows)} rows)")
    return BacktestFixture(
        sector=str(doc["sector"]),
        portfolio=str(doc.get("portfolio", "optimum")),
        capital=float(doc.get("capital", 100000.0)),
        entry_date=entry_date,
        exit_date=exit_date,
        rows=rows,
    )


def run_fixture(fixture: BacktestFixture) -> FixtureResult:
    rows = fixture.rows
    entry = dict(zip(rows["ticker"], rows["entry_price"]))
    alloc = allocate(fixture.capital, dict(zip(rows["ticker"], rows["weight"])), entry)
    actual = realize(alloc, dict(zip(rows["ticker"], rows["exit_price"])))

    pred_alloc = pred = None
    if fixture.has_predictions:
        pred_alloc = alloc
        if "predicted_shares" in rows and rows["predicted_shares"].notna().any():
            # printed share counts override weight-implied ones where given
            shares = {
                t: (s if pd.notna(s) else a)
                for t, s, a in zip(rows["ticker"], rows["predicted_shares"], alloc.shares)
            }
            pred_alloc = allocation_from_shares(fixture.capital, shares, entry)
        pred = predicted_report(pred_alloc, dict(zip(rows["ticker"], rows["predicted_price"])))

    return FixtureResult(fixture, alloc, actual, pred_alloc, pred)
