# ============================================================
# market_data.py
# Close-price ingestion, calendar alignment, daily returns and
# annualized volatilities.
#
# Conventions:
# - Input is long-format CSV: header `ticker,date,close`, ISO dates.
# - Only the close price is used (univariate analysis).
# - Missing dates are resolved by calendar intersection, never by fill.
# - Annualization uses TRADING_DAYS (250) trading days per year.
# ============================================================

import logging
import os
from dataclasses import dataclass
from typing import Dict, Iterable, List, Sequence

import numpy as np
import pandas as pd

from modules.errors import (
    AlignmentError,
    ArgumentError,
    DomainError,
    DuplicateObservationError,
    InsufficientDataError,
    MissingDataError,
    ParseError,
    ShapeError,
)

logger = logging.getLogger(__name__)

TRADING_DAYS = 250
CSV_HEADER = ("ticker", "date", "close")


# ============================================================
# 0. Domain types
# ============================================================

@dataclass(frozen=True)
class PriceSeries:
    """Close-price history of one ticker (DatetimeIndex, strictly increasing)."""

    ticker: str
    closes: pd.Series

    def __post_init__(self):
        idx = self.closes.index
        if not isinstance(idx, pd.DatetimeIndex):
            raise ShapeError(f"{self.ticker}: closes must be indexed by dates.")
        if len(idx) > 1 and not (np.diff(idx.asi8) > 0).all():
            raise DomainError(f"{self.ticker}: dates must be strictly increasing.")
        if (self.closes.to_numpy(dtype=float) <= 0).any():
            raise DomainError(f"{self.ticker}: every close must be > 0.")

    @property
    def dates(self) -> List:
        return [ts.date() for ts in self.closes.index]

    @property
    def observations(self) -> List[tuple]:
        return list(zip(self.dates, self.closes.to_numpy(dtype=float).tolist()))

    def __len__(self):
        return len(self.closes)


@dataclass(frozen=True)
class PricePanel:
    """Aligned T x n close matrix; column order is the ticker order."""

    closes: pd.DataFrame

    def __post_init__(self):
        if self.closes.shape[1] < 1:
            raise ShapeError("A price panel needs at least one ticker.")
        if self.closes.isna().to_numpy().any():
            raise AlignmentError("A price panel cannot contain missing prices.")
        if (self.closes.to_numpy(dtype=float) <= 0).any():
            raise DomainError("Every panel close must be > 0.")

    @property
    def tickers(self) -> List[str]:
        return [str(c) for c in self.closes.columns]

    @property
    def dates(self) -> pd.DatetimeIndex:
        return self.closes.index

    @property
    def values(self) -> np.ndarray:
        return self.closes.to_numpy(dtype=float)

    def series(self) -> List[PriceSeries]:
        return [PriceSeries(t, self.closes[t].copy()) for t in self.closes.columns]


@dataclass(frozen=True)
class ReturnMatrix:
    """(T-1) x n matrix of daily simple returns."""

    returns: pd.DataFrame

    @property
    def tickers(self) -> List[str]:
        return [str(c) for c in self.returns.columns]

    @property
    def dates(self) -> pd.DatetimeIndex:
        return self.returns.index

    @property
    def values(self) -> np.ndarray:
        return self.returns.to_numpy(dtype=float)


# ============================================================
# 1. CSV ingestion
# ============================================================

def load_prices(source) -> List[PriceSeries]:
    """
    Parse a UTF-8 long-format CSV stream (`ticker,date,close`).

    Returns one PriceSeries per distinct ticker (first-appearance order),
    observations sorted by date.
    """
    raw = source.read()
    if isinstance(raw, (bytes, bytearray)):
        try:
            text = raw.decode("utf-8")
        except UnicodeDecodeError as e:
            line = raw[:e.start].count(b"\n") + 1
            raise ParseError(line, f"invalid UTF-8 byte at offset {e.start}") from e
    else:
        text = str(raw)
    lines = text.splitlines()

    if not lines:
        raise ParseError(1, "empty input, expected header 'ticker,date,close'")

    header = tuple(h.strip() for h in lines[0].lstrip("\ufeff").split(","))
    if header != CSV_HEADER:
        raise ParseError(1, f"expected header 'ticker,date,close', got '{lines[0]}'")

    records = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        fields = [f.strip() for f in line.split(",")]
        if len(fields) != 3:
            raise ParseError(lineno, f"expected 3 fields, got {len(fields)}")
        if not fields[0]:
            raise ParseError(lineno, "empty ticker")
        records.append((lineno, fields[0], fields[1], fields[2]))

    df = pd.DataFrame(records, columns=["line", "ticker", "date_raw", "close_raw"])
    if df.empty:
        return []

    df["date"] = pd.to_datetime(df["date_raw"], format="%Y-%m-%d", errors="coerce")
    bad_dates = df[df["date"].isna()]
    if not bad_dates.empty:
        row = bad_dates.iloc[0]
        raise ParseError(int(row["line"]), f"invalid date '{row['date_raw']}'")

    df["close"] = pd.to_numeric(df["close_raw"], errors="coerce")
    bad_close = df[~np.isfinite(df["close"].to_numpy(dtype=float))]
    if not bad_close.empty:
        row = bad_close.iloc[0]
        raise ParseError(int(row["line"]), f"invalid close '{row['close_raw']}'")

    non_positive = df[df["close"] <= 0]
    if not non_positive.empty:
        row = non_positive.iloc[0]
        raise DomainError(
            f"Close must be > 0 at line {int(row['line'])} "
            f"({row['ticker']} {row['date_raw']}: {row['close_raw']})"
        )

    dup = df[df.duplicated(subset=["ticker", "date"], keep="first")]
    if not dup.empty:
        row = dup.iloc[0]
        raise DuplicateObservationError(row["ticker"], row["date_raw"], int(row["line"]))

    series = []
    for ticker, group in df.groupby("ticker", sort=False):
        s = group.set_index("date")["close"].astype(float).sort_index()
        s.index.name = "date"
        s.name = ticker
        series.append(PriceSeries(str(ticker), s))

    logger.debug(f"Loaded {len(df)} observations for {len(series)} tickers.")
    return series


def load_prices_file(path) -> List[PriceSeries]:
    with open(path, "rb") as f:
        return load_prices(f)


def write_prices(series: Iterable[PriceSeries], path) -> str:
    """Write series back to the long-format CSV layout read by load_prices."""
    frames = []
    for s in series:
        frames.append(
            pd.DataFrame(
                {
                    "ticker": s.ticker,
                    "date": s.closes.index.strftime("%Y-%m-%d"),
                    "close": s.closes.to_numpy(dtype=float),
                }
            )
        )
    df = pd.concat(frames, ignore_index=True) if frames else pd.DataFrame(columns=list(CSV_HEADER))
    folder = os.path.dirname(str(path))
    if folder:
        os.makedirs(folder, exist_ok=True)
    df.to_csv(path, index=False, columns=list(CSV_HEADER))
    return str(path)


# ============================================================
# 2. Alignment and selection
# ============================================================

def align(series: Sequence[PriceSeries]) -> PricePanel:
    """Inner-join the series on their dates; columns follow the input order."""
    if not series:
        raise ArgumentError("align() needs at least one price series.")

    seen = set()
    for s in series:
        if len(s) == 0:
            raise InsufficientDataError(f"Price series for {s.ticker} is empty.")
        if s.ticker in seen:
            raise ArgumentError(f"Ticker {s.ticker} given twice.")
        seen.add(s.ticker)

    panel = pd.concat([s.closes.rename(s.ticker) for s in series], axis=1, join="inner")
    panel = panel.sort_index()
    panel.index.name = "date"

    if panel.empty:
        raise AlignmentError(
            "No common trading date across tickers: "
            + ", ".join(s.ticker for s in series)
        )

    dropped = {s.ticker: len(s) - len(panel) for s in series if len(s) != len(panel)}
    if dropped:
        logger.debug(f"  Alignment dropped rows per ticker: {dropped}")

    return PricePanel(panel)


def select_tickers(series: Sequence[PriceSeries], tickers: Sequence[str]) -> List[PriceSeries]:
    """Pick `tickers` out of a loaded series list, in the requested order."""
    by_ticker: Dict[str, PriceSeries] = {s.ticker: s for s in series}
    missing = [t for t in tickers if t not in by_ticker]
    if missing:
        raise MissingDataError(f"No price data for ticker(s): {', '.join(missing)}")
    return [by_ticker[t] for t in tickers]


def slice_panel(panel: PricePanel, start, end) -> PricePanel:
    """Inclusive [start, end] date window of a panel."""
    window = panel.closes.loc[pd.Timestamp(start):pd.Timestamp(end)]
    if window.empty:
        raise InsufficientDataError(f"No panel dates between {start} and {end}.")
    return PricePanel(window)


def price_on_or_before(series: PriceSeries, day) -> tuple:
    """Last close on or before `day`, as (date, price)."""
    window = series.closes.loc[: pd.Timestamp(day)]
    if window.empty:
        raise MissingDataError(f"No close for {series.ticker} on or before {day}.")
    return window.index[-1].date(), float(window.iloc[-1])


# ============================================================
# 3. Returns and volatility
# ============================================================

def daily_returns(panel: PricePanel) -> ReturnMatrix:
    """returns[t][i] = (close[t+1][i] - close[t][i]) / close[t][i]"""
    closes = panel.values
    if closes.shape[0] < 2:
        raise InsufficientDataError(
            f"Daily returns need at least 2 dates, panel has {closes.shape[0]}."
        )

    values = (closes[1:] - closes[:-1]) / closes[:-1]
    df = pd.DataFrame(values, index=panel.dates[1:], columns=panel.closes.columns)
    df.index.name = "date"
    return ReturnMatrix(df)


def annualized_volatility(returns: ReturnMatrix, trading_days: int = TRADING_DAYS) -> pd.Series:
    """Sample (ddof=1) std of each daily-return column times sqrt(trading_days)."""
    if returns.returns.shape[0] < 2:
        raise InsufficientDataError(
            f"Volatility needs at least 2 return rows, got {returns.returns.shape[0]}."
        )
    vol = returns.returns.std(ddof=1) * np.sqrt(float(trading_days))
    vol.name = "annual_volatility"
    return vol


def coverage_table(series: Sequence[PriceSeries], trading_days: int = TRADING_DAYS) -> pd.DataFrame:
    """Per-ticker data summary used by the ingest command."""
    rows = []
    for s in series:
        if len(s) >= 3:
            single = ReturnMatrix(s.closes.pct_change().iloc[1:].to_frame(s.ticker))
            vol = float(annualized_volatility(single, trading_days).iloc[0])
        else:
            vol = np.nan
        rows.append(
            {
                "Ticker": s.ticker,
                "First date": s.closes.index[0].date() if len(s) else None,
                "Last date": s.closes.index[-1].date() if len(s) else None,
                "Row count": len(s),
                "Annual volatility": round(vol, 6) if not np.isnan(vol) else np.nan,
            }
        )
    return pd.DataFrame(rows)
