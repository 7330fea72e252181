# ============================================================
# config.py
# Run configuration: one YAML document per sector.
#
# Every key is optional; defaults reproduce the reference setup
# (train 2016-01-01..2020-12-31, entry 2021-01-01, exit 2021-07-01,
# capital 100000, 10000 random portfolios, 80% explained variance,
# 1% risk-free return, 250 trading days, LSTM 50/256/2/0.3/256).
# ============================================================

import logging
import os
from dataclasses import dataclass, field
from datetime import date
from typing import Dict, Optional, Tuple

import numpy as np
import yaml

from modules.errors import ConfigError, PortfolioToolError
from modules.lstm_model import LSTMConfig
from modules.portfolio_core import RiskFreeAssumption
from modules.utils import sector_slug, to_date

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RunConfig:
    sector: str = "sector"
    tickers: Tuple[str, ...] = ()
    data_path: str = "data/prices.csv"
    predicted_prices_path: Optional[str] = None
    train_window: Tuple[date, date] = (date(2016, 1, 1), date(2020, 12, 31))
    entry_date: date = date(2021, 1, 1)
    exit_date: date = date(2021, 7, 1)
    capital: float = 100000.0
    sample_count: int = 10000
    frontier_bins: int = 50
    variance_target: float = 0.80
    rf: RiskFreeAssumption = RiskFreeAssumption()
    trading_days: int = 250
    lstm: LSTMConfig = LSTMConfig()
    seed: int = 0
    output_dir: str = "output"
    fixtures: Dict[str, str] = field(default_factory=dict)
    plot_ticker: Optional[str] = None

    def __post_init__(self):
        problems = []
        start, end = self.train_window
        if not (start < end < self.entry_date <= self.exit_date):
            problems.append(
                "dates must satisfy train start < train end < entry_date <= exit_date "
                f"(got {start}, {end}, {self.entry_date}, {self.exit_date})"
            )
        if not self.capital > 0:
            problems.append(f"capital must be > 0 (got {self.capital})")
        if self.sample_count < 1:
            problems.append(f"frontier.sample_count must be >= 1 (got {self.sample_count})")
        if self.frontier_bins < 1:
            problems.append(f"frontier.bins must be >= 1 (got {self.frontier_bins})")
        if not 0.0 < self.variance_target <= 1.0:
            problems.append(f"eigen.variance_target must be in (0, 1] (got {self.variance_target})")
        if self.trading_days < 1:
            problems.append(f"trading_days must be >= 1 (got {self.trading_days})")
        if len(set(self.tickers)) != len(self.tickers):
            problems.append("tickers must be distinct")
        unknown = set(self.fixtures) - {"optimum", "eigen"}
        if unknown:
            problems.append(f"backtest.fixtures accepts 'optimum' and 'eigen' only (got {sorted(unknown)})")
        if problems:
            raise ConfigError("Invalid run config: " + "; ".join(problems))

    @property
    def train_start(self) -> date:
        return self.train_window[0]

    @property
    def train_end(self) -> date:
        return self.train_window[1]

    @property
    def sector_dir(self) -> str:
        return os.path.join(self.output_dir, sector_slug(self.sector))

    @property
    def uses_fixtures(self) -> bool:
        return bool(self.fixtures)


# ============================================================
# Value helpers (missing / empty / NaN -> default)
# ============================================================

def _is_blank(val) -> bool:
    if val is None:
        return True
    if isinstance(val, str) and not val.strip():
        return True
    try:
        return bool(np.isnan(val))
    except (TypeError, ValueError):
        return False


def _get_config_float(section, key, default):
    val = section.get(key, default)
    if _is_blank(val):
        return default
    try:
        return float(val)
    except (TypeError, ValueError):
        raise ConfigError(f"'{key}' must be a number, got {val!r}.")


def _get_config_int(section, key, default):
    val = section.get(key, default)
    if _is_blank(val):
        return default
    try:
        f = float(val)
    except (TypeError, ValueError):
        raise ConfigError(f"'{key}' must be an integer, got {val!r}.")
    if f != int(f):
        raise ConfigError(f"'{key}' must be an integer, got {val!r}.")
    return int(f)


def _get_config_date(section, key, default):
    val = section.get(key, default)
    if _is_blank(val):
        return default
    try:
        return to_date(val)
    except ValueError:
        raise ConfigError(f"'{key}' must be a date in YYYY-MM-DD format, got {val!r}.")


def _section(doc, key) -> dict:
    val = doc.get(key) or {}
    if not isinstance(val, dict):
        raise ConfigError(f"Config section '{key}' must be a mapping.")
    return val


# ============================================================
# Loading
# ============================================================

def _lstm_config(section: dict, seed: int, seed_forced: bool = False) -> LSTMConfig:
    base = LSTMConfig()
    if seed_forced:
        section = {k: v for k, v in section.items() if k != "seed"}
    try:
        return LSTMConfig(
            lookback=_get_config_int(section, "lookback", base.lookback),
            hidden_units=_get_config_int(section, "hidden_units", base.hidden_units),
            recurrent_layers=_get_config_int(section, "recurrent_layers", base.recurrent_layers),
            dropout_rate=_get_config_float(section, "dropout_rate", base.dropout_rate),
            dense_units=_get_config_int(section, "dense_units", base.dense_units),
            horizon=_get_config_int(section, "horizon", base.horizon),
            batch_size=_get_config_int(section, "batch_size", base.batch_size),
            epochs=_get_config_int(section, "epochs", base.epochs),
            learning_rate=_get_config_float(section, "learning_rate", base.learning_rate),
            seed=_get_config_int(section, "seed", seed),
            huber_delta=_get_config_float(section, "huber_delta", base.huber_delta),
            validation_split=_get_config_float(section, "validation_split", base.validation_split),
        )
    except PortfolioToolError as exc:
        raise ConfigError(str(exc)) from exc


def run_config_from_dict(doc: Optional[dict], overrides: Optional[dict] = None) -> RunConfig:
    """Build a validated RunConfig from a parsed document plus CLI overrides."""
    doc = doc or {}
    if not isinstance(doc, dict):
        raise ConfigError("Run config must be a YAML mapping.")
    overrides = {k: v for k, v in (overrides or {}).items() if v is not None}
    defaults = RunConfig()

    seed = int(overrides.get("seed", _get_config_int(doc, "seed", defaults.seed)))

    window = _section(doc, "train_window")
    train_window = (
        _get_config_date(window, "start", defaults.train_start),
        _get_config_date(window, "end", defaults.train_end),
    )

    tickers = doc.get("tickers") or []
    if isinstance(tickers, str):
        tickers = [t for t in tickers.split(",") if t.strip()]
    tickers = tuple(str(t).strip() for t in tickers)

    frontier = _section(doc, "frontier")
    eigen = _section(doc, "eigen")
    risk_free = _section(doc, "risk_free")
    backtest = _section(doc, "backtest")
    fixtures = backtest.get("fixtures") or {}
    if not isinstance(fixtures, dict):
        raise ConfigError("backtest.fixtures must map 'optimum'/'eigen' to fixture files.")

    def _path(value):
        return None if value in (None, "") else str(value)

    rf_value = _get_config_float(risk_free, "ret_free", defaults.rf.ret_free)
    try:
        rf = RiskFreeAssumption(rf_value)
    except PortfolioToolError as exc:
        raise ConfigError(str(exc)) from exc

    return RunConfig(
        sector=str(doc.get("sector") or defaults.sector),
        tickers=tickers,
        data_path=_path(doc.get("data_path")) or defaults.data_path,
        predicted_prices_path=_path(doc.get("predicted_prices_path")),
        train_window=train_window,
        entry_date=_get_config_date(doc, "entry_date", defaults.entry_date),
        exit_date=_get_config_date(doc, "exit_date", defaults.exit_date),
        capital=_get_config_float(doc, "capital", defaults.capital),
        sample_count=_get_config_int(frontier, "sample_count", defaults.sample_count),
        frontier_bins=_get_config_int(frontier, "bins", defaults.frontier_bins),
        variance_target=_get_config_float(eigen, "variance_target", defaults.variance_target),
        rf=rf,
        trading_days=_get_config_int(doc, "trading_days", defaults.trading_days),
        lstm=_lstm_config(_section(doc, "lstm"), seed, "seed" in overrides),
        seed=seed,
        output_dir=str(overrides.get("output_dir") or doc.get("output_dir") or defaults.output_dir),
        fixtures={k: _path(v) for k, v in fixtures.items()},
        plot_ticker=doc.get("plot_ticker") or None,
    )


def load_run_config(path: Optional[str], overrides: Optional[dict] = None) -> RunConfig:
    """Read and validate a YAML run config; `None` means all defaults."""
    if path is None:
        return run_config_from_dict({}, overrides)
    if not os.path.exists(path):
        raise ConfigError(f"Config file not found: {path}")
    try:
        with open(path, "r", encoding="utf-8") as f:
            doc = yaml.safe_load(f)
    except yaml.YAMLError as exc:
        raise ConfigError(f"Cannot parse {path}: {exc}") from exc
    logger.debug(f"Loaded run config {path}")
    return run_config_from_dict(doc, overrides)
