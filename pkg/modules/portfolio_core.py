# ============================================================
# portfolio_core.py
# Portfolio return, portfolio variance and Sharpe ratio over
# annualized statistics.
#
#   Ret = sum_i w_i * Ret(S_i)
#   V   = sum_i w_i^2 * s_i^2 + 2 * sum_{i<j} w_i * w_j * covar(i, j)  (= w' S w)
#   SR  = (Ret - Ret_free) / STD
#
# Annualization: mean daily return x trading_days, covariance x trading_days.
# ============================================================

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from modules.errors import DimensionError, DomainError, InsufficientDataError
from modules.market_data import TRADING_DAYS, ReturnMatrix


WEIGHT_SUM_TOL = 1e-9
SYMMETRY_TOL = 1e-10


@dataclass(frozen=True)
class RiskFreeAssumption:
    """Annual return of the risk-free benchmark (1% by default)."""

    ret_free: float = 0.01

    def __post_init__(self):
        if not np.isfinite(self.ret_free):
            raise DomainError(f"Risk-free return must be finite, got {self.ret_free}.")


@dataclass(frozen=True)
class ReturnStats:
    tickers: Tuple[str, ...]
    mean_annual: np.ndarray
    cov_annual: np.ndarray

    def __post_init__(self):
        n = len(self.tickers)
        mean = np.asarray(self.mean_annual, dtype=float)
        cov = np.asarray(self.cov_annual, dtype=float)
        if mean.shape != (n,):
            raise DimensionError(f"mean_annual has shape {mean.shape}, expected ({n},).")
        if cov.shape != (n, n):
            raise DimensionError(f"cov_annual has shape {cov.shape}, expected ({n}, {n}).")
        if not np.allclose(cov, cov.T, rtol=0.0, atol=SYMMETRY_TOL):
            raise DomainError("cov_annual must be symmetric.")
        if (np.diag(cov) < 0).any():
            raise DomainError("cov_annual diagonal (variances) must be >= 0.")
        object.__setattr__(self, "tickers", tuple(self.tickers))
        object.__setattr__(self, "mean_annual", mean)
        object.__setattr__(self, "cov_annual", cov)

    @property
    def n(self) -> int:
        return len(self.tickers)

    def to_dict(self) -> dict:
        return {
            "tickers": list(self.tickers),
            "mean_annual": self.mean_annual,
            "cov_annual": self.cov_annual,
            "volatility_annual": np.sqrt(np.clip(np.diag(self.cov_annual), 0.0, None)),
        }


def estimate_return_stats(returns: ReturnMatrix, trading_days: int = TRADING_DAYS) -> ReturnStats:
    """Annualized mean vector and sample covariance of the daily returns."""
    values = returns.values
    if values.shape[0] < 2:
        raise InsufficientDataError(
            f"Return statistics need at least 2 return rows, got {values.shape[0]}."
        )
    mean = values.mean(axis=0) * trading_days
    cov = np.atleast_2d(np.cov(values, rowvar=False, ddof=1)) * trading_days
    # np.cov is symmetric up to rounding; force exact symmetry
    cov = (cov + cov.T) / 2.0
    return ReturnStats(tuple(returns.tickers), mean, cov)


def as_weights(values: Sequence[float], n: Optional[int] = None, long_only: bool = False) -> np.ndarray:
    """Validate a weight vector: length n, sum 1 within 1e-9, optionally no shorts."""
    w = np.asarray(values, dtype=float).ravel()
    if n is not None and w.shape[0] != n:
        raise DimensionError(f"Weight vector has {w.shape[0]} entries, expected {n}.")
    if abs(w.sum() - 1.0) > WEIGHT_SUM_TOL:
        raise DomainError(f"Weights must sum to 1 (got {w.sum():.12f}).")
    if long_only and (w < 0).any():
        raise DomainError("Long-only weights cannot be negative.")
    return w


def _check_dims(w: np.ndarray, stats: ReturnStats) -> np.ndarray:
    w = np.asarray(w, dtype=float).ravel()
    if w.shape[0] != stats.n:
        raise DimensionError(f"{w.shape[0]} weights for a universe of {stats.n} stocks.")
    return w


def portfolio_return(w, stats: ReturnStats) -> float:
    w = _check_dims(w, stats)
    return float(np.dot(w, stats.mean_annual))


def portfolio_variance(w, stats: ReturnStats) -> Tuple[float, float]:
    """Return (variance, volatility); volatility = sqrt(max(V, 0))."""
    w = _check_dims(w, stats)
    variance = float(w @ stats.cov_annual @ w)
    return variance, float(np.sqrt(max(variance, 0.0)))


def sharpe_ratio(port_return: float, port_volatility: float, rf: RiskFreeAssumption) -> float:
    if not port_volatility > 0:
        raise DomainError(f"Sharpe ratio needs a positive volatility, got {port_volatility}.")
    return (port_return - rf.ret_free) / port_volatility


def evaluate_weights(w, stats: ReturnStats, rf: RiskFreeAssumption) -> Tuple[float, float, float]:
    """(annual return, annual volatility, Sharpe ratio) of one weight vector."""
    ret = portfolio_return(w, stats)
    _, vol = portfolio_variance(w, stats)
    return ret, vol, sharpe_ratio(ret, vol, rf)
