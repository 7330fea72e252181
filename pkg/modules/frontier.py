# ============================================================
# frontier.py
# Monte Carlo efficient frontier over random long-only portfolios.
#
# Key assumptions:
# - Each weight vector = n independent uniform(0, 1) draws / their sum.
# - One seeded numpy Generator per run; the seed is kept in the result.
# - Ties in min-variance / max-Sharpe selection go to the lowest index.
# - The plotted frontier contour is the max-return sample of each of
#   `bins` equal-width volatility intervals.
# ============================================================

import logging
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from modules.errors import ArgumentError
from modules.portfolio_core import ReturnStats, RiskFreeAssumption, sharpe_ratio

logger = logging.getLogger(__name__)

DEFAULT_SAMPLE_COUNT = 10000
DEFAULT_BINS = 50


@dataclass(frozen=True)
class PortfolioSample:
    weights: np.ndarray
    ann_return: float
    ann_volatility: float
    sharpe: float

    def to_dict(self) -> dict:
        return {
            "weights": self.weights,
            "return": self.ann_return,
            "volatility": self.ann_volatility,
            "sharpe": self.sharpe,
        }


@dataclass(frozen=True)
class FrontierResult:
    tickers: Tuple[str, ...]
    samples: List[PortfolioSample]
    min_variance: int
    max_sharpe: int
    seed: int
    frontier: List[Tuple[float, float]]

    @property
    def min_variance_sample(self) -> PortfolioSample:
        return self.samples[self.min_variance]

    @property
    def max_sharpe_sample(self) -> PortfolioSample:
        return self.samples[self.max_sharpe]

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "tickers": list(self.tickers),
            "samples": [s.to_dict() for s in self.samples],
            "min_variance_index": self.min_variance,
            "max_sharpe_index": self.max_sharpe,
            "frontier": [{"volatility": v, "return": r} for v, r in self.frontier],
        }


def sample_portfolios(
    stats: ReturnStats,
    count: int,
    seed: int,
    rf: RiskFreeAssumption,
) -> List[PortfolioSample]:
    """Draw `count` random long-only portfolios and score them."""
    if count is None or int(count) < 1:
        raise ArgumentError(f"Sample count must be >= 1, got {count}.")
    count = int(count)

    rng = np.random.default_rng(seed)
    raw = rng.random((count, stats.n))
    weights = raw / raw.sum(axis=1, keepdims=True)

    returns = weights @ stats.mean_annual
    variances = np.einsum("ij,jk,ik->i", weights, stats.cov_annual, weights)
    volatilities = np.sqrt(np.clip(variances, 0.0, None))

    samples = []
    for w, ret, vol in zip(weights, returns, volatilities):
        samples.append(
            PortfolioSample(
                weights=w,
                ann_return=float(ret),
                ann_volatility=float(vol),
                sharpe=sharpe_ratio(float(ret), float(vol), rf),
            )
        )
    return samples


def _require_samples(samples: Sequence[PortfolioSample]):
    if not samples:
        raise ArgumentError("Selection needs at least one portfolio sample.")


def select_min_variance(samples: Sequence[PortfolioSample]) -> int:
    """Left-most point of the cloud (np.argmin keeps the first minimum)."""
    _require_samples(samples)
    return int(np.argmin([s.ann_volatility for s in samples]))


def select_max_sharpe(samples: Sequence[PortfolioSample]) -> int:
    _require_samples(samples)
    return int(np.argmax([s.sharpe for s in samples]))


def efficient_frontier_points(
    samples: Sequence[PortfolioSample],
    bins: int = DEFAULT_BINS,
) -> List[Tuple[float, float]]:
    """(volatility, return) of the best-return sample in each occupied volatility bin."""
    _require_samples(samples)
    if int(bins) < 1:
        raise ArgumentError(f"bins must be >= 1, got {bins}.")
    bins = int(bins)

    vols = np.array([s.ann_volatility for s in samples])
    rets = np.array([s.ann_return for s in samples])

    v_min, v_max = vols.min(), vols.max()
    width = (v_max - v_min) / bins
    if width > 0:
        bin_idx = np.clip(((vols - v_min) / width).astype(int), 0, bins - 1)
    else:
        bin_idx = np.zeros(len(vols), dtype=int)

    points = []
    for b in np.unique(bin_idx):
        members = np.flatnonzero(bin_idx == b)
        best = members[np.argmax(rets[members])]
        points.append((float(vols[best]), float(rets[best])))

    points.sort(key=lambda p: p[0])
    return points


def run_frontier(
    stats: ReturnStats,
    count: int = DEFAULT_SAMPLE_COUNT,
    seed: int = 0,
    rf: RiskFreeAssumption = RiskFreeAssumption(),
    bins: int = DEFAULT_BINS,
) -> FrontierResult:
    logger.info(f"Sampling {count} random portfolios over {stats.n} stocks (seed={seed})...")
    if stats.n == 1:
        logger.warning(
            "  [Warning] Single-stock universe: every sample is w = (1.0), "
            "the frontier degenerates to one point."
        )

    samples = sample_portfolios(stats, count, seed, rf)
    i_min = select_min_variance(samples)
    i_max = select_max_sharpe(samples)
    contour = efficient_frontier_points(samples, bins)

    logger.info(
        f"  -> Min variance: #{i_min} (vol={samples[i_min].ann_volatility:.4f}, "
        f"ret={samples[i_min].ann_return:.4f})"
    )
    logger.info(
        f"  -> Optimum risk: #{i_max} (sharpe={samples[i_max].sharpe:.4f}, "
        f"vol={samples[i_max].ann_volatility:.4f}, ret={samples[i_max].ann_return:.4f})"
    )

    return FrontierResult(
        tickers=tuple(stats.tickers),
        samples=samples,
        min_variance=i_min,
        max_sharpe=i_max,
        seed=int(seed),
        frontier=contour,
    )


def frontier_from_dict(doc: dict) -> FrontierResult:
    samples = [
        PortfolioSample(
            weights=np.asarray(s["weights"], dtype=float),
            ann_return=float(s["return"]),
            ann_volatility=float(s["volatility"]),
            sharpe=float(s["sharpe"]),
        )
        for s in doc["samples"]
    ]
    return FrontierResult(
        tickers=tuple(doc.get("tickers", [])),
        samples=samples,
        min_variance=int(doc["min_variance_index"]),
        max_sharpe=int(doc["max_sharpe_index"]),
        seed=int(doc["seed"]),
        frontier=[(float(p["volatility"]), float(p["return"])) for p in doc.get("frontier", [])],
    )
