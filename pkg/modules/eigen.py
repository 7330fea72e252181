# ============================================================
# eigen.py
# Eigen portfolios: PCA of standardized daily returns, one candidate
# portfolio per retained component, best candidate by Sharpe ratio.
#
# Key assumptions:
# - PCA runs on the correlation matrix (returns standardized, ddof=1).
# - Each eigenvector is signed so its largest-magnitude entry is > 0.
# - k = smallest prefix whose explained ratio reaches variance_target.
# - Candidate weights = loading row / sum(loading row); shorts allowed.
# ============================================================

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg

from modules.errors import (
    ArgumentError,
    DegenerateColumnError,
    DomainError,
    InsufficientDataError,
    NonNormalizableComponentError,
)
from modules.market_data import ReturnMatrix
from modules.portfolio_core import ReturnStats, RiskFreeAssumption, as_weights, evaluate_weights

logger = logging.getLogger(__name__)

DEFAULT_VARIANCE_TARGET = 0.80
# cumulative ratios are compared with this slack so a target of 1.0 is reachable
_TARGET_SLACK = 1e-12
_ZERO_SUM_TOL = 1e-12


@dataclass(frozen=True)
class PCAResult:
    """
    Full spectrum of the return correlation matrix.

    components: n x n, row j = unit-norm eigenvector j (descending eigenvalue)
    eigenvalues: n, descending, clipped at 0
    k: number of components retained for the variance target
    """

    tickers: Tuple[str, ...]
    components: np.ndarray
    eigenvalues: np.ndarray
    k: int
    mean: np.ndarray
    std: np.ndarray

    @property
    def explained_ratio_all(self) -> np.ndarray:
        return self.eigenvalues / self.eigenvalues.sum()

    @property
    def explained_ratio(self) -> np.ndarray:
        return self.explained_ratio_all[: self.k]

    @property
    def loadings(self) -> np.ndarray:
        return self.components[: self.k]

    def standardize(self, values: np.ndarray) -> np.ndarray:
        return (np.asarray(values, dtype=float) - self.mean) / self.std

    def transform(self, standardized: np.ndarray, n_components: Optional[int] = None) -> np.ndarray:
        comps = self.components if n_components is None else self.components[:n_components]
        return np.asarray(standardized, dtype=float) @ comps.T

    def reconstruct(self, scores: np.ndarray) -> np.ndarray:
        scores = np.asarray(scores, dtype=float)
        return scores @ self.components[: scores.shape[1]]


@dataclass(frozen=True)
class EigenCandidate:
    component_index: int
    weights: np.ndarray
    ann_return: float
    ann_volatility: float
    sharpe: float

    @property
    def has_shorts(self) -> bool:
        return bool((self.weights < 0).any())

    def to_dict(self) -> dict:
        return {
            "component": self.component_index,
            "weights": self.weights,
            "return": self.ann_return,
            "volatility": self.ann_volatility,
            "sharpe": self.sharpe,
        }


@dataclass(frozen=True)
class EigenResult:
    pca: PCAResult
    candidates: List[EigenCandidate]
    selected: EigenCandidate

    def to_dict(self) -> dict:
        return {
            "tickers": list(self.pca.tickers),
            "explained_ratio": self.pca.explained_ratio,
            "explained_ratio_all": self.pca.explained_ratio_all,
            "k": self.pca.k,
            "candidates": [c.to_dict() for c in self.candidates],
            "selected_component": self.selected.component_index,
        }


# ============================================================
# 1. PCA
# ============================================================

def _fix_signs(vectors: np.ndarray) -> np.ndarray:
    """Flip each row so its largest-|.| entry is positive."""
    idx = np.argmax(np.abs(vectors), axis=1)
    signs = np.sign(vectors[np.arange(vectors.shape[0]), idx])
    signs[signs == 0] = 1.0
    return vectors * signs[:, None]


def fit_pca(returns: ReturnMatrix, variance_target: float = DEFAULT_VARIANCE_TARGET) -> PCAResult:
    if not 0.0 < variance_target <= 1.0:
        raise ArgumentError(f"variance_target must be in (0, 1], got {variance_target}.")

    values = returns.values
    T, n = values.shape
    if T < n + 1:
        raise InsufficientDataError(f"PCA over {n} stocks needs at least {n + 1} return rows, got {T}.")

    mean = values.mean(axis=0)
    std = values.std(axis=0, ddof=1)
    for ticker, s in zip(returns.tickers, std):
        if not s > 0:
            raise DegenerateColumnError(ticker)

    Z = (values - mean) / std
    corr = Z.T @ Z / (T - 1)
    corr = (corr + corr.T) / 2.0

    # eigh returns ascending eigenvalues, eigenvectors in columns
    eigvals, eigvecs = linalg.eigh(corr)
    eigvals = np.clip(eigvals[::-1], 0.0, None)
    components = _fix_signs(eigvecs[:, ::-1].T)

    cumulative = np.cumsum(eigvals) / eigvals.sum()
    k = int(np.argmax(cumulative >= variance_target - _TARGET_SLACK)) + 1

    logger.info(
        f"PCA: {k} of {n} components explain {cumulative[k - 1]:.2%} of the variance "
        f"(target {variance_target:.0%})"
    )
    return PCAResult(
        tickers=tuple(returns.tickers),
        components=components,
        eigenvalues=eigvals,
        k=k,
        mean=mean,
        std=std,
    )


# ============================================================
# 2. Candidates and selection
# ============================================================

def normalize_loading(loading: np.ndarray, component_index: int = 0) -> np.ndarray:
    loading = np.asarray(loading, dtype=float)
    total = loading.sum()
    if abs(total) <= _ZERO_SUM_TOL:
        raise NonNormalizableComponentError(component_index, total)
    return loading / total


def candidate_portfolios(pca: PCAResult, stats: ReturnStats, rf: RiskFreeAssumption) -> List[EigenCandidate]:
    if pca.k < 1:
        raise ArgumentError("PCA result retains no component.")

    candidates = []
    for j, loading in enumerate(pca.loadings):
        try:
            weights = as_weights(normalize_loading(loading, j), n=stats.n)
            ret, vol, sharpe = evaluate_weights(weights, stats, rf)
        except NonNormalizableComponentError as exc:
            logger.warning(f"  [Warning] {exc} Skipping candidate.")
            continue
        except DomainError as exc:
            logger.warning(f"  [Warning] Component {j}: {exc} Skipping candidate.")
            continue
        candidates.append(EigenCandidate(j, weights, ret, vol, sharpe))
    return candidates


def select_best_eigen(candidates: Sequence[EigenCandidate]) -> EigenCandidate:
    if not candidates:
        raise ArgumentError("No eigen candidate to select from.")
    # np.argmax keeps the first (lowest component) maximum
    return candidates[int(np.argmax([c.sharpe for c in candidates]))]


def run_eigen(
    returns: ReturnMatrix,
    stats: ReturnStats,
    rf: RiskFreeAssumption = RiskFreeAssumption(),
    variance_target: float = DEFAULT_VARIANCE_TARGET,
) -> EigenResult:
    pca = fit_pca(returns, variance_target)
    candidates = candidate_portfolios(pca, stats, rf)
    selected = select_best_eigen(candidates)
    logger.info(
        f"  -> Selected eigen portfolio: component {selected.component_index} "
        f"(sharpe={selected.sharpe:.4f}, ret={selected.ann_return:.4f}, vol={selected.ann_volatility:.4f})"
    )
    if selected.has_shorts:
        logger.warning("  [Warning] Selected eigen portfolio holds short positions.")
    return EigenResult(pca=pca, candidates=candidates, selected=selected)


def eigen_selection_from_dict(doc: dict) -> Tuple[List[str], EigenCandidate]:
    """Selected candidate of a written eigen JSON document."""
    chosen = [c for c in doc["candidates"] if c["component"] == doc["selected_component"]]
    if not chosen:
        raise ArgumentError("Eigen document has no candidate for its selected component.")
    c = chosen[0]
    return list(doc["tickers"]), EigenCandidate(
        component_index=int(c["component"]),
        weights=np.asarray(c["weights"], dtype=float),
        ann_return=float(c["return"]),
        ann_volatility=float(c["volatility"]),
        sharpe=float(c["sharpe"]),
    )
