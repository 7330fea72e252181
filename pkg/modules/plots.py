# ============================================================
# plots.py
# SVG figures for one sector run:
# - random-portfolio cloud with frontier contour and the two stars
# - explained variance per principal component
# - actual vs predicted close path for one ticker
# - training / validation loss curves
#
# SVG output is made reproducible by a fixed hash salt and no date
# metadata, so identical inputs give identical files.
# ============================================================

import logging
import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402
import seaborn as sns  # noqa: E402

from modules.utils import ensure_directory  # noqa: E402

logger = logging.getLogger(__name__)

# Global plotting style
sns.set_style("whitegrid")
plt.rcParams["figure.dpi"] = 120
plt.rcParams["axes.grid"] = True
plt.rcParams["grid.alpha"] = 0.3
plt.rcParams["axes.spines.top"] = False
plt.rcParams["axes.spines.right"] = False
plt.rcParams["svg.hashsalt"] = "sector-portfolio"

_SVG_METADATA = {"Date": None}


def _save(fig, outpath):
    folder = os.path.dirname(outpath)
    if folder:
        ensure_directory(folder)
    fig.savefig(outpath, format="svg", bbox_inches="tight", metadata=_SVG_METADATA)
    plt.close(fig)
    return outpath


def plot_frontier(result, outpath, title="Efficient frontier"):
    """Risk on x, return on y; min variance = red star, optimum risk = green star."""
    vols = np.array([s.ann_volatility for s in result.samples])
    rets = np.array([s.ann_return for s in result.samples])
    sharpes = np.array([s.sharpe for s in result.samples])

    fig, ax = plt.subplots(figsize=(9, 6))
    cloud = ax.scatter(vols, rets, c=sharpes, cmap="viridis", s=6, alpha=0.6, linewidths=0)
    fig.colorbar(cloud, ax=ax, label="Sharpe ratio")

    if len(result.frontier) > 1:
        fv, fr = zip(*result.frontier)
        ax.plot(fv, fr, color="black", linewidth=1.0, linestyle="--", label="Frontier (binned)")

    mv = result.min_variance_sample
    ms = result.max_sharpe_sample
    ax.scatter([mv.ann_volatility], [mv.ann_return], marker="*", color="red", s=300,
               edgecolors="black", label="Minimum variance")
    ax.scatter([ms.ann_volatility], [ms.ann_return], marker="*", color="green", s=300,
               edgecolors="black", label="Optimum risk (max Sharpe)")

    ax.set_xlabel("Annual volatility")
    ax.set_ylabel("Annual return")
    ax.set_title(title)
    ax.legend(loc="lower right", fontsize=8)
    fig.tight_layout()
    _save(fig, outpath)
    logger.info(f"  -> Frontier plot saved: {outpath}")
    return outpath


def plot_explained_variance(explained_ratio_all, k, outpath, title="Explained variance by component"):
    ratios = np.asarray(explained_ratio_all, dtype=float)
    idx = np.arange(1, len(ratios) + 1)

    fig, ax = plt.subplots(figsize=(8, 5))
    colors = ["tab:blue" if i <= k else "lightgray" for i in idx]
    ax.bar(idx, ratios, color=colors)
    ax.plot(idx, np.cumsum(ratios), color="black", marker="o", linewidth=1.0, label="Cumulative")
    ax.axvline(k + 0.5, color="red", linestyle="--", linewidth=1.2,
               label=f"{k} retained components")
    ax.set_xticks(idx)
    ax.set_xlabel("Principal component")
    ax.set_ylabel("Explained variance ratio")
    ax.set_ylim(0, 1.05)
    ax.set_title(title)
    ax.legend(loc="center right", fontsize=8)
    fig.tight_layout()
    _save(fig, outpath)
    logger.info(f"  -> Explained variance plot saved: {outpath}")
    return outpath


def plot_prediction(path_df: pd.DataFrame, ticker, outpath):
    if path_df.empty:
        logger.info(f"  No prediction path plotted for {ticker} (no dates in window).")
        return None

    fig, ax = plt.subplots(figsize=(12, 5))
    ax.plot(path_df["date"], path_df["actual"], label="Actual", linewidth=1.2)
    ax.plot(path_df["date"], path_df["predicted"], label="Predicted", linewidth=1.2)
    ax.set_xlabel("Date")
    ax.set_ylabel("Close price")
    ax.set_title(f"Actual vs. predicted close - {ticker}")
    ax.legend(loc="upper left", fontsize=8)
    fig.autofmt_xdate()
    fig.tight_layout()
    _save(fig, outpath)
    logger.info(f"  -> Prediction plot saved: {outpath}")
    return outpath


def plot_training_history(history: dict, ticker, outpath):
    """Loss (Huber) and MAE per epoch, training and validation."""
    if not history.get("train_loss"):
        logger.info(f"  No training history plotted for {ticker} (0 epochs).")
        return None

    epochs = np.arange(1, len(history["train_loss"]) + 1)
    fig, axes = plt.subplots(nrows=1, ncols=2, figsize=(12, 4), squeeze=False)
    for ax, key, label in ((axes[0][0], "loss", "Huber loss"), (axes[0][1], "mae", "Mean absolute error")):
        ax.plot(epochs, history[f"train_{key}"], label="Training")
        if history.get(f"val_{key}"):
            ax.plot(epochs, history[f"val_{key}"], label="Validation")
        ax.set_xlabel("Epoch")
        ax.set_ylabel(label)
        ax.legend(fontsize=8)
    fig.suptitle(f"Training history - {ticker}", fontsize=12)
    fig.tight_layout(rect=[0, 0.03, 1, 0.95])
    _save(fig, outpath)
    logger.info(f"  -> Training history saved: {outpath}")
    return outpath
