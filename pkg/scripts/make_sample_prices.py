"""
Synthetic long-format close-price corpus for the four sector configs.

Each ticker gets a business-day path from 2016-01-01 to 2021-07-01:
a random walk in log price before 2021 that ends at the ticker's
published entry price, then a Brownian bridge to its published exit
price. Paths are seeded, so the file is reproducible.

    python scripts/make_sample_prices.py [--output data/sample_prices.csv] [--seed 7]
"""

import argparse
import glob
import logging
import os
import sys

import numpy as np
import pandas as pd

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from modules.market_data import PriceSeries, write_prices  # noqa: E402
from modules.utils import read_json  # noqa: E402

logger = logging.getLogger("make_sample_prices")

START = "2016-01-01"
ENTRY = "2021-01-01"
EXIT = "2021-07-01"


def _anchors(fixtures_dir):
    """ticker -> (entry_price, exit_price), first fixture wins."""
    anchors = {}
    for path in sorted(glob.glob(os.path.join(fixtures_dir, "*.json"))):
        for row in read_json(path)["rows"]:
            anchors.setdefault(row["ticker"], (float(row["entry_price"]), float(row["exit_price"])))
    return anchors


def simulate_series(ticker, entry_price, exit_price, dates, rng):
    entry_pos = int(np.searchsorted(dates, pd.Timestamp(ENTRY)))
    n_before = entry_pos
    n_after = len(dates) - entry_pos

    sigma = rng.uniform(0.012, 0.028)
    mu = rng.uniform(-0.0002, 0.0008)

    # walk backwards from the entry anchor
    steps = rng.normal(mu, sigma, size=n_before)
    log_before = np.log(entry_price) - np.cumsum(steps[::-1])[::-1]

    # bridge from the entry anchor to the exit anchor
    noise = np.concatenate([[0.0], np.cumsum(rng.normal(0.0, sigma, size=n_after - 1))])
    t = np.linspace(0.0, 1.0, n_after)
    bridge = noise - t * noise[-1]
    log_after = np.log(entry_price) + t * (np.log(exit_price) - np.log(entry_price)) + bridge

    closes = np.exp(np.concatenate([log_before, log_after]))
    return PriceSeries(ticker, pd.Series(np.round(closes, 2), index=dates, name=ticker))


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.strip().splitlines()[0])
    parser.add_argument("--output", default="data/sample_prices.csv")
    parser.add_argument("--fixtures", default="data/fixtures")
    parser.add_argument("--seed", type=int, default=7)
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    anchors = _anchors(args.fixtures)
    dates = pd.bdate_range(START, EXIT)
    rngs = [np.random.default_rng(s) for s in np.random.SeedSequence(args.seed).spawn(len(anchors))]

    series = [
        simulate_series(ticker, entry, exit_, dates, rng)
        for (ticker, (entry, exit_)), rng in zip(sorted(anchors.items()), rngs)
    ]
    path = write_prices(series, args.output)
    logger.info(f"  -> Sample prices saved: {path} ({len(series)} tickers x {len(dates)} dates)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
