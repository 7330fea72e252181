import contextlib
import io
import os
import shutil
import tempfile
import unittest
from pathlib import Path

import numpy as np
import pandas as pd

from modules.market_data import load_prices_file, price_on_or_before
from scripts.clean_output import clean_sector_outputs
from scripts.make_sample_prices import EXIT, START, main, simulate_series


class TestSamplePrices(unittest.TestCase):
    def test_series_hits_both_anchors(self):
        dates = pd.bdate_range(START, EXIT)
        s = simulate_series("HDB", 1425.0, 1487.0, dates, np.random.default_rng(0))
        self.assertEqual(price_on_or_before(s, "2021-01-01")[1], 1425.0)
        self.assertEqual(price_on_or_before(s, "2021-07-01")[1], 1487.0)
        self.assertTrue((s.closes > 0).all())

    def test_reproducible_file(self):
        tmp = tempfile.mkdtemp()
        try:
            fixtures = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "data", "fixtures")
            a, b = os.path.join(tmp, "a.csv"), os.path.join(tmp, "b.csv")
            main(["--output", a, "--fixtures", fixtures, "--seed", "1"])
            main(["--output", b, "--fixtures", fixtures, "--seed", "1"])
            self.assertEqual(Path(a).read_bytes(), Path(b).read_bytes())
            self.assertEqual(len(load_prices_file(a)), 39)
        finally:
            shutil.rmtree(tmp, ignore_errors=True)


class TestCleanOutput(unittest.TestCase):
    def test_removes_generated_files_only(self):
        tmp = tempfile.mkdtemp()
        try:
            sector = os.path.join(tmp, "pharma")
            os.makedirs(os.path.join(sector, "checkpoints"))
            for name in ("frontier.json", "table_optimum_actual.csv", "notes.txt"):
                open(os.path.join(sector, name), "w").close()
            open(os.path.join(tmp, "summary.csv"), "w").close()

            with contextlib.redirect_stdout(io.StringIO()):
                clean_sector_outputs(tmp, keep_checkpoints=True)

            self.assertEqual(sorted(os.listdir(sector)), ["checkpoints", "notes.txt"])
            self.assertFalse(os.path.exists(os.path.join(tmp, "summary.csv")))
        finally:
            shutil.rmtree(tmp, ignore_errors=True)


if __name__ == '__main__':
    unittest.main()
