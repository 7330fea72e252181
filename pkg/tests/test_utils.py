import os
import tempfile
import unittest
from datetime import date, datetime
from pathlib import Path

import numpy as np
import pandas as pd

from modules.utils import ensure_directory, read_json, sector_slug, to_date, write_json


class TestUtils(unittest.TestCase):
    def test_sector_slug(self):
        self.assertEqual(sector_slug("Oil & Gas"), "oil_gas")
        self.assertEqual(sector_slug("PSU Banks"), "psu_banks")
        self.assertEqual(sector_slug("***"), "sector")

    def test_to_date(self):
        self.assertEqual(to_date("2021-07-01"), date(2021, 7, 1))
        self.assertEqual(to_date(datetime(2021, 7, 1, 15, 30)), date(2021, 7, 1))
        self.assertEqual(to_date(pd.Timestamp("2021-07-01")), date(2021, 7, 1))
        with self.assertRaises(ValueError):
            to_date("01/07/2021")

    def test_json_converts_numpy_and_dates(self):
        doc = {
            "weights": np.array([0.25, 0.75]),
            "count": np.int64(3),
            "flag": np.bool_(True),
            "missing": float("nan"),
            "day": date(2021, 1, 1),
        }
        with tempfile.TemporaryDirectory() as tmp:
            path = write_json(doc, os.path.join(tmp, "nested", "doc.json"))
            loaded = read_json(path)
        self.assertEqual(loaded["weights"], [0.25, 0.75])
        self.assertEqual(loaded["count"], 3)
        self.assertIs(loaded["flag"], True)
        self.assertIsNone(loaded["missing"])
        self.assertEqual(loaded["day"], "2021-01-01")

    def test_json_is_reproducible(self):
        doc = {"b": [1.0 / 3.0, 2.0], "a": {"x": np.float64(0.1)}}
        with tempfile.TemporaryDirectory() as tmp:
            first = Path(write_json(doc, os.path.join(tmp, "1.json"))).read_bytes()
            second = Path(write_json(doc, os.path.join(tmp, "2.json"))).read_bytes()
        self.assertEqual(first, second)

    def test_ensure_directory(self):
        with tempfile.TemporaryDirectory() as tmp:
            target = os.path.join(tmp, "a", "b")
            ensure_directory(target)
            ensure_directory(target)
            self.assertTrue(os.path.isdir(target))


if __name__ == '__main__':
    unittest.main()
