import io
import os
import tempfile
import unittest
from datetime import date

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
)
from modules.market_data import (
    PricePanel,
    PriceSeries,
    ReturnMatrix,
    align,
    annualized_volatility,
    coverage_table,
    daily_returns,
    load_prices,
    load_prices_file,
    price_on_or_before,
    select_tickers,
    slice_panel,
    write_prices,
)


def _csv(text):
    return io.BytesIO(text.encode("utf-8"))


def _series(ticker, dates, closes):
    return PriceSeries(ticker, pd.Series(closes, index=pd.DatetimeIndex(dates), dtype=float))


def _panel(values, start="2020-01-01"):
    values = np.asarray(values, dtype=float)
    dates = pd.bdate_range(start, periods=values.shape[0])
    cols = [f"S{i}" for i in range(values.shape[1])]
    return PricePanel(pd.DataFrame(values, index=dates, columns=cols))


class TestLoadPrices(unittest.TestCase):
    def test_two_tickers_three_dates(self):
        text = (
            "ticker,date,close\n"
            "HDB,2021-01-01,1425\n"
            "HDF,2021-01-01,2569\n"
            "HDB,2021-01-04,1430\n"
            "HDF,2021-01-04,2570\n"
            "HDB,2021-01-05,1440\n"
            "HDF,2021-01-05,2575\n"
        )
        series = load_prices(_csv(text))
        self.assertEqual([s.ticker for s in series], ["HDB", "HDF"])
        self.assertEqual([len(s) for s in series], [3, 3])
        self.assertEqual(series[0].observations[0], (date(2021, 1, 1), 1425.0))

    def test_rows_are_sorted_by_date(self):
        text = "ticker,date,close\nA,2021-01-05,3\nA,2021-01-01,1\nA,2021-01-04,2\n"
        (s,) = load_prices(_csv(text))
        self.assertEqual(s.closes.tolist(), [1.0, 2.0, 3.0])

    def test_negative_close_is_domain_error(self):
        with self.assertRaises(DomainError):
            load_prices(_csv("ticker,date,close\nA,2021-01-01,-5\n"))

    def test_malformed_row_names_line(self):
        text = "ticker,date,close\nA,2021-01-01,10\nA,2021-01-04\n"
        with self.assertRaises(ParseError) as ctx:
            load_prices(_csv(text))
        self.assertEqual(ctx.exception.line, 3)

        with self.assertRaises(ParseError) as ctx:
            load_prices(_csv("ticker,date,close\nA,01/04/2021,10\n"))
        self.assertEqual(ctx.exception.line, 2)

        with self.assertRaises(ParseError):
            load_prices(_csv("ticker,date,close\nA,2021-01-04,abc\n"))

    def test_invalid_utf8_names_line(self):
        raw = b"ticker,date,close\nHDB,2021-01-01,1425\nHDB,2021-01-04,14\xff25\n"
        with self.assertRaises(ParseError) as ctx:
            load_prices(io.BytesIO(raw))
        self.assertEqual(ctx.exception.line, 3)

    def test_bad_header(self):
        with self.assertRaises(ParseError) as ctx:
            load_prices(_csv("symbol,day,price\nA,2021-01-01,1\n"))
        self.assertEqual(ctx.exception.line, 1)

    def test_duplicate_observation(self):
        text = "ticker,date,close\nA,2021-01-01,10\nA,2021-01-01,11\n"
        with self.assertRaises(DuplicateObservationError) as ctx:
            load_prices(_csv(text))
        self.assertEqual(ctx.exception.ticker, "A")

    def test_write_then_load_file(self):
        s = _series("A", ["2021-01-01", "2021-01-04"], [10.5, 11.25])
        with tempfile.TemporaryDirectory() as tmp:
            path = write_prices([s], os.path.join(tmp, "sub", "prices.csv"))
            (loaded,) = load_prices_file(path)
        self.assertEqual(loaded.ticker, "A")
        self.assertEqual(loaded.closes.tolist(), [10.5, 11.25])


class TestAlign(unittest.TestCase):
    def test_identical_calendars(self):
        dates = ["2021-01-01", "2021-01-04", "2021-01-05"]
        panel = align([_series("A", dates, [1, 2, 3]), _series("B", dates, [4, 5, 6])])
        self.assertEqual(len(panel.dates), 3)
        self.assertEqual(panel.tickers, ["A", "B"])

    def test_intersection(self):
        a = _series("A", ["2021-01-01", "2021-01-02", "2021-01-03"], [1, 2, 3])
        b = _series("B", ["2021-01-02", "2021-01-03", "2021-01-04"], [4, 5, 6])
        panel = align([a, b])
        self.assertEqual(list(panel.dates.strftime("%Y-%m-%d")), ["2021-01-02", "2021-01-03"])
        self.assertEqual(panel.values.tolist(), [[2.0, 4.0], [3.0, 5.0]])

    def test_align_is_idempotent(self):
        a = _series("A", ["2021-01-01", "2021-01-04", "2021-01-05"], [1, 2, 3])
        b = _series("B", ["2021-01-04", "2021-01-05", "2021-01-06"], [4, 5, 6])
        once = align([a, b])
        twice = align(once.series())
        pd.testing.assert_frame_equal(twice.closes, once.closes)

    def test_disjoint_calendars(self):
        a = _series("A", ["2021-01-01"], [1])
        b = _series("B", ["2021-01-02"], [2])
        with self.assertRaises(AlignmentError):
            align([a, b])

    def test_empty_input(self):
        with self.assertRaises(ArgumentError):
            align([])

    def test_select_and_slice(self):
        dates = ["2020-12-30", "2020-12-31", "2021-01-04"]
        series = [_series("A", dates, [1, 2, 3]), _series("B", dates, [4, 5, 6])]
        picked = select_tickers(series, ["B"])
        self.assertEqual([s.ticker for s in picked], ["B"])
        with self.assertRaises(MissingDataError):
            select_tickers(series, ["Z"])

        window = slice_panel(align(series), "2020-12-31", "2021-01-04")
        self.assertEqual(len(window.dates), 2)
        with self.assertRaises(InsufficientDataError):
            slice_panel(align(series), "2022-01-01", "2022-02-01")

    def test_price_on_or_before(self):
        s = _series("A", ["2020-12-31", "2021-01-04"], [10, 12])
        # Jan 1 is not a trading day here: the Dec 31 close applies
        self.assertEqual(price_on_or_before(s, "2021-01-01"), (date(2020, 12, 31), 10.0))
        self.assertEqual(price_on_or_before(s, date(2021, 1, 4))[1], 12.0)
        with self.assertRaises(MissingDataError):
            price_on_or_before(s, "2020-01-01")


class TestReturnsAndVolatility(unittest.TestCase):
    def test_ten_percent_step(self):
        r = daily_returns(_panel([[100], [110]]))
        self.assertAlmostEqual(r.values[0, 0], 0.10, places=12)

    def test_constant_closes(self):
        r = daily_returns(_panel([[50], [50], [50]]))
        self.assertEqual(r.values[:, 0].tolist(), [0.0, 0.0])
        self.assertEqual(annualized_volatility(r).iloc[0], 0.0)

    def test_quotient_oracle(self):
        rng = np.random.default_rng(3)
        closes = rng.uniform(10, 100, size=(5, 3))
        r = daily_returns(_panel(closes)).values
        for t in range(4):
            for i in range(3):
                self.assertAlmostEqual(r[t, i], (closes[t + 1, i] - closes[t, i]) / closes[t, i], places=12)

    def test_panel_rebuilt_from_returns(self):
        rng = np.random.default_rng(21)
        closes = 100 * np.exp(np.cumsum(rng.normal(0, 0.02, size=(250, 4)), axis=0))
        r = daily_returns(_panel(closes)).values
        rebuilt = np.vstack([closes[:1], closes[0] * np.cumprod(1 + r, axis=0)])
        self.assertLessEqual(np.max(np.abs(rebuilt - closes) / closes), 1e-10)

    def test_volatility_ignores_price_scale(self):
        rng = np.random.default_rng(22)
        closes = 50 * np.exp(np.cumsum(rng.normal(0, 0.015, size=(120, 3)), axis=0))
        scaled = closes.copy()
        scaled[:, 1] *= 37.5
        base = annualized_volatility(daily_returns(_panel(closes)))
        moved = annualized_volatility(daily_returns(_panel(scaled)))
        np.testing.assert_allclose(moved.to_numpy(), base.to_numpy(), rtol=1e-12)

    def test_too_short(self):
        with self.assertRaises(InsufficientDataError):
            daily_returns(_panel([[100]]))

    def test_daily_std_one_percent(self):
        x = 0.01 * np.sqrt(2.0)
        returns = ReturnMatrix(pd.DataFrame({"A": [0.0, x]}))
        self.assertAlmostEqual(annualized_volatility(returns).iloc[0], 0.01 * np.sqrt(250), places=12)
        self.assertAlmostEqual(annualized_volatility(returns).iloc[0], 0.1581, places=4)

    def test_two_pass_oracle(self):
        rng = np.random.default_rng(11)
        values = rng.normal(0.0005, 0.02, size=(300, 2))
        vol = annualized_volatility(ReturnMatrix(pd.DataFrame(values, columns=["A", "B"])))
        for i, col in enumerate(["A", "B"]):
            mean = sum(values[:, i]) / len(values)
            var = sum((v - mean) ** 2 for v in values[:, i]) / (len(values) - 1)
            self.assertAlmostEqual(vol[col], np.sqrt(var) * np.sqrt(250), places=12)

    def test_volatility_needs_two_rows(self):
        with self.assertRaises(InsufficientDataError):
            annualized_volatility(ReturnMatrix(pd.DataFrame({"A": [0.01]})))

    def test_coverage_table(self):
        s = _series("A", ["2021-01-01", "2021-01-04", "2021-01-05", "2021-01-06"], [10, 11, 10, 12])
        cov = coverage_table([s])
        self.assertEqual(cov.loc[0, "Ticker"], "A")
        self.assertEqual(cov.loc[0, "Row count"], 4)
        self.assertGreater(cov.loc[0, "Annual volatility"], 0)


if __name__ == '__main__':
    unittest.main()
