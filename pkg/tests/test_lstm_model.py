import dataclasses
import os
import tempfile
import unittest
from unittest import mock

import numpy as np
import pandas as pd

from modules.errors import (
    ConfigError,
    DegenerateRangeError,
    DivergenceError,
    InsufficientDataError,
    ShapeError,
)
from modules.lstm_model import (
    LSTMConfig,
    LSTMModel,
    Scaler,
    apply_scaler,
    count_parameters,
    fit_scaler,
    forward,
    huber,
    init_params,
    invert_scaler,
    load_checkpoint,
    loss_and_gradients,
    make_windows,
    parameter_shapes,
    predict_next,
    predict_path,
    save_checkpoint,
    sweep,
    train,
    zero_params,
)


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def _tiny(**kw):
    base = dict(lookback=5, hidden_units=4, recurrent_layers=1, dropout_rate=0.0,
                dense_units=4, batch_size=8, epochs=1, seed=0, validation_split=0.0)
    base.update(kw)
    return LSTMConfig(**base)


def _model(config, seed=0, scaler=Scaler(0.0, 1.0)):
    return LSTMModel(config, scaler, init_params(config, np.random.default_rng(seed)))


class TestConfig(unittest.TestCase):
    def test_defaults(self):
        c = LSTMConfig()
        self.assertEqual((c.lookback, c.hidden_units, c.recurrent_layers, c.dense_units), (50, 256, 2, 256))
        self.assertEqual((c.dropout_rate, c.batch_size, c.epochs, c.horizon), (0.30, 64, 100, 1))

    def test_invalid(self):
        for kw in ({"lookback": 0}, {"horizon": 0}, {"dropout_rate": 1.0}, {"batch_size": 0},
                   {"learning_rate": float("inf")}):
            with self.assertRaises(ConfigError):
                LSTMConfig(**kw)


class TestWindows(unittest.TestCase):
    def test_sixty_points(self):
        X, y = make_windows(np.arange(60.0), 50, 1)
        self.assertEqual(X.shape, (10, 50, 1))
        self.assertEqual(y.shape, (10,))

    def test_boundary(self):
        prices = np.arange(51.0)
        X, y = make_windows(prices, 50, 1)
        self.assertEqual(len(y), 1)
        self.assertEqual(y[0], prices[-1])

    def test_by_hand(self):
        X, y = make_windows([1, 2, 3, 4, 5, 6, 7], 3, 2)
        self.assertEqual(X[:, :, 0].tolist(), [[1, 2, 3], [2, 3, 4], [3, 4, 5]])
        self.assertEqual(y.tolist(), [5, 6, 7])

    def test_too_short(self):
        with self.assertRaises(InsufficientDataError):
            make_windows(np.arange(50.0), 50, 1)


class TestScaler(unittest.TestCase):
    def test_endpoints(self):
        s = fit_scaler([100, 150, 200])
        np.testing.assert_allclose(apply_scaler([100, 150, 200], s), [0.0, 0.5, 1.0])

    def test_inverse(self):
        rng = np.random.default_rng(0)
        s = fit_scaler(rng.uniform(10, 500, 100))
        x = rng.uniform(-100, 1000, 50)
        np.testing.assert_allclose(invert_scaler(apply_scaler(x, s), s), x, rtol=0, atol=1e-12 * 1000)

    def test_out_of_range_not_clamped(self):
        s = fit_scaler([10, 20])
        self.assertEqual(apply_scaler([30], s)[0], 2.0)

    def test_constant_series(self):
        with self.assertRaises(DegenerateRangeError):
            fit_scaler([5, 5, 5])


class TestForward(unittest.TestCase):
    def test_zero_parameters(self):
        config = _tiny()
        model = LSTMModel(config, Scaler(0.0, 1.0), zero_params(config))
        self.assertEqual(forward(model, np.random.default_rng(1).random(5)), 0.5)

    def test_inference_is_deterministic(self):
        config = _tiny(dropout_rate=0.3)
        model = _model(config)
        window = np.linspace(0, 1, 5)
        a = forward(model, window)
        b = forward(model, window, rng=np.random.default_rng(123))
        self.assertEqual(a, b)

    def test_shape_mismatch(self):
        with self.assertRaises(ShapeError):
            forward(_model(_tiny()), np.zeros(4))

    def test_hand_unrolled_cell(self):
        config = LSTMConfig(lookback=4, hidden_units=3, recurrent_layers=1, dropout_rate=0.0,
                            dense_units=2, validation_split=0.0)
        rng = np.random.default_rng(77)
        params = {name: rng.normal(0, 0.5, size=shape) for name, shape in parameter_shapes(config).items()}
        model = LSTMModel(config, Scaler(0.0, 1.0), params)
        window = [0.1, 0.5, 0.3, 0.9]

        W, U, b = params["lstm_0_W"], params["lstm_0_U"], params["lstm_0_b"]
        h = [0.0, 0.0, 0.0]
        c = [0.0, 0.0, 0.0]
        for x in window:
            new_h, new_c = [], []
            for u in range(3):
                def pre(gate):
                    row = gate * 3 + u
                    return W[row, 0] * x + sum(U[row, k] * h[k] for k in range(3)) + b[row]
                i = _sigmoid(pre(0))
                f = _sigmoid(pre(1))
                g = np.tanh(pre(2))
                o = _sigmoid(pre(3))
                cu = f * c[u] + i * g
                new_c.append(cu)
                new_h.append(o * np.tanh(cu))
            h, c = new_h, new_c

        dense = [max(0.0, sum(params["dense_W"][d, k] * h[k] for k in range(3)) + params["dense_b"][d])
                 for d in range(2)]
        expected = _sigmoid(sum(params["out_W"][d] * dense[d] for d in range(2)) + params["out_b"][0])
        self.assertAlmostEqual(forward(model, window), expected, delta=1e-10)


class TestHuber(unittest.TestCase):
    def test_pieces(self):
        self.assertEqual(huber(0.5, 1.0), 0.125)
        self.assertEqual(huber(-3.0, 1.0), 2.5)

    def test_continuous_at_joint(self):
        for delta in (1.0, 0.5):
            for sign in (1.0, -1.0):
                lo = huber(sign * (delta - 1e-9), delta)
                hi = huber(sign * (delta + 1e-9), delta)
                self.assertAlmostEqual(float(lo), float(hi), delta=1e-8)
                slope_lo = (huber(sign * delta, delta) - lo) / 1e-9
                slope_hi = (hi - huber(sign * delta, delta)) / 1e-9
                self.assertAlmostEqual(float(slope_lo), float(slope_hi), delta=1e-5)


class TestGradients(unittest.TestCase):
    def test_central_differences(self):
        config = _tiny()
        model = _model(config, seed=3)
        rng = np.random.default_rng(4)
        X = rng.random((6, 5, 1))
        y = rng.random(6)

        _, grads = loss_and_gradients(model, X, y)
        eps = 1e-5
        for name, value in model.params.items():
            numeric = np.zeros_like(value)
            flat = value.reshape(-1)
            for idx in range(flat.size):
                orig = flat[idx]
                flat[idx] = orig + eps
                plus, _ = loss_and_gradients(model, X, y)
                flat[idx] = orig - eps
                minus, _ = loss_and_gradients(model, X, y)
                flat[idx] = orig
                numeric.reshape(-1)[idx] = (plus - minus) / (2 * eps)
            analytic = grads[name]
            denom = max(np.linalg.norm(analytic) + np.linalg.norm(numeric), 1e-12)
            rel = np.linalg.norm(analytic - numeric) / denom
            self.assertLessEqual(rel, 1e-4, msg=f"gradient mismatch for {name}: {rel:.3e}")

    def test_two_layer_gradients(self):
        config = _tiny(recurrent_layers=2, hidden_units=3, dense_units=3, lookback=4)
        model = _model(config, seed=5)
        rng = np.random.default_rng(6)
        X, y = rng.random((4, 4, 1)), rng.random(4)
        _, grads = loss_and_gradients(model, X, y)
        eps = 1e-5
        for name in ("lstm_0_W", "lstm_0_U", "lstm_1_b"):
            flat = model.params[name].reshape(-1)
            numeric = np.zeros(flat.size)
            for idx in range(flat.size):
                orig = flat[idx]
                flat[idx] = orig + eps
                plus, _ = loss_and_gradients(model, X, y)
                flat[idx] = orig - eps
                minus, _ = loss_and_gradients(model, X, y)
                flat[idx] = orig
                numeric[idx] = (plus - minus) / (2 * eps)
            analytic = grads[name].reshape(-1)
            rel = np.linalg.norm(analytic - numeric) / max(np.linalg.norm(analytic) + np.linalg.norm(numeric), 1e-12)
            self.assertLessEqual(rel, 1e-4, msg=name)


class TestParameterCount(unittest.TestCase):
    def test_default_config(self):
        config = LSTMConfig()
        h, d = 256, 256
        expected = 4 * (1 * h + h * h + h) + 4 * (h * h + h * h + h) + h * d + d + d + 1
        self.assertEqual(count_parameters(config), expected)
        shapes = parameter_shapes(config)
        self.assertEqual(sum(int(np.prod(s)) for s in shapes.values()), expected)


class TestTraining(unittest.TestCase):
    def test_sine_loss_reduction(self):
        series = 100 + 20 * np.sin(np.arange(500) * 2 * np.pi / 50)
        config = LSTMConfig(lookback=10, hidden_units=8, recurrent_layers=1, dense_units=8,
                            dropout_rate=0.0, epochs=50, batch_size=16, learning_rate=0.01,
                            seed=1, validation_split=0.0)
        _, report = train(series, config)
        self.assertEqual(report.epochs, 50)
        self.assertLessEqual(report.train_loss[-1], 0.1 * report.train_loss[0])

    def test_same_seed_same_parameters(self):
        series = 50 + np.cumsum(np.random.default_rng(2).normal(0, 1, 120))
        config = _tiny(epochs=3, dropout_rate=0.2, validation_split=0.1)
        a, ra = train(series, config)
        b, rb = train(series, config)
        for name in a.params:
            self.assertEqual(a.params[name].tobytes(), b.params[name].tobytes())
        self.assertEqual(ra.train_loss, rb.train_loss)
        self.assertEqual(len(ra.val_loss), 3)

    def test_zero_epochs(self):
        series = np.linspace(10, 20, 30)
        config = _tiny(epochs=0)
        model, report = train(series, config)
        self.assertEqual(report.epochs, 0)
        initial = init_params(config, np.random.default_rng(np.random.SeedSequence(0).spawn(3)[0]))
        for name in initial:
            np.testing.assert_array_equal(model.params[name], initial[name])

    def test_non_finite_loss_stops_training(self):
        series = np.linspace(10, 20, 40)
        with mock.patch("modules.lstm_model.huber", return_value=np.array([np.nan])):
            with self.assertRaises(DivergenceError) as ctx:
                train(series, _tiny(epochs=2))
        self.assertEqual((ctx.exception.epoch, ctx.exception.batch), (1, 1))
        self.assertEqual(ctx.exception.exit_code, 3)

    def test_trained_model_is_read_only(self):
        model, _ = train(np.linspace(10, 20, 30), _tiny())
        with self.assertRaises(dataclasses.FrozenInstanceError):
            model.params = {}
        with self.assertRaises(TypeError):
            model.params["out_b"] = np.zeros(1)
        with self.assertRaises(ValueError):
            model.params["out_b"][0] = 1.0

    def test_too_short(self):
        with self.assertRaises(InsufficientDataError):
            train(np.arange(6.0), _tiny())

    def test_ramp_prediction(self):
        series = np.linspace(100, 300, 200)
        config = LSTMConfig(lookback=10, hidden_units=8, recurrent_layers=1, dense_units=8,
                            dropout_rate=0.0, epochs=60, batch_size=16, learning_rate=0.01,
                            seed=3, validation_split=0.0)
        model, _ = train(series, config)
        predicted = predict_next(model, series[100:110])
        self.assertLessEqual(abs(predicted - series[110]) / series[110], 0.05)


class TestPrediction(unittest.TestCase):
    def test_midpoint_when_forward_is_half(self):
        config = _tiny()
        model = LSTMModel(config, Scaler(100.0, 200.0), zero_params(config))
        self.assertEqual(predict_next(model, np.linspace(120, 180, 5)), 150.0)

    def test_bounded_output(self):
        config = _tiny()
        model = _model(config, seed=9, scaler=Scaler(50.0, 80.0))
        for recent in (np.full(5, 1000.0), np.full(5, 1.0), np.linspace(50, 80, 5)):
            p = predict_next(model, recent)
            self.assertGreater(p, 50.0)
            self.assertLess(p, 80.0)

    def test_saturated_output_stays_inside_range(self):
        config = _tiny()
        for bias, bound in ((40.0, 200.0), (-800.0, 100.0)):
            params = zero_params(config)
            params["out_b"][:] = bias
            model = LSTMModel(config, Scaler(100.0, 200.0), params)
            p = predict_next(model, np.linspace(120, 180, 5))
            self.assertNotEqual(p, bound)
            self.assertGreater(p, 100.0)
            self.assertLess(p, 200.0)

            dates = pd.bdate_range("2021-01-01", periods=8)
            path = predict_path(model, pd.Series(np.linspace(120, 180, 8), index=dates), dates[0], dates[-1])
            self.assertTrue(((path["predicted"] > 100.0) & (path["predicted"] < 200.0)).all())

    def test_length_mismatch(self):
        with self.assertRaises(ShapeError):
            predict_next(_model(_tiny()), np.ones(6))

    def test_predict_path(self):
        config = _tiny()
        model = _model(config, scaler=Scaler(0.0, 100.0))
        dates = pd.bdate_range("2021-01-01", periods=20)
        closes = pd.Series(np.linspace(10, 90, 20), index=dates)
        path = predict_path(model, closes, dates[0], dates[-1])
        # the first `lookback` dates have no full window behind them
        self.assertEqual(len(path), 15)
        self.assertEqual(path["date"].iloc[0], dates[5])
        self.assertAlmostEqual(path["predicted"].iloc[0], predict_next(model, closes.iloc[0:5].to_numpy()), places=12)


class TestCheckpoint(unittest.TestCase):
    def test_reload_reproduces_predictions(self):
        series = 80 + 10 * np.sin(np.arange(60) / 5.0)
        model, report = train(series, _tiny(epochs=2))
        with tempfile.TemporaryDirectory() as tmp:
            path = save_checkpoint(model, os.path.join(tmp, "ckpt", "A.json"), report)
            loaded = load_checkpoint(path)
        recent = series[-5:]
        self.assertEqual(predict_next(loaded, recent), predict_next(model, recent))
        self.assertEqual(loaded.config, model.config)
        self.assertEqual(loaded.n_parameters, count_parameters(model.config))


class TestSweep(unittest.TestCase):
    def test_one_row_per_combination(self):
        series = 50 + 5 * np.sin(np.arange(80) / 4.0)
        table = sweep(series, _tiny(epochs=1, validation_split=0.2), {"hidden_units": [2, 3], "lookback": [4, 5]})
        self.assertEqual(len(table), 4)
        self.assertEqual(list(table.columns), ["hidden_units", "lookback", "train_loss", "val_loss"])
        self.assertTrue(table["val_loss"].notna().all())


if __name__ == '__main__':
    unittest.main()
