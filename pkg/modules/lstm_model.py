# ============================================================
# lstm_model.py
# One-day-ahead close-price forecaster: stacked LSTM -> dropout ->
# dense (ReLU) -> sigmoid output, trained on min-max scaled closes
# with Huber loss and Adam steps.
#
# Architecture (default config):
#   LSTM(256, full sequence) -> dropout 0.3
#   LSTM(256, final state)   -> dropout 0.3
#   Dense(256, ReLU) -> Dense(1, sigmoid)
#
# Conventions:
# - Gate order inside the stacked matrices is (i, f, g, o).
# - All arithmetic is float64; checkpoints are JSON with repr floats.
# - Dropout is inverted (scaled by 1/(1-p) at train time).
# - One seeded Generator each for init, shuffling and dropout masks.
# ============================================================

import itertools
import logging
import os
from dataclasses import asdict, dataclass, field, replace
from types import MappingProxyType
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from modules.errors import (
    ArgumentError,
    ConfigError,
    DegenerateRangeError,
    DivergenceError,
    InsufficientDataError,
    ShapeError,
)
from modules.utils import read_json, write_json

logger = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "sector-lstm-checkpoint"
CHECKPOINT_PRECISION = "float64"


# ============================================================
# 0. Configuration, scaler, model and report types
# ============================================================

@dataclass(frozen=True)
class LSTMConfig:
    lookback: int = 50
    hidden_units: int = 256
    recurrent_layers: int = 2
    dropout_rate: float = 0.30
    dense_units: int = 256
    horizon: int = 1
    batch_size: int = 64
    epochs: int = 100
    learning_rate: float = 1e-3
    seed: int = 0
    huber_delta: float = 1.0
    validation_split: float = 0.10

    def __post_init__(self):
        problems = []
        for name in ("lookback", "horizon", "batch_size", "hidden_units",
                     "recurrent_layers", "dense_units"):
            if int(getattr(self, name)) < 1:
                problems.append(f"{name} must be >= 1")
        if int(self.epochs) < 0:
            problems.append("epochs must be >= 0")
        if not 0.0 <= float(self.dropout_rate) < 1.0:
            problems.append("dropout_rate must be in [0, 1)")
        if not 0.0 <= float(self.validation_split) < 1.0:
            problems.append("validation_split must be in [0, 1)")
        if not 0 < float(self.learning_rate) < np.inf:
            problems.append("learning_rate must be finite and > 0")
        if not float(self.huber_delta) > 0:
            problems.append("huber_delta must be > 0")
        if problems:
            raise ConfigError("Invalid LSTM config: " + "; ".join(problems))

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class Scaler:
    """Min-max scaler captured from the training closes."""

    min_price: float
    max_price: float

    def __post_init__(self):
        if not self.max_price > self.min_price:
            raise DegenerateRangeError(
                f"Scaler range is empty (min={self.min_price}, max={self.max_price})."
            )

    @property
    def span(self) -> float:
        return self.max_price - self.min_price


def _read_only(params: Mapping[str, np.ndarray]) -> Mapping[str, np.ndarray]:
    frozen = {}
    for name, value in params.items():
        value = np.array(value, dtype=np.float64)
        value.flags.writeable = False
        frozen[name] = value
    return MappingProxyType(frozen)


@dataclass(frozen=True)
class LSTMModel:
    config: LSTMConfig
    scaler: Scaler
    params: Mapping[str, np.ndarray]

    @property
    def n_parameters(self) -> int:
        return int(sum(p.size for p in self.params.values()))


@dataclass
class TrainingReport:
    """Per-epoch Huber loss and MAE (scaled space), plus validation if configured."""

    train_loss: List[float] = field(default_factory=list)
    train_mae: List[float] = field(default_factory=list)
    val_loss: List[float] = field(default_factory=list)
    val_mae: List[float] = field(default_factory=list)
    n_train: int = 0
    n_validation: int = 0

    @property
    def epochs(self) -> int:
        return len(self.train_loss)

    @property
    def final_val_loss(self) -> Optional[float]:
        return self.val_loss[-1] if self.val_loss else None

    def to_dict(self) -> dict:
        return {
            "epochs": self.epochs,
            "n_train": self.n_train,
            "n_validation": self.n_validation,
            "train_loss": self.train_loss,
            "train_mae": self.train_mae,
            "val_loss": self.val_loss,
            "val_mae": self.val_mae,
        }


# ============================================================
# 1. Windowing and scaling
# ============================================================

def make_windows(series, lookback: int, horizon: int = 1) -> Tuple[np.ndarray, np.ndarray]:
    """
    Sliding windows over an ordered price series.

    Window i = prices[i : i+lookback], target i = prices[i+lookback+horizon-1].
    Returns X of shape (count, lookback, 1) and y of shape (count,).
    """
    prices = np.asarray(series, dtype=float).ravel()
    count = len(prices) - lookback - horizon + 1
    if count < 1:
        raise InsufficientDataError(
            f"Series of length {len(prices)} is too short for lookback={lookback}, "
            f"horizon={horizon}."
        )
    X = np.lib.stride_tricks.sliding_window_view(prices, lookback)[:count].copy()
    y = prices[lookback + horizon - 1: lookback + horizon - 1 + count].copy()
    return X[:, :, None], y


def fit_scaler(prices) -> Scaler:
    arr = np.asarray(prices, dtype=float).ravel()
    if arr.size == 0:
        raise InsufficientDataError("Cannot fit a scaler on an empty price series.")
    return Scaler(float(arr.min()), float(arr.max()))


def apply_scaler(prices, scaler: Scaler) -> np.ndarray:
    # no clamping: out-of-range prices land outside [0, 1]
    return (np.asarray(prices, dtype=float) - scaler.min_price) / scaler.span


def invert_scaler(scaled, scaler: Scaler) -> np.ndarray:
    return np.asarray(scaled, dtype=float) * scaler.span + scaler.min_price


def _inside_range(prices, scaler: Scaler) -> np.ndarray:
    # a saturated sigmoid rounds to exactly 0 or 1
    return np.clip(
        prices,
        np.nextafter(scaler.min_price, np.inf),
        np.nextafter(scaler.max_price, -np.inf),
    )


# ============================================================
# 2. Parameters
# ============================================================

def _layer_input_size(layer: int, config: LSTMConfig) -> int:
    return 1 if layer == 0 else config.hidden_units


def parameter_shapes(config: LSTMConfig) -> Dict[str, tuple]:
    h, d = config.hidden_units, config.dense_units
    shapes = {}
    for layer in range(config.recurrent_layers):
        n_in = _layer_input_size(layer, config)
        shapes[f"lstm_{layer}_W"] = (4 * h, n_in)
        shapes[f"lstm_{layer}_U"] = (4 * h, h)
        shapes[f"lstm_{layer}_b"] = (4 * h,)
    shapes["dense_W"] = (d, h)
    shapes["dense_b"] = (d,)
    shapes["out_W"] = (d,)
    shapes["out_b"] = (1,)
    return shapes


def count_parameters(config: LSTMConfig) -> int:
    """Closed form: 4(in*h + h*h + h) per recurrent layer + h*d + d + d + 1."""
    h, d = config.hidden_units, config.dense_units
    total = 0
    for layer in range(config.recurrent_layers):
        n_in = _layer_input_size(layer, config)
        total += 4 * (n_in * h + h * h + h)
    return total + h * d + d + d + 1


def _fan_in(name: str, config: LSTMConfig) -> int:
    if name.startswith("lstm_"):
        layer = int(name.split("_")[1])
        return _layer_input_size(layer, config) + config.hidden_units
    if name.startswith("dense_"):
        return config.hidden_units
    return config.dense_units


def init_params(config: LSTMConfig, rng: np.random.Generator) -> Dict[str, np.ndarray]:
    """uniform(-s, s), s = 1/sqrt(fan_in); drawn in parameter_shapes order."""
    params = {}
    for name, shape in parameter_shapes(config).items():
        s = 1.0 / np.sqrt(_fan_in(name, config))
        params[name] = rng.uniform(-s, s, size=shape)
    return params


def zero_params(config: LSTMConfig) -> Dict[str, np.ndarray]:
    return {name: np.zeros(shape) for name, shape in parameter_shapes(config).items()}


# ============================================================
# 3. Forward / backward
# ============================================================

def _sigmoid(x):
    # split by sign to avoid overflow in exp
    out = np.empty_like(x, dtype=float)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def huber(residual, delta: float = 1.0) -> np.ndarray:
    r = np.abs(np.asarray(residual, dtype=float))
    return np.where(r <= delta, 0.5 * r ** 2, delta * (r - 0.5 * delta))


def huber_grad(residual, delta: float = 1.0) -> np.ndarray:
    return np.clip(np.asarray(residual, dtype=float), -delta, delta)


def _dropout_mask(shape, rate: float, rng: np.random.Generator) -> np.ndarray:
    return (rng.random(shape) >= rate) / (1.0 - rate)


def _as_batch(X, lookback: int) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 2:
        X = X[:, :, None]
    if X.ndim != 3 or X.shape[1] != lookback or X.shape[2] != 1:
        raise ShapeError(f"Expected windows of shape (batch, {lookback}, 1), got {X.shape}.")
    return X


def _forward_batch(params, config: LSTMConfig, X: np.ndarray, training: bool,
                   rng: Optional[np.random.Generator]):
    """X: (B, L, 1) scaled windows. Returns (predictions (B,), cache)."""
    H = config.hidden_units
    B, L, _ = X.shape
    use_dropout = training and config.dropout_rate > 0
    if use_dropout and rng is None:
        raise ArgumentError("Training-mode dropout needs a random generator.")

    seq = X
    layers = []
    for layer in range(config.recurrent_layers):
        W = params[f"lstm_{layer}_W"]
        U = params[f"lstm_{layer}_U"]
        b = params[f"lstm_{layer}_b"]
        last = layer == config.recurrent_layers - 1

        h = np.zeros((B, H))
        c = np.zeros((B, H))
        steps = []
        hs = np.empty((B, L, H))
        # input projection for every step at once
        xw = seq @ W.T + b
        for t in range(L):
            z = xw[:, t] + h @ U.T
            i = _sigmoid(z[:, :H])
            f = _sigmoid(z[:, H:2 * H])
            g = np.tanh(z[:, 2 * H:3 * H])
            o = _sigmoid(z[:, 3 * H:])
            c_prev, h_prev = c, h
            c = f * c_prev + i * g
            tanh_c = np.tanh(c)
            h = o * tanh_c
            hs[:, t] = h
            steps.append((h_prev, c_prev, i, f, g, o, tanh_c))

        out = h if last else hs
        mask = _dropout_mask(out.shape, config.dropout_rate, rng) if use_dropout else None
        if mask is not None:
            out = out * mask
        layers.append({"input": seq, "steps": steps, "mask": mask})
        seq = out

    features = seq
    a = features @ params["dense_W"].T + params["dense_b"]
    r = np.maximum(a, 0.0)
    p = _sigmoid(r @ params["out_W"] + params["out_b"][0])

    cache = {"layers": layers, "features": features, "a": a, "r": r, "p": p}
    return p, cache


def _backward_batch(params, config: LSTMConfig, cache, dp: np.ndarray) -> Dict[str, np.ndarray]:
    H = config.hidden_units
    grads = {name: np.zeros_like(v) for name, v in params.items()}

    p, r, a, features = cache["p"], cache["r"], cache["a"], cache["features"]
    dz_out = dp * p * (1.0 - p)
    grads["out_W"] = r.T @ dz_out
    grads["out_b"] = np.array([dz_out.sum()])

    dr = np.outer(dz_out, params["out_W"])
    da = dr * (a > 0)
    grads["dense_W"] = da.T @ features
    grads["dense_b"] = da.sum(axis=0)
    d_out = da @ params["dense_W"]

    layers = cache["layers"]
    for layer in reversed(range(config.recurrent_layers)):
        lc = layers[layer]
        last = layer == config.recurrent_layers - 1
        if lc["mask"] is not None:
            d_out = d_out * lc["mask"]

        x_seq = lc["input"]
        B, L, _ = x_seq.shape
        if last:
            dh_seq = np.zeros((B, L, H))
            dh_seq[:, -1] = d_out
        else:
            dh_seq = d_out

        W = params[f"lstm_{layer}_W"]
        U = params[f"lstm_{layer}_U"]
        dW = np.zeros_like(W)
        dU = np.zeros_like(U)
        db = np.zeros(4 * H)
        dx_seq = np.zeros_like(x_seq)
        dh_next = np.zeros((B, H))
        dc_next = np.zeros((B, H))

        for t in reversed(range(L)):
            h_prev, c_prev, i, f, g, o, tanh_c = lc["steps"][t]
            dh = dh_seq[:, t] + dh_next
            do = dh * tanh_c
            dc = dh * o * (1.0 - tanh_c ** 2) + dc_next
            di = dc * g
            dg = dc * i
            df = dc * c_prev
            dc_next = dc * f

            dz = np.concatenate(
                [di * i * (1.0 - i), df * f * (1.0 - f), dg * (1.0 - g ** 2), do * o * (1.0 - o)],
                axis=1,
            )
            dW += dz.T @ x_seq[:, t]
            dU += dz.T @ h_prev
            db += dz.sum(axis=0)
            dx_seq[:, t] = dz @ W
            dh_next = dz @ U

        grads[f"lstm_{layer}_W"] = dW
        grads[f"lstm_{layer}_U"] = dU
        grads[f"lstm_{layer}_b"] = db
        d_out = dx_seq

    return grads


def forward(model: LSTMModel, window, training_mode: bool = False,
            rng: Optional[np.random.Generator] = None) -> float:
    """Scaled prediction in (0, 1) for one scaled window of length lookback."""
    w = np.asarray(window, dtype=float)
    lookback = model.config.lookback
    if w.shape not in ((lookback,), (lookback, 1)):
        raise ShapeError(f"Window must have length {lookback}, got shape {w.shape}.")
    p, _ = _forward_batch(model.params, model.config, w.reshape(1, lookback, 1),
                          training_mode, rng)
    return float(p[0])


def loss_and_gradients(model: LSTMModel, X, y, training_mode: bool = False,
                       rng: Optional[np.random.Generator] = None):
    """Mean Huber loss over the batch and its analytic gradient for every parameter."""
    X = _as_batch(X, model.config.lookback)
    y = np.asarray(y, dtype=float).ravel()
    if y.shape[0] != X.shape[0]:
        raise ShapeError(f"{X.shape[0]} windows but {y.shape[0]} targets.")
    p, cache = _forward_batch(model.params, model.config, X, training_mode, rng)
    residual = p - y
    loss = float(huber(residual, model.config.huber_delta).mean())
    dp = huber_grad(residual, model.config.huber_delta) / len(y)
    return loss, _backward_batch(model.params, model.config, cache, dp)


# ============================================================
# 4. Training
# ============================================================

class _Adam:
    def __init__(self, params, lr, beta1=0.9, beta2=0.999, eps=1e-7):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params, grads):
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for k in params:
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * grads[k]
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * grads[k] ** 2
            params[k] -= self.lr * (self.m[k] / c1) / (np.sqrt(self.v[k] / c2) + self.eps)


def _evaluate(params, config: LSTMConfig, X, y) -> Tuple[float, float]:
    p, _ = _forward_batch(params, config, X, False, None)
    residual = p - y
    return float(huber(residual, config.huber_delta).mean()), float(np.abs(residual).mean())


def train(series, config: LSTMConfig, label: str = "") -> Tuple[LSTMModel, TrainingReport]:
    """
    Fit one model on an ordered close series.

    The scaler is fit on the full series; the last `validation_split` share
    of windows (chronological tail) is held out for validation.
    """
    prices = np.asarray(series, dtype=float).ravel()
    needed = config.lookback + config.horizon + 1
    if len(prices) < needed:
        raise InsufficientDataError(
            f"{label or 'Series'}: {len(prices)} closes, training needs at least {needed}."
        )

    init_rng, shuffle_rng, dropout_rng = (
        np.random.default_rng(s) for s in np.random.SeedSequence(config.seed).spawn(3)
    )

    scaler = fit_scaler(prices)
    X, y = make_windows(apply_scaler(prices, scaler), config.lookback, config.horizon)

    n_val = int(np.floor(len(y) * config.validation_split))
    if n_val >= len(y):
        n_val = 0
    n_train = len(y) - n_val
    X_train, y_train = X[:n_train], y[:n_train]
    X_val, y_val = X[n_train:], y[n_train:]

    params = init_params(config, init_rng)
    report = TrainingReport(n_train=n_train, n_validation=n_val)
    optimizer = _Adam(params, config.learning_rate)

    for epoch in range(config.epochs):
        order = shuffle_rng.permutation(n_train)
        loss_sum = 0.0
        mae_sum = 0.0
        for batch, start in enumerate(range(0, n_train, config.batch_size)):
            idx = order[start:start + config.batch_size]
            Xb, yb = X_train[idx], y_train[idx]
            p, cache = _forward_batch(params, config, Xb, True, dropout_rng)
            residual = p - yb
            loss = float(huber(residual, config.huber_delta).mean())
            if not np.isfinite(loss):
                raise DivergenceError(epoch + 1, batch + 1, loss)
            dp = huber_grad(residual, config.huber_delta) / len(yb)
            grads = _backward_batch(params, config, cache, dp)
            optimizer.step(params, grads)
            loss_sum += loss * len(yb)
            mae_sum += float(np.abs(residual).sum())

        report.train_loss.append(loss_sum / n_train)
        report.train_mae.append(mae_sum / n_train)
        if n_val:
            v_loss, v_mae = _evaluate(params, config, X_val, y_val)
            report.val_loss.append(v_loss)
            report.val_mae.append(v_mae)

        logger.debug(
            f"  {label} epoch {epoch + 1}/{config.epochs}: loss={report.train_loss[-1]:.6f}"
            + (f", val_loss={report.val_loss[-1]:.6f}" if n_val else "")
        )

    return LSTMModel(config=config, scaler=scaler, params=_read_only(params)), report


# ============================================================
# 5. Prediction
# ============================================================

def predict_next(model: LSTMModel, recent) -> float:
    """Price `horizon` days after the last of `recent` (exactly `lookback` closes)."""
    recent = np.asarray(recent, dtype=float).ravel()
    if recent.shape[0] != model.config.lookback:
        raise ShapeError(
            f"predict_next needs {model.config.lookback} recent closes, got {recent.shape[0]}."
        )
    scaled = forward(model, apply_scaler(recent, model.scaler))
    return float(_inside_range(invert_scaler(scaled, model.scaler), model.scaler))


def predict_path(model: LSTMModel, closes: pd.Series, start, end) -> pd.DataFrame:
    """
    Rolling predictions for every date of `closes` in [start, end].

    Each prediction uses the `lookback` actual closes ending `horizon` rows
    before the target date; dates without enough history are skipped.
    """
    cfg = model.config
    values = closes.to_numpy(dtype=float)
    dates = closes.index
    positions = np.flatnonzero((dates >= pd.Timestamp(start)) & (dates <= pd.Timestamp(end)))
    positions = positions[positions - cfg.horizon - cfg.lookback + 1 >= 0]

    if positions.size == 0:
        return pd.DataFrame(columns=["date", "actual", "predicted"])

    windows = np.stack(
        [values[p - cfg.horizon - cfg.lookback + 1: p - cfg.horizon + 1] for p in positions]
    )
    scaled = apply_scaler(windows, model.scaler)[:, :, None]
    preds, _ = _forward_batch(model.params, cfg, scaled, False, None)
    return pd.DataFrame(
        {
            "date": dates[positions],
            "actual": values[positions],
            "predicted": _inside_range(invert_scaler(preds, model.scaler), model.scaler),
        }
    )


# ============================================================
# 6. Grid sweep
# ============================================================

def sweep(series, base_config: LSTMConfig, grid: Mapping[str, Sequence]) -> pd.DataFrame:
    """Train once per combination of `grid` values; one row per combination."""
    names = list(grid.keys())
    rows = []
    for combo in itertools.product(*(grid[n] for n in names)):
        overrides = dict(zip(names, combo))
        cfg = replace(base_config, **overrides)
        _, report = train(series, cfg, label="sweep")
        row = dict(overrides)
        row["train_loss"] = report.train_loss[-1] if report.train_loss else np.nan
        row["val_loss"] = report.final_val_loss if report.final_val_loss is not None else np.nan
        rows.append(row)
        logger.info(f"  Sweep {overrides}: train_loss={row['train_loss']:.6f}, val_loss={row['val_loss']:.6f}")
    return pd.DataFrame(rows, columns=names + ["train_loss", "val_loss"])


# ============================================================
# 7. Checkpoints
# ============================================================

def save_checkpoint(model: LSTMModel, path, report: Optional[TrainingReport] = None) -> str:
    doc = {
        "format": CHECKPOINT_FORMAT,
        "precision": CHECKPOINT_PRECISION,
        "config": model.config.to_dict(),
        "scaler": {"min_price": model.scaler.min_price, "max_price": model.scaler.max_price},
        "parameters": {
            name: {"shape": list(value.shape), "values": value.ravel()}
            for name, value in model.params.items()
        },
    }
    if report is not None:
        doc["training"] = report.to_dict()
    return write_json(doc, str(path))


def load_checkpoint(path) -> LSTMModel:
    doc = read_json(str(path))
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise ShapeError(f"{os.path.basename(str(path))} is not an LSTM checkpoint.")
    config = LSTMConfig(**doc["config"])
    scaler = Scaler(float(doc["scaler"]["min_price"]), float(doc["scaler"]["max_price"]))

    expected = parameter_shapes(config)
    params = {}
    for name, shape in expected.items():
        entry = doc["parameters"].get(name)
        if entry is None or tuple(entry["shape"]) != shape:
            raise ShapeError(f"Checkpoint parameter {name} missing or not of shape {shape}.")
        params[name] = np.asarray(entry["values"], dtype=np.float64).reshape(shape)
    return LSTMModel(config=config, scaler=scaler, params=_read_only(params))
