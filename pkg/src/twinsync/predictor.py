"""From-scratch 1D CNN forecaster: forward, backprop, Adam training loop.

Architecture: per conv layer conv1d('same') -> batch norm -> ReLU, then
flatten -> dense head to the forecast horizon. All math in float64 so the
finite-difference gradient check can be tight.
"""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass, field, asdict

import numpy as np

from . import kernels
from .errors import (
    CorruptModel,
    DegenerateBatch,
    EmptyDataset,
    NonFiniteLoss,
    ShapeMismatch,
    VersionMismatch,
)
from .series import Normalizer, WindowedDataset

BN_EPS = 1e-5
BN_MOMENTUM = 0.1
MODEL_FORMAT_VERSION = 1


@dataclass(frozen=True)
class CnnConfig:
    window_len: int = 30
    horizon: int = 1
    conv_layers: int = 3
    kernel_size: int = 4
    channels_per_layer: tuple = (32, 32, 32)
    input_channels: int = 1
    batch_size: int = 32
    epochs: int = 50
    learning_rate: float = 0.0001
    seed: int = 0

    def __post_init__(self):
        if self.conv_layers != len(self.channels_per_layer):
            raise ValueError("conv_layers must match len(channels_per_layer)")
        if self.kernel_size < 1 or self.learning_rate <= 0:
            raise ValueError("kernel_size >= 1 and learning_rate > 0 required")

    def hash(self) -> str:
        blob = json.dumps(asdict(self), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:12]


@dataclass
class CnnModel:
    config: CnnConfig
    normalizer: Normalizer
    conv_w: list = field(default_factory=list)
    conv_b: list = field(default_factory=list)
    bn_gamma: list = field(default_factory=list)
    bn_beta: list = field(default_factory=list)
    bn_mean: list = field(default_factory=list)
    bn_var: list = field(default_factory=list)
    dense_w: np.ndarray = None
    dense_b: np.ndarray = None

    @property
    def window_len(self) -> int:
        return self.config.window_len

    @property
    def horizon(self) -> int:
        return self.config.horizon

    def named_params(self):
        """Trainable parameters only (running BN stats excluded)."""
        for i in range(len(self.conv_w)):
            yield f"conv{i}.w", self.conv_w[i]
            yield f"conv{i}.b", self.conv_b[i]
            yield f"bn{i}.gamma", self.bn_gamma[i]
            yield f"bn{i}.beta", self.bn_beta[i]
        yield "dense.w", self.dense_w
        yield "dense.b", self.dense_b

    def get_param(self, name: str) -> np.ndarray:
        return dict(self.named_params())[name]

    def copy(self) -> "CnnModel":
        return copy.deepcopy(self)

    def predict(self, window_pps: np.ndarray) -> np.ndarray:
        """Forecast from a raw pps history window; de-normalized, clamped >= 0."""
        x = self.normalizer.transform(np.asarray(window_pps, dtype=np.float64))
        y = forward(self, x[None, :], mode="infer")
        return np.maximum(0.0, self.normalizer.inverse(y[0]))


def init_model(config: CnnConfig, normalizer: Normalizer, rng=None) -> CnnModel:
    if rng is None:
        rng = np.random.Generator(np.random.PCG64(config.seed))
    model = CnnModel(config=config, normalizer=normalizer)
    c_in = config.input_channels
    for c_out in config.channels_per_layer:
        fan_in = c_in * config.kernel_size
        model.conv_w.append(rng.normal(0, np.sqrt(2.0 / fan_in), (c_out, c_in, config.kernel_size)))
        model.conv_b.append(np.zeros(c_out))
        model.bn_gamma.append(np.ones(c_out))
        model.bn_beta.append(np.zeros(c_out))
        model.bn_mean.append(np.zeros(c_out))
        model.bn_var.append(np.ones(c_out))
        c_in = c_out
    feat = c_in * config.window_len
    model.dense_w = rng.normal(0, np.sqrt(1.0 / feat), (config.horizon, feat))
    model.dense_b = np.zeros(config.horizon)
    return model


def conv1d_same(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Single-sample 'same' cross-correlation: (c_in, len) -> (c_out, len)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or w.ndim != 3 or x.shape[0] != w.shape[1]:
        raise ShapeMismatch(f"incompatible shapes {x.shape} and {w.shape}")
    return kernels.conv1d_forward(x[None], w, b)[0]


def batchnorm_forward(x, gamma, beta, running_mean, running_var, mode):
    """Per-channel batch norm over (batch, channel, len).

    Train mode normalizes by batch statistics and returns updated running
    stats; infer mode uses the running stats.
    """
    batch, channels, length = x.shape
    if mode == "train":
        if batch * length < 2:
            raise DegenerateBatch("train-mode batch norm needs >= 2 values per channel")
        mean = x.mean(axis=(0, 2))
        var = x.var(axis=(0, 2))
        new_mean = (1 - BN_MOMENTUM) * running_mean + BN_MOMENTUM * mean
        new_var = (1 - BN_MOMENTUM) * running_var + BN_MOMENTUM * var
    elif mode == "infer":
        mean, var = running_mean, running_var
        new_mean, new_var = running_mean, running_var
    else:
        raise ValueError(f"unknown mode {mode!r}")
    invstd = 1.0 / np.sqrt(var + BN_EPS)
    xhat = (x - mean[None, :, None]) * invstd[None, :, None]
    y = gamma[None, :, None] * xhat + beta[None, :, None]
    cache = {"xhat": xhat, "invstd": invstd, "gamma": gamma, "n": batch * length}
    return y, (new_mean, new_var), cache


def _batchnorm_backward(gy, cache):
    xhat, invstd, gamma, n = cache["xhat"], cache["invstd"], cache["gamma"], cache["n"]
    dgamma = np.sum(gy * xhat, axis=(0, 2))
    dbeta = np.sum(gy, axis=(0, 2))
    dxhat = gy * gamma[None, :, None]
    # backprop through the batch mean/var used in normalization
    dx = (invstd[None, :, None] / n) * (
        n * dxhat
        - np.sum(dxhat, axis=(0, 2))[None, :, None]
        - xhat * np.sum(dxhat * xhat, axis=(0, 2))[None, :, None]
    )
    return dx, dgamma, dbeta


def forward(model: CnnModel, windows: np.ndarray, mode: str = "infer",
            update_running: bool = False, return_cache: bool = False):
    """Run the network on a batch of normalized windows -> (batch, horizon)."""
    x = np.asarray(windows, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.config.window_len:
        raise ShapeMismatch(f"expected (batch, {model.config.window_len}), got {x.shape}")
    h = x[:, None, :]  # (batch, 1, len)
    cache = {"layers": []}
    for i in range(len(model.conv_w)):
        conv_in = h
        z = kernels.conv1d_forward(conv_in, model.conv_w[i], model.conv_b[i])
        a, (rm, rv), bn_cache = batchnorm_forward(
            z, model.bn_gamma[i], model.bn_beta[i],
            model.bn_mean[i], model.bn_var[i], mode,
        )
        if mode == "train" and update_running:
            model.bn_mean[i] = rm
            model.bn_var[i] = rv
        relu_mask = a > 0
        h = a * relu_mask
        cache["layers"].append({"conv_in": conv_in, "bn": bn_cache, "relu_mask": relu_mask})
    flat = h.reshape(h.shape[0], -1)
    y = flat @ model.dense_w.T + model.dense_b
    cache["flat"] = flat
    cache["relu_shape"] = h.shape
    if return_cache:
        return y, cache
    return y


def mse_loss(pred: np.ndarray, target: np.ndarray) -> float:
    return float(np.mean((pred - target) ** 2))


def backward(model: CnnModel, cache, pred, target) -> dict:
    """Gradients of the MSE loss w.r.t. every trainable parameter."""
    grads = {}
    g = 2.0 * (pred - target) / pred.size  # d(mean squared error)/d(pred)
    grads["dense.w"] = g.T @ cache["flat"]
    grads["dense.b"] = g.sum(axis=0)
    gh = (g @ model.dense_w).reshape(cache["relu_shape"])
    for i in reversed(range(len(model.conv_w))):
        layer = cache["layers"][i]
        ga = gh * layer["relu_mask"]
        gz, dgamma, dbeta = _batchnorm_backward(ga, layer["bn"])
        grads[f"bn{i}.gamma"] = dgamma
        grads[f"bn{i}.beta"] = dbeta
        gh, gw, gb = kernels.conv1d_backward(layer["conv_in"], model.conv_w[i], gz)
        grads[f"conv{i}.w"] = gw
        grads[f"conv{i}.b"] = gb
    return grads


def loss_and_grads(model: CnnModel, windows, targets, update_running=False):
    pred, cache = forward(model, windows, mode="train",
                          update_running=update_running, return_cache=True)
    loss = mse_loss(pred, targets)
    return loss, backward(model, cache, pred, targets)


class _Adam:
    def __init__(self, model: CnnModel, lr: float, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.t = 0
        self.m = {name: np.zeros_like(p) for name, p in model.named_params()}
        self.v = {name: np.zeros_like(p) for name, p in model.named_params()}

    def step(self, model: CnnModel, grads: dict):
        self.t += 1
        bc1 = 1 - self.beta1**self.t
        bc2 = 1 - self.beta2**self.t
        for name, p in model.named_params():
            g = grads[name]
            self.m[name] = self.beta1 * self.m[name] + (1 - self.beta1) * g
            self.v[name] = self.beta2 * self.v[name] + (1 - self.beta2) * g * g
            p -= self.lr * (self.m[name] / bc1) / (np.sqrt(self.v[name] / bc2) + self.eps)


def train(config: CnnConfig, train_ds: WindowedDataset, val_ds: WindowedDataset,
          normalizer: Normalizer):
    """Seeded Adam training; keeps the parameters with the best validation MAE.

    Returns (model, trace) where trace is one dict per epoch with the mean
    training loss and the de-normalized validation MAE.
    """
    if len(train_ds) == 0 or len(val_ds) == 0:
        raise EmptyDataset("train and validation datasets must be non-empty")
    rng = np.random.Generator(np.random.PCG64(config.seed))
    model = init_model(config, normalizer, rng)
    opt = _Adam(model, config.learning_rate)
    best_mae = np.inf
    best_model = model.copy()
    trace = []
    for epoch in range(config.epochs):
        order = rng.permutation(len(train_ds))
        batch_losses = []
        for start in range(0, len(order), config.batch_size):
            idx = order[start : start + config.batch_size]
            loss, grads = loss_and_grads(
                model, train_ds.inputs[idx], train_ds.targets[idx], update_running=True
            )
            if not np.isfinite(loss):
                raise NonFiniteLoss(
                    f"non-finite loss at epoch {epoch}, batch {start // config.batch_size}"
                )
            opt.step(model, grads)
            batch_losses.append(loss)
        val = evaluate(model, val_ds)
        trace.append({"epoch": epoch, "train_loss": float(np.mean(batch_losses)),
                      "val_mae": val["mae"]})
        if val["mae"] < best_mae:
            best_mae = val["mae"]
            best_model = model.copy()
    return best_model, trace


def mae_rmse(pred: np.ndarray, actual: np.ndarray) -> dict:
    err = np.asarray(pred, dtype=np.float64) - np.asarray(actual, dtype=np.float64)
    return {"mae": float(np.mean(np.abs(err))), "rmse": float(np.sqrt(np.mean(err**2)))}


def evaluate(model: CnnModel, ds: WindowedDataset) -> dict:
    """MAE / RMSE in de-normalized pps units, predictions clamped at zero."""
    if len(ds) == 0:
        raise EmptyDataset("cannot evaluate an empty dataset")
    pred = forward(model, ds.inputs, mode="infer")
    pred_pps = np.maximum(0.0, model.normalizer.inverse(pred))
    actual_pps = model.normalizer.inverse(ds.targets)
    return mae_rmse(pred_pps, actual_pps)


def persistence_mae(ds: WindowedDataset, normalizer: Normalizer) -> float:
    """Naive 'next value = last observed' baseline, in pps units."""
    if len(ds) == 0:
        raise EmptyDataset("cannot evaluate an empty dataset")
    pred = np.repeat(ds.inputs[:, -1:], ds.horizon, axis=1)
    err = normalizer.inverse(pred) - normalizer.inverse(ds.targets)
    return float(np.mean(np.abs(err)))


def save_model(model: CnnModel) -> bytes:
    layers = []
    for i in range(len(model.conv_w)):
        layers.append({
            "type": "conv",
            "shape": list(model.conv_w[i].shape),
            "weights": model.conv_w[i].ravel().tolist(),
            "bias": model.conv_b[i].tolist(),
        })
        layers.append({
            "type": "batchnorm",
            "gamma": model.bn_gamma[i].tolist(),
            "beta": model.bn_beta[i].tolist(),
            "running_mean": model.bn_mean[i].tolist(),
            "running_var": model.bn_var[i].tolist(),
        })
    layers.append({
        "type": "dense",
        "shape": list(model.dense_w.shape),
        "weights": model.dense_w.ravel().tolist(),
        "bias": model.dense_b.tolist(),
    })
    doc = {
        "format_version": MODEL_FORMAT_VERSION,
        "config": asdict(model.config),
        "normalizer": {"min": model.normalizer.min_val, "max": model.normalizer.max_val},
        "layers": layers,
    }
    return json.dumps(doc).encode("utf-8")


def load_model(data: bytes) -> CnnModel:
    try:
        doc = json.loads(data.decode("utf-8"))
    except (ValueError, UnicodeDecodeError) as exc:
        raise CorruptModel(f"unreadable model file: {exc}") from exc
    if not isinstance(doc, dict) or "format_version" not in doc:
        raise CorruptModel("missing format_version")
    if doc["format_version"] != MODEL_FORMAT_VERSION:
        raise VersionMismatch(f"unsupported model format {doc['format_version']!r}")
    try:
        cfg = doc["config"]
        cfg["channels_per_layer"] = tuple(cfg["channels_per_layer"])
        config = CnnConfig(**cfg)
        norm = Normalizer(doc["normalizer"]["min"], doc["normalizer"]["max"])
        model = CnnModel(config=config, normalizer=norm)
        it = iter(doc["layers"])
        for layer in it:
            if layer["type"] == "conv":
                shape = tuple(layer["shape"])
                model.conv_w.append(np.array(layer["weights"]).reshape(shape))
                model.conv_b.append(np.array(layer["bias"]))
            elif layer["type"] == "batchnorm":
                model.bn_gamma.append(np.array(layer["gamma"]))
                model.bn_beta.append(np.array(layer["beta"]))
                model.bn_mean.append(np.array(layer["running_mean"]))
                model.bn_var.append(np.array(layer["running_var"]))
            elif layer["type"] == "dense":
                shape = tuple(layer["shape"])
                model.dense_w = np.array(layer["weights"]).reshape(shape)
                model.dense_b = np.array(layer["bias"])
            else:
                raise CorruptModel(f"unknown layer type {layer['type']!r}")
        if model.dense_w is None or len(model.conv_w) != config.conv_layers:
            raise CorruptModel("layer list inconsistent with config")
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptModel(f"malformed model document: {exc}") from exc
    return model
