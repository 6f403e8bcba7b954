"""The fixed waypoint-regression CNN: parameters, forward/backward, serialization.

Architecture (26 x 26 x 4 input): 5x5x32 same conv, batchnorm, leaky ReLU,
2x2 max pool, 3x3x64 same conv, batchnorm, leaky ReLU, dropout 0.5, flatten
to 10816, dense 128, leaky ReLU, dense 2, sigmoid. Output lives in (0, 1)^2
and is rescaled to environment coordinates for control.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .. import nnt
from ..encoding import encoding_to_input
from ..world import Environment
from . import layers

GRID_SIDE = 26
IN_CHANNELS = 4
FLAT_FEATURES = 13 * 13 * 64  # 10816
ARCH_ID = "wpnet-26x26x4-v1"
LEAKY_SLOPE = 0.01
BN_EPS = 1e-5
BN_MOMENTUM = 0.1

PARAM_SHAPES: list[tuple[str, tuple[int, ...]]] = [
    ("conv1_w", (32, IN_CHANNELS, 5, 5)),
    ("conv1_b", (32,)),
    ("bn1_gamma", (32,)),
    ("bn1_beta", (32,)),
    ("conv2_w", (64, 32, 3, 3)),
    ("conv2_b", (64,)),
    ("bn2_gamma", (64,)),
    ("bn2_beta", (64,)),
    ("fc1_w", (128, FLAT_FEATURES)),
    ("fc1_b", (128,)),
    ("fc2_w", (2, 128)),
    ("fc2_b", (2,)),
]
STAT_SHAPES: list[tuple[str, tuple[int, ...]]] = [
    ("bn1_mean", (32,)),
    ("bn1_var", (32,)),
    ("bn2_mean", (64,)),
    ("bn2_var", (64,)),
]
PARAM_NAMES = [name for name, _ in PARAM_SHAPES]


@dataclass
class CnnModel:
    params: dict[str, np.ndarray]
    stats: dict[str, np.ndarray]

    def copy(self) -> "CnnModel":
        return CnnModel({k: v.copy() for k, v in self.params.items()},
                        {k: v.copy() for k, v in self.stats.items()})

    def astype(self, dtype) -> "CnnModel":
        return CnnModel({k: v.astype(dtype) for k, v in self.params.items()},
                        {k: v.astype(dtype) for k, v in self.stats.items()})

    def n_parameters(self) -> int:
        return sum(v.size for v in self.params.values())


def init_model(seed: int = 0) -> CnnModel:
    """He-uniform fan-in init for hidden conv/dense weights; identity batchnorm.

    The output layer starts at zero so predictions begin at the sigmoid
    midpoint: Adam's first step from a zero state moves every weight by
    about +-lr, and through a 10816-wide fan-in that coherent kick saturates
    the sigmoid head hard enough to stall training for hundreds of steps.
    """
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x6E6E2D696E6974]))
    params: dict[str, np.ndarray] = {}
    for name, shape in PARAM_SHAPES:
        if name == "fc2_w":
            params[name] = np.zeros(shape)
        elif name.endswith("_w"):
            fan_in = int(np.prod(shape[1:]))
            limit = math.sqrt(6.0 / fan_in)
            params[name] = rng.uniform(-limit, limit, size=shape)
        elif "gamma" in name:
            params[name] = np.ones(shape)
        else:
            params[name] = np.zeros(shape)
    stats = {name: (np.ones(shape) if "var" in name else np.zeros(shape))
             for name, shape in STAT_SHAPES}
    return CnnModel(params, stats)


def forward(model: CnnModel, x: np.ndarray, train: bool = False,
            drop_rng: np.random.Generator | None = None,
            dropout_p: float = 0.5):
    """Batch forward pass; returns (predictions, cache).

    Pure in both modes: train-mode batch statistics are reported in the cache
    and folded into the running stats by :func:`apply_bn_updates`.
    """
    if x.ndim != 4 or x.shape[1:] != (IN_CHANNELS, GRID_SIDE, GRID_SIDE):
        raise ValueError(f"expected (N, {IN_CHANNELS}, {GRID_SIDE}, {GRID_SIDE}) input, "
                         f"got {x.shape}")
    p = model.params
    cache: dict[str, object] = {}

    out, cache["conv1"] = layers.conv2d_forward(x, p["conv1_w"], p["conv1_b"])
    out, cache["bn1"] = layers.batchnorm_forward(
        out, p["bn1_gamma"], p["bn1_beta"], model.stats["bn1_mean"],
        model.stats["bn1_var"], train, BN_EPS)
    out, cache["act1"] = layers.leaky_relu_forward(out, LEAKY_SLOPE)
    out, cache["pool"] = layers.maxpool2_forward(out)
    assert out.shape[1:] == (32, 13, 13)

    out, cache["conv2"] = layers.conv2d_forward(out, p["conv2_w"], p["conv2_b"])
    out, cache["bn2"] = layers.batchnorm_forward(
        out, p["bn2_gamma"], p["bn2_beta"], model.stats["bn2_mean"],
        model.stats["bn2_var"], train, BN_EPS)
    out, cache["act2"] = layers.leaky_relu_forward(out, LEAKY_SLOPE)
    out, cache["drop"] = layers.dropout_forward(out, dropout_p, train, drop_rng)

    flat = out.reshape(out.shape[0], FLAT_FEATURES)
    out, cache["fc1"] = layers.dense_forward(flat, p["fc1_w"], p["fc1_b"])
    out, cache["act3"] = layers.leaky_relu_forward(out, LEAKY_SLOPE)
    out, cache["fc2"] = layers.dense_forward(out, p["fc2_w"], p["fc2_b"])
    preds, cache["sigmoid"] = layers.sigmoid_forward(out)
    return preds, cache


def mse_loss(preds: np.ndarray, labels: np.ndarray) -> float:
    """Mean over samples of the squared Euclidean prediction error."""
    preds = np.asarray(preds, dtype=float).reshape(-1, 2)
    labels = np.asarray(labels, dtype=float).reshape(-1, 2)
    if len(preds) != len(labels) or len(preds) == 0:
        raise ValueError("predictions and labels must align and be non-empty")
    return float(np.mean(np.sum((preds - labels) ** 2, axis=1)))


def backward(model: CnnModel, cache: dict, preds: np.ndarray,
             labels: np.ndarray) -> dict[str, np.ndarray]:
    """Exact gradients of :func:`mse_loss` for every parameter."""
    p = model.params
    n = preds.shape[0]
    d = 2.0 * (preds - labels) / n

    d = layers.sigmoid_backward(d, cache["sigmoid"])
    d, dfc2_w, dfc2_b = layers.dense_backward(d, cache["fc2"], p["fc2_w"])
    d = layers.leaky_relu_backward(d, cache["act3"])
    d, dfc1_w, dfc1_b = layers.dense_backward(d, cache["fc1"], p["fc1_w"])
    d = d.reshape(n, 64, 13, 13)
    d = layers.dropout_backward(d, cache["drop"])
    d = layers.leaky_relu_backward(d, cache["act2"])
    d, dbn2_gamma, dbn2_beta = layers.batchnorm_backward(d, cache["bn2"])
    d, dconv2_w, dconv2_b = layers.conv2d_backward(d, cache["conv2"], p["conv2_w"])
    d = layers.maxpool2_backward(d, cache["pool"])
    d = layers.leaky_relu_backward(d, cache["act1"])
    d, dbn1_gamma, dbn1_beta = layers.batchnorm_backward(d, cache["bn1"])
    _, dconv1_w, dconv1_b = layers.conv2d_backward(d, cache["conv1"], p["conv1_w"])

    return {
        "conv1_w": dconv1_w, "conv1_b": dconv1_b,
        "bn1_gamma": dbn1_gamma, "bn1_beta": dbn1_beta,
        "conv2_w": dconv2_w, "conv2_b": dconv2_b,
        "bn2_gamma": dbn2_gamma, "bn2_beta": dbn2_beta,
        "fc1_w": dfc1_w, "fc1_b": dfc1_b,
        "fc2_w": dfc2_w, "fc2_b": dfc2_b,
    }


def apply_bn_updates(model: CnnModel, cache: dict,
                     momentum: float = BN_MOMENTUM) -> None:
    """Fold the cached train-mode batch statistics into the running stats."""
    for key in ("bn1", "bn2"):
        _, _, _, train, mean, var = cache[key]
        if not train:
            continue
        model.stats[f"{key}_mean"] = (1.0 - momentum) * model.stats[f"{key}_mean"] + momentum * mean
        model.stats[f"{key}_var"] = (1.0 - momentum) * model.stats[f"{key}_var"] + momentum * var


def predict_waypoint(model: CnnModel, encoding: np.ndarray,
                     env: Environment) -> np.ndarray:
    """Inference on one channels-last encoding, rescaled to environment meters."""
    x = encoding_to_input(encoding)[None].astype(model.params["conv1_w"].dtype)
    preds, _ = forward(model, x, train=False)
    return np.asarray(preds[0], dtype=float) * np.array([env.width, env.height])


def smooth_waypoint(prev_wp, raw_wp, alpha: float) -> np.ndarray:
    """Exponential waypoint smoothing; alpha = 0 passes the raw prediction through."""
    if not (0.0 <= alpha < 1.0):
        raise ValueError("alpha must be in [0, 1)")
    return alpha * np.asarray(prev_wp, dtype=float) + (1.0 - alpha) * np.asarray(raw_wp, dtype=float)


def save_model(model: CnnModel, path, adam_state=None, extra_meta: dict | None = None) -> None:
    """Byte-exact model serialization; optionally appends optimizer state."""
    arrays: dict[str, np.ndarray] = {}
    for name, _ in PARAM_SHAPES:
        arrays[name] = model.params[name]
    for name, _ in STAT_SHAPES:
        arrays[name] = model.stats[name]
    meta = {"kind": "model", "arch": ARCH_ID, "grid": GRID_SIDE}
    if extra_meta:
        meta.update(extra_meta)
    if adam_state is not None:
        meta["adam_t"] = adam_state.t
        for name in PARAM_NAMES:
            arrays[f"adam_m:{name}"] = adam_state.m[name]
            arrays[f"adam_v:{name}"] = adam_state.v[name]
    nnt.save_arrays(path, arrays, meta)


def load_model(path):
    """Load a model (and optimizer state, if present); validates names and shapes."""
    from .train import AdamState  # local import to avoid a cycle

    arrays, meta = nnt.load_arrays(path)
    if meta.get("kind") != "model" or meta.get("arch") != ARCH_ID:
        raise nnt.VersionMismatchError(
            f"{path}: not a {ARCH_ID} model (kind={meta.get('kind')!r}, "
            f"arch={meta.get('arch')!r})")
    params: dict[str, np.ndarray] = {}
    stats: dict[str, np.ndarray] = {}
    for name, shape in PARAM_SHAPES:
        if name not in arrays or arrays[name].shape != shape:
            raise nnt.CorruptFileError(f"{path}: missing or misshaped parameter {name!r}")
        params[name] = arrays[name]
    for name, shape in STAT_SHAPES:
        if name not in arrays or arrays[name].shape != shape:
            raise nnt.CorruptFileError(f"{path}: missing or misshaped statistic {name!r}")
        stats[name] = arrays[name]
    model = CnnModel(params, stats)

    adam = None
    if "adam_t" in meta:
        adam = AdamState.zeros_like(params)
        adam.t = int(meta["adam_t"])
        for name in PARAM_NAMES:
            adam.m[name] = arrays[f"adam_m:{name}"]
            adam.v[name] = arrays[f"adam_v:{name}"]
    return model, meta, adam
