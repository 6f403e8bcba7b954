"""Adam optimization, learning-rate schedule, and the early-stopped training loop."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..world import substream
from .model import (
    PARAM_NAMES,
    CnnModel,
    apply_bn_updates,
    backward,
    forward,
    init_model,
    mse_loss,
)


class InsufficientDataError(ValueError):
    """Dataset too small to honor the batch-size and validation-split contract."""


@dataclass(frozen=True)
class TrainConfig:
    lr0: float = 1e-3
    decay_period: int = 30       # epochs between learning-rate drops
    decay_factor: float = 0.1
    batch: int = 64
    max_epochs: int = 100
    val_split: float = 0.15
    patience: int = 7
    min_delta: float = 1e-4
    dropout_p: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if not (0.0 < self.val_split < 1.0):
            raise ValueError("val_split must be in (0, 1)")
        if self.patience < 1:
            raise ValueError("patience must be >= 1")
        if self.batch < 2 or self.max_epochs < 1:
            raise ValueError("batch must be >= 2 and max_epochs >= 1")


@dataclass
class AdamState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int = 0

    @classmethod
    def zeros_like(cls, params: dict[str, np.ndarray]) -> "AdamState":
        return cls(m={k: np.zeros_like(p) for k, p in params.items()},
                   v={k: np.zeros_like(p) for k, p in params.items()})


def adam_step(params: dict[str, np.ndarray], grads: dict[str, np.ndarray],
              state: AdamState, lr: float, beta1: float = 0.9,
              beta2: float = 0.999, eps: float = 1e-8) -> None:
    """One bias-corrected Adam update, applied in place in fixed parameter order."""
    state.t += 1
    bc1 = 1.0 - beta1 ** state.t
    bc2 = 1.0 - beta2 ** state.t
    for name in params:
        g = grads[name]
        state.m[name] = beta1 * state.m[name] + (1.0 - beta1) * g
        state.v[name] = beta2 * state.v[name] + (1.0 - beta2) * (g * g)
        m_hat = state.m[name] / bc1
        v_hat = state.v[name] / bc2
        params[name] -= lr * m_hat / (np.sqrt(v_hat) + eps)


def learning_rate(cfg: TrainConfig, epoch: int) -> float:
    """Piecewise decay: lr0 * factor^(epoch // period)."""
    return cfg.lr0 * cfg.decay_factor ** (epoch // cfg.decay_period)


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float
    lr: float


def _infer_loss(model: CnnModel, x: np.ndarray, y: np.ndarray,
                chunk: int = 256) -> float:
    total = 0.0
    for start in range(0, len(x), chunk):
        xb = x[start:start + chunk]
        yb = y[start:start + chunk]
        preds, _ = forward(model, xb, train=False)
        total += mse_loss(preds, yb) * len(xb)
    return total / len(x)


def train(inputs: np.ndarray, labels: np.ndarray,
          cfg: TrainConfig = TrainConfig(),
          max_steps: int | None = None) -> tuple[CnnModel, list[EpochRecord]]:
    """Mini-batch Adam with a held-out validation split and early stopping.

    Returns the snapshot with the best validation loss and the per-epoch
    history. Training is bitwise deterministic given (seed, dataset) on one
    platform. ``max_steps`` optionally caps the total number of optimizer
    steps (used by the memorization oracle).
    """
    inputs = np.ascontiguousarray(inputs, dtype=np.float64)
    labels = np.ascontiguousarray(labels, dtype=np.float64)
    n = len(inputs)
    if n != len(labels):
        raise ValueError("inputs and labels must align")
    if n < 2 * cfg.batch:
        raise InsufficientDataError(
            f"need at least {2 * cfg.batch} samples for batch size {cfg.batch}, got {n}")

    rng_split = substream(cfg.seed, "train-split")
    rng_shuffle = substream(cfg.seed, "train-shuffle")
    rng_dropout = substream(cfg.seed, "train-dropout")

    perm = rng_split.permutation(n)
    n_val = max(1, int(round(n * cfg.val_split)))
    val_idx, train_idx = perm[:n_val], perm[n_val:]
    x_val, y_val = inputs[val_idx], labels[val_idx]
    x_train, y_train = inputs[train_idx], labels[train_idx]

    model = init_model(cfg.seed)
    adam = AdamState.zeros_like(model.params)
    history: list[EpochRecord] = []
    best_val = math.inf
    best_model = model.copy()
    bad_epochs = 0
    steps = 0

    for epoch in range(cfg.max_epochs):
        lr = learning_rate(cfg, epoch)
        order = rng_shuffle.permutation(len(x_train))
        loss_sum = 0.0
        loss_n = 0
        for start in range(0, len(order), cfg.batch):
            batch_idx = order[start:start + cfg.batch]
            if len(batch_idx) < 2:
                continue  # batchnorm needs at least two samples
            xb, yb = x_train[batch_idx], y_train[batch_idx]
            preds, cache = forward(model, xb, train=True, drop_rng=rng_dropout,
                                   dropout_p=cfg.dropout_p)
            grads = backward(model, cache, preds, yb)
            adam_step(model.params, grads, adam, lr)
            apply_bn_updates(model, cache)
            loss_sum += mse_loss(preds, yb) * len(xb)
            loss_n += len(xb)
            steps += 1
            if max_steps is not None and steps >= max_steps:
                break

        train_loss = loss_sum / max(loss_n, 1)
        val_loss = _infer_loss(model, x_val, y_val)
        history.append(EpochRecord(epoch=epoch, train_loss=train_loss,
                                   val_loss=val_loss, lr=lr))

        if best_val - val_loss >= cfg.min_delta:
            best_val = val_loss
            best_model = model.copy()
            bad_epochs = 0
        else:
            bad_epochs += 1
            if bad_epochs >= cfg.patience:
                break
        if max_steps is not None and steps >= max_steps:
            break

    return best_model, history
