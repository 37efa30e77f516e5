"""Adam optimization and the mini-batch training loop."""

from __future__ import annotations

import csv
from dataclasses import asdict, dataclass, field

import numpy as np

from ..errors import SolverError, ValidationError
from .model import CnnModel, backward, forward

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass
class TrainConfig:
    initial_lr: float = 2.5e-4
    lr_decay: float = 0.999      # multiplied in once per epoch
    epochs: int = 3000
    batch_size: int = 750
    seed: int = 0
    dtype: str = "float32"

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class AdamState:
    u: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)
    t: int = 0
    beta1: float = ADAM_BETA1
    beta2: float = ADAM_BETA2
    eps: float = ADAM_EPS

    @classmethod
    def for_params(cls, params: list[np.ndarray]) -> "AdamState":
        return cls(
            u=[np.zeros_like(p) for p in params],
            v=[np.zeros_like(p) for p in params],
        )


def adam_step(
    params: list[np.ndarray],
    grads: list[np.ndarray],
    state: AdamState,
    lr: float,
) -> None:
    """One in-place update with bias-corrected first and second
    moments: W <- W - lr * u_hat / (sqrt(v_hat) + eps)."""
    if len(params) != len(state.u) or len(params) != len(grads):
        raise ValidationError("parameter, gradient and state lengths differ")
    state.t += 1
    c1 = 1.0 - state.beta1**state.t
    c2 = 1.0 - state.beta2**state.t
    for p, g, u, v in zip(params, grads, state.u, state.v):
        u *= state.beta1
        u += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        p -= (lr / c1) * u / (np.sqrt(v / c2) + state.eps)


def half_mse(pred: np.ndarray, target: np.ndarray) -> float:
    """Half mean squared error over the batch."""
    r = np.asarray(pred, dtype=np.float64) - np.asarray(target, dtype=np.float64)
    return float(0.5 * np.mean(r * r))


def half_mse_sum(pred: np.ndarray, target: np.ndarray) -> float:
    """Half summed squared error (the un-averaged batch total)."""
    r = np.asarray(pred, dtype=np.float64) - np.asarray(target, dtype=np.float64)
    return float(0.5 * np.sum(r * r))


def _validation_loss(model: CnnModel, x_val, y_val_norm, chunk: int) -> float:
    preds = []
    for i in range(0, len(x_val), chunk):
        p, _ = forward(model, x_val[i: i + chunk], training=False)
        preds.append(p)
    pred = np.concatenate(preds)
    pred_norm = (pred - model.norm_mean) / model.norm_std
    return half_mse(pred_norm, y_val_norm)


def train(
    model: CnnModel,
    x_train: np.ndarray,
    y_train: np.ndarray,
    x_val: np.ndarray,
    y_val: np.ndarray,
    cfg: TrainConfig,
    log_every: int = 0,
) -> tuple[CnnModel, list[dict]]:
    """Seeded mini-batch Adam training.

    Targets are z-scored against the training set; the normalization
    constants are stored on the model.  The learning rate is
    multiplied by ``lr_decay`` once per epoch.  Returns the trained
    model and one history row per iteration with the per-epoch
    validation loss on epoch-final rows.
    """
    if len(x_train) == 0 or len(x_val) == 0:
        raise ValidationError("train and validation splits must be non-empty")
    if len(x_train) != len(y_train):
        raise ValidationError("inputs and targets differ in length")

    dtype = np.dtype(cfg.dtype)
    x_train = np.ascontiguousarray(x_train, dtype=dtype)
    x_val = np.ascontiguousarray(x_val, dtype=dtype)
    y_train = np.asarray(y_train, dtype=np.float64)
    y_val = np.asarray(y_val, dtype=np.float64)

    model.norm_mean = float(y_train.mean())
    model.norm_std = float(max(y_train.std(), np.finfo(np.float64).tiny))
    y_norm = (y_train - model.norm_mean) / model.norm_std
    y_val_norm = (y_val - model.norm_mean) / model.norm_std

    fc_bias = np.array([model.fc_bias], dtype=model.dtype)
    params = []
    for layer in model.layers:
        params.append(layer.weights)
        params.append(layer.bias)
    params.append(model.fc_weights)
    params.append(fc_bias)
    state = AdamState.for_params(params)

    rng = np.random.default_rng(cfg.seed)
    lr = cfg.initial_lr
    history: list[dict] = []
    iteration = 0
    n = len(x_train)
    for epoch in range(1, cfg.epochs + 1):
        perm = rng.permutation(n)
        starts = range(0, n, cfg.batch_size)
        batch_slices = [perm[s: s + cfg.batch_size] for s in starts]
        batch_slices = [b for b in batch_slices if len(b) >= 2]
        for bi, idx in enumerate(batch_slices):
            iteration += 1
            xb = x_train[idx]
            yb = y_norm[idx]
            pred, cache = forward(model, xb, training=True)
            pred_norm = cache.pred_norm.astype(np.float64)
            resid = pred_norm - yb
            loss = float(0.5 * np.mean(resid**2))
            if not np.isfinite(loss):
                raise SolverError(
                    f"non-finite training loss at iteration {iteration} "
                    f"(lr={lr:.3e}, batch index {bi})"
                )
            grads_struct = backward(
                model, cache, (resid / len(idx)).astype(model.dtype)
            )
            grads = grads_struct.arrays()
            grads.append(np.array([grads_struct.fc_bias], dtype=model.dtype))
            adam_step(params, grads, state, lr)
            model.fc_bias = float(fc_bias[0])
            row = {
                "iteration": iteration,
                "epoch": epoch,
                "lr": lr,
                "minibatch_loss": loss,
                "minibatch_loss_sum": float(0.5 * np.sum(resid**2)),
                "val_loss": None,
            }
            history.append(row)
        val = _validation_loss(model, x_val, y_val_norm, max(cfg.batch_size, 2))
        history[-1]["val_loss"] = val
        if log_every and epoch % log_every == 0:
            print(
                f"epoch {epoch}/{cfg.epochs} lr={lr:.3e} "
                f"loss={history[-1]['minibatch_loss']:.5e} val={val:.5e}",
                flush=True,
            )
        lr *= cfg.lr_decay
    return model, history


def save_history(history: list[dict], path) -> None:
    cols = ["iteration", "epoch", "lr", "minibatch_loss", "minibatch_loss_sum", "val_loss"]
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(cols)
        for row in history:
            w.writerow(
                ["" if row[c] is None else repr(row[c]) if isinstance(row[c], float) else row[c] for c in cols]
            )


def load_history(path) -> list[dict]:
    out = []
    with open(path, newline="") as f:
        for row in csv.DictReader(f):
            out.append(
                {
                    "iteration": int(row["iteration"]),
                    "epoch": int(row["epoch"]),
                    "lr": float(row["lr"]),
                    "minibatch_loss": float(row["minibatch_loss"]),
                    "minibatch_loss_sum": float(row["minibatch_loss_sum"]),
                    "val_loss": float(row["val_loss"]) if row["val_loss"] else None,
                }
            )
    return out
