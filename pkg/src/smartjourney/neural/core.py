"""Minimal float64 numeric layer shared by both neural models.

Forward passes and hand-derived backward passes for the small, fixed layer
set the networks need: dense, width-3 temporal convolution, layer
normalization, activations, Huber loss with an L2 kernel penalty, SGD with
classical momentum, a step learning-rate schedule with early stopping, and
a finite-difference gradient checker. There is no general autodiff graph.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

Params = dict[str, np.ndarray]


# ---------------------------------------------------------------------------
# activations


def sigmoid(z: np.ndarray | float) -> np.ndarray | float:
    """Logistic function, stable for large |z|."""
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    if out.ndim == 0:
        return float(out)
    return out


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def softmax(x: np.ndarray, axis: int = -1) -> np.ndarray:
    """Rows sum to one; stabilized by max subtraction."""
    shifted = x - np.max(x, axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / np.sum(e, axis=axis, keepdims=True)


# ---------------------------------------------------------------------------
# layers


def dense_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Affine map y = x @ w + b; x is (..., in), w is (in, out)."""
    if x.shape[-1] != w.shape[0]:
        raise ValueError(f"dense shape mismatch: input {x.shape} vs weights {w.shape}")
    return x @ w + b


def dense_backward(
    x: np.ndarray, w: np.ndarray, dout: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gradients (dx, dw, db) for y = x @ w + b."""
    x2 = x.reshape(-1, x.shape[-1])
    d2 = dout.reshape(-1, dout.shape[-1])
    dw = x2.T @ d2
    db = d2.sum(axis=0)
    dx = dout @ w.T
    return dx, dw, db


def conv1d_forward(x: np.ndarray, kernels: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """Width-3 temporal convolution with zero same-padding.

    x: (B, W, F_in); kernels: (3, F_in, C_out); output (B, W, C_out).
    Activation is applied by callers.
    """
    if x.ndim != 3 or kernels.shape[1] != x.shape[2]:
        raise ValueError(f"conv1d shape mismatch: input {x.shape} vs kernels {kernels.shape}")
    b_, w_, _ = x.shape
    padded = np.zeros((b_, w_ + 2, x.shape[2]), dtype=np.float64)
    padded[:, 1:-1, :] = x
    out = padded[:, 0:w_, :] @ kernels[0]
    out += padded[:, 1 : w_ + 1, :] @ kernels[1]
    out += padded[:, 2 : w_ + 2, :] @ kernels[2]
    return out + bias


def conv1d_backward(
    x: np.ndarray, kernels: np.ndarray, dout: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gradients (dx, dkernels, dbias) of conv1d_forward."""
    b_, w_, f_in = x.shape
    padded = np.zeros((b_, w_ + 2, f_in), dtype=np.float64)
    padded[:, 1:-1, :] = x
    dk = np.empty_like(kernels)
    dpadded = np.zeros_like(padded)
    for k in range(3):
        seg = padded[:, k : k + w_, :]
        dk[k] = np.einsum("bwf,bwc->fc", seg, dout)
        dpadded[:, k : k + w_, :] += dout @ kernels[k].T
    dbias = dout.sum(axis=(0, 1))
    return dpadded[:, 1:-1, :], dk, dbias


LAYER_NORM_EPS = 1e-5


def layer_norm_forward(
    x: np.ndarray, gain: np.ndarray, bias: np.ndarray, eps: float = LAYER_NORM_EPS
) -> tuple[np.ndarray, tuple]:
    """Per-row normalization over the last axis, then affine gain/bias."""
    mean = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (x - mean) * inv_std
    return xhat * gain + bias, (xhat, inv_std, gain)


def layer_norm_backward(
    dout: np.ndarray, cache: tuple
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gradients (dx, dgain, dbias) of layer_norm_forward."""
    xhat, inv_std, gain = cache
    d = xhat.shape[-1]
    dgain = (dout * xhat).reshape(-1, d).sum(axis=0)
    dbias = dout.reshape(-1, d).sum(axis=0)
    dxhat = dout * gain
    dx = inv_std * (
        dxhat
        - dxhat.mean(axis=-1, keepdims=True)
        - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True)
    )
    return dx, dgain, dbias


# ---------------------------------------------------------------------------
# loss and regularization


def huber_loss(predicted: np.ndarray, actual: np.ndarray, delta: float = 1.0) -> float:
    """Mean Huber loss: quadratic within delta, linear in the tails."""
    p = np.asarray(predicted, dtype=np.float64)
    a = np.asarray(actual, dtype=np.float64)
    if p.shape != a.shape:
        raise ValueError(f"length mismatch: {p.shape} vs {a.shape}")
    if p.size == 0:
        raise ValueError("huber loss needs at least one element")
    err = p - a
    abs_err = np.abs(err)
    quad = 0.5 * err * err
    lin = delta * (abs_err - 0.5 * delta)
    return float(np.mean(np.where(abs_err <= delta, quad, lin)))


def huber_grad(predicted: np.ndarray, actual: np.ndarray, delta: float = 1.0) -> np.ndarray:
    """d(mean Huber)/d predicted: clip(error, -delta, delta) / n."""
    err = np.asarray(predicted, dtype=np.float64) - np.asarray(actual, dtype=np.float64)
    return np.clip(err, -delta, delta) / err.size


def l2_penalty(weights: np.ndarray, lam: float = 1e-4) -> float:
    """lam * sum(w^2) over one layer's kernel (bias excluded by callers)."""
    return float(lam * np.sum(np.square(weights)))


def l2_grad(weights: np.ndarray, lam: float = 1e-4) -> np.ndarray:
    return 2.0 * lam * weights


# ---------------------------------------------------------------------------
# optimizer and schedule


@dataclass
class OptimizerState:
    learning_rate: float = 2.5e-5
    momentum: float = 0.90
    velocities: Params = field(default_factory=dict)


def sgd_step(params: Params, grads: Params, state: OptimizerState) -> tuple[Params, OptimizerState]:
    """Classical momentum update, in place: v <- mu*v - lr*g; p <- p + v."""
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.shape:
            raise ValueError(f"gradient shape mismatch for {name}: {g.shape} vs {p.shape}")
        v = state.velocities.get(name)
        if v is None:
            v = np.zeros_like(p)
            state.velocities[name] = v
        v *= state.momentum
        v -= state.learning_rate * g
        p += v
    return params, state


@dataclass
class TrainingSchedule:
    lr_decay_factor: float = 0.1
    lr_decay_every: int = 150
    early_stop_patience: int = 5
    max_epochs: int = 500

    def __post_init__(self) -> None:
        if self.early_stop_patience < 1:
            raise ValueError("patience must be >= 1")
        if not (0.0 < self.lr_decay_factor <= 1.0):
            raise ValueError("decay factor must be in (0, 1]")


@dataclass
class ScheduleDecision:
    new_lr: float | None
    stop: bool
    best_epoch: int  # 0-based index into val_loss_history


def schedule_tick(
    schedule: TrainingSchedule,
    epoch: int,
    val_loss_history: list[float],
    current_lr: float,
) -> ScheduleDecision:
    """Per-epoch schedule decision; `epoch` counts completed epochs from 1.

    The learning rate is multiplied by the decay factor at epochs 150, 300,
    ... (per lr_decay_every). Training stops once the validation loss has
    not improved for `early_stop_patience` consecutive epochs; callers
    restore the weights snapshotted at best_epoch.
    """
    if epoch < 0:
        raise ValueError("epoch must be >= 0")
    new_lr = None
    if epoch > 0 and epoch % schedule.lr_decay_every == 0:
        new_lr = current_lr * schedule.lr_decay_factor

    best_epoch = 0
    best = float("inf")
    for i, loss in enumerate(val_loss_history):
        if loss < best:
            best = loss
            best_epoch = i
    since_best = len(val_loss_history) - 1 - best_epoch
    stop = since_best >= schedule.early_stop_patience
    return ScheduleDecision(new_lr=new_lr, stop=stop, best_epoch=best_epoch)


# ---------------------------------------------------------------------------
# initialization


def glorot_uniform(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


# ---------------------------------------------------------------------------
# verification


def grad_check(
    loss_fn: Callable[[], float],
    params: Params,
    grads: Params,
    rng: np.random.Generator,
    coords_per_tensor: int = 50,
    step: float = 1e-5,
) -> float:
    """Max relative error between analytic grads and central differences.

    For each parameter tensor a random subset of coordinates (at least
    coords_per_tensor, or all when smaller) is perturbed by +-step while
    loss_fn re-evaluates the scalar loss at the mutated parameters. The
    per-tensor error compares the sampled gradient vectors,
    |g_analytic - g_numeric| / max(1e-8, |g_analytic| + |g_numeric|) in the
    2-norm; the norm keeps the check meaningful for coordinates whose true
    gradient sits below the float64 finite-difference noise floor. Returns
    the max over tensors.
    """
    worst = 0.0
    for name in sorted(params):
        tensor = params[name]
        flat = tensor.reshape(-1)
        n = flat.size
        if n <= coords_per_tensor:
            coords = np.arange(n)
        else:
            coords = rng.choice(n, size=coords_per_tensor, replace=False)
        analytic = grads[name].reshape(-1)
        ga = analytic[coords].astype(np.float64)
        gn = np.empty_like(ga)
        for pos, idx in enumerate(coords):
            original = flat[idx]
            flat[idx] = original + step
            loss_plus = loss_fn()
            flat[idx] = original - step
            loss_minus = loss_fn()
            flat[idx] = original
            gn[pos] = (loss_plus - loss_minus) / (2.0 * step)
        rel = float(
            np.linalg.norm(ga - gn)
            / max(1e-8, np.linalg.norm(ga) + np.linalg.norm(gn))
        )
        worst = max(worst, rel)
    return worst
