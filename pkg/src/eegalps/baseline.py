"""Standard CNN comparator: conv + ReLU, max pooling, one dense layer, softmax.

Trained by full-batch gradient descent on the mean squared error between the
softmax output and one-hot targets. Unlike the proposed model, the kernels
are trained here too.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .conv import init_kernels


class EmptyTrainSet(ValueError):
    pass


class DivergedLoss(ArithmeticError):
    pass


class InputTooShort(ValueError):
    pass


def max_pool(v, size: int = 2, stride: int = 2) -> np.ndarray:
    """out[i] = max(v[i*stride : i*stride + size]); a trailing partial block is dropped."""
    v = np.asarray(v, dtype=float)
    if len(v) < size:
        raise InputTooShort(f"cannot pool {len(v)} values with size {size}")
    return sliding_window_view(v, size)[::stride].max(axis=1)


def pooled_length(length: int, size: int = 2, stride: int = 2) -> int:
    return (length - size) // stride + 1


def softmax(z) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.004
    epochs: int = 2000
    n_kernels: int = 3
    kernel_size: int = 10
    pool_size: int = 2
    pool_stride: int = 2
    train_kernels: bool = True
    seed: int = 0

    def __post_init__(self):
        if not (self.learning_rate >= 0 and math.isfinite(self.learning_rate)):
            raise ValueError("learning_rate must be finite and >= 0")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")


@dataclass
class CNNParams:
    kernels: np.ndarray  # (k, s)
    weights: np.ndarray  # (k * pooled, 2)
    biases: np.ndarray   # (2,)

    def copy(self) -> "CNNParams":
        return CNNParams(self.kernels.copy(), self.weights.copy(), self.biases.copy())


@dataclass
class StandardCNN:
    params: CNNParams
    config: TrainConfig
    labels: tuple[str, str] = ("Red", "Green")
    input_scale: float = 1.0
    losses: list[float] = field(default_factory=list)

    def predict_proba(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float)) / self.input_scale
        return _forward(self.params, X, self.config)[0]

    def predict(self, X) -> np.ndarray:
        """Class indices; index 0 wins exact ties."""
        return np.argmax(self.predict_proba(X), axis=1)

    def predict_labels(self, X) -> list[str]:
        return [self.labels[i] for i in self.predict(X)]


def init_params(input_length: int, cfg: TrainConfig) -> CNNParams:
    rng = np.random.default_rng([cfg.seed, 1])
    kernels = init_kernels(cfg.n_kernels, cfg.kernel_size, np.random.default_rng([cfg.seed, 0]))
    n_feat = cfg.n_kernels * pooled_length(input_length - cfg.kernel_size + 1, cfg.pool_size, cfg.pool_stride)
    weights = rng.normal(0.0, 1.0 / math.sqrt(n_feat), (n_feat, 2))
    return CNNParams(kernels, weights, np.zeros(2))


def _pool_blocks(act: np.ndarray, cfg: TrainConfig) -> np.ndarray:
    if cfg.pool_size == cfg.pool_stride:
        n, k, t = act.shape
        p = pooled_length(t, cfg.pool_size, cfg.pool_stride)
        return np.ascontiguousarray(act[..., :p * cfg.pool_size]).reshape(n, k, p, cfg.pool_size)
    return sliding_window_view(act, cfg.pool_size, axis=2)[:, :, ::cfg.pool_stride]


def _forward(p: CNNParams, X: np.ndarray, cfg: TrainConfig):
    windows = sliding_window_view(X, cfg.kernel_size, axis=1)          # (n, T, s)
    conv = np.einsum("nts,ks->nkt", windows, p.kernels)                 # (n, k, T)
    act = np.maximum(conv, 0.0)
    pool_in = _pool_blocks(act, cfg)                                    # (n, k, P, size)
    arg = pool_in.argmax(axis=3)
    pooled = np.take_along_axis(pool_in, arg[..., None], axis=3)[..., 0]
    flat = pooled.reshape(len(X), -1)
    probs = softmax(flat @ p.weights + p.biases)
    return probs, (windows, conv, arg, flat)


def loss_and_grads(p: CNNParams, X, Y, cfg: TrainConfig):
    """MSE loss (mean over samples and both outputs) and its gradients."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.asarray(Y, dtype=float)
    probs, (windows, conv, arg, flat) = _forward(p, X, cfg)
    n = len(X)
    loss = float(np.mean((probs - Y) ** 2))
    d_probs = 2.0 * (probs - Y) / Y.size
    d_logits = probs * (d_probs - np.sum(d_probs * probs, axis=1, keepdims=True))
    g_weights = flat.T @ d_logits
    g_biases = d_logits.sum(axis=0)
    g_kernels = np.zeros_like(p.kernels)
    if cfg.train_kernels:
        d_pooled = (d_logits @ p.weights.T).reshape(arg.shape)         # (n, k, P)
        d_act = np.zeros_like(conv)
        if cfg.pool_size == cfg.pool_stride:
            blocks = np.zeros(arg.shape + (cfg.pool_size,))
            np.put_along_axis(blocks, arg[..., None], d_pooled[..., None], axis=3)
            d_act[..., :blocks.shape[2] * cfg.pool_size] = blocks.reshape(n, arg.shape[1], -1)
        else:
            positions = np.arange(arg.shape[2]) * cfg.pool_stride + arg  # winner index in act
            np.add.at(d_act, (np.arange(n)[:, None, None], np.arange(arg.shape[1])[None, :, None],
                              positions), d_pooled)
        d_conv = d_act * (conv > 0)
        g_kernels = np.einsum("nkt,nts->ks", d_conv, windows)
    return loss, CNNParams(g_kernels, g_weights, g_biases)


def one_hot(y_index, n_classes: int = 2) -> np.ndarray:
    y_index = np.asarray(y_index, dtype=int)
    out = np.zeros((len(y_index), n_classes))
    out[np.arange(len(y_index)), y_index] = 1.0
    return out


def train(X, y_index, cfg: TrainConfig, labels=("Red", "Green"), input_scale: float | None = None,
          log=None) -> StandardCNN:
    """Fit on windows X (n, L) with class indices y_index (0 = first label).

    ``input_scale`` divides every input; by default it is the standard
    deviation of the training samples so raw ADC units do not saturate the
    softmax at learning rates of 0.0035 to 0.012.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.size == 0 or len(y_index) == 0:
        raise EmptyTrainSet("no training windows")
    if input_scale is None:
        input_scale = float(X.std()) or 1.0
    Xs = X / input_scale
    Y = one_hot(y_index)
    params = init_params(X.shape[1], cfg)
    losses = []
    for epoch in range(cfg.epochs):
        loss, grads = loss_and_grads(params, Xs, Y, cfg)
        if not math.isfinite(loss):
            raise DivergedLoss(f"loss became {loss} at epoch {epoch}")
        losses.append(loss)
        if log is not None:
            log(epoch, loss)
        params.weights -= cfg.learning_rate * grads.weights
        params.biases -= cfg.learning_rate * grads.biases
        if cfg.train_kernels:
            params.kernels -= cfg.learning_rate * grads.kernels
    final, _ = loss_and_grads(params, Xs, Y, cfg)
    if not math.isfinite(final):
        raise DivergedLoss("final loss is not finite")
    losses.append(final)
    return StandardCNN(params, cfg, tuple(labels), input_scale, losses)
