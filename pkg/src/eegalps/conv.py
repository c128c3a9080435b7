"""Convolution + ReLU front end shared by both classifiers."""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

N_KERNELS = 3
KERNEL_SIZE = 10


class KernelLongerThanInput(ValueError):
    pass


def init_kernels(count: int = N_KERNELS, size: int = KERNEL_SIZE, seed=None) -> np.ndarray:
    """Random kernels of shape (count, size), uniform on the open interval (0, 1)."""
    if count < 1 or size < 1:
        raise ValueError("kernel count and size must be >= 1")
    rng = np.random.default_rng(seed)
    k = rng.random((count, size))
    # default_rng draws from [0, 1); re-draw the (practically impossible) exact zeros
    while (k == 0).any():
        k[k == 0] = rng.random(int((k == 0).sum()))
    return k


def convolve1d(x, kernel) -> np.ndarray:
    """Valid cross-correlation with stride 1: out[i] = sum_j x[i + j] * kernel[j]."""
    x = np.asarray(x, dtype=float)
    kernel = np.asarray(kernel, dtype=float)
    if len(kernel) > len(x):
        raise KernelLongerThanInput(f"kernel of length {len(kernel)} exceeds input of length {len(x)}")
    return sliding_window_view(x, len(kernel)) @ kernel


def relu(v) -> np.ndarray:
    return np.maximum(np.asarray(v, dtype=float), 0.0)


def forward(x, kernels) -> np.ndarray:
    """Feature map with one rectified row per kernel, each of length len(x) - size + 1."""
    x = np.asarray(x, dtype=float)
    kernels = np.atleast_2d(np.asarray(kernels, dtype=float))
    if kernels.shape[1] > len(x):
        raise KernelLongerThanInput(f"kernel of length {kernels.shape[1]} exceeds input of length {len(x)}")
    return relu(kernels @ sliding_window_view(x, kernels.shape[1]).T)


def forward_batch(X, kernels) -> np.ndarray:
    """Vectorised ``forward`` over windows: (n, L) -> (n, count, L - size + 1)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    kernels = np.atleast_2d(np.asarray(kernels, dtype=float))
    if kernels.shape[1] > X.shape[1]:
        raise KernelLongerThanInput("kernel longer than input")
    windows = sliding_window_view(X, kernels.shape[1], axis=1)
    return relu(np.einsum("nts,ks->nkt", windows, kernels))
