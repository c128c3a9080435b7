"""Single-level periodic DWT with the Coiflet-1 filter bank.

Only the approximation half is used as classifier input; it takes the place
of a pooling layer and halves each feature-map row.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class InputTooShort(ValueError):
    pass


class LengthMismatch(ValueError):
    pass


@dataclass(frozen=True)
class CoifletFilter:
    h: np.ndarray  # low-pass analysis taps
    g: np.ndarray  # high-pass analysis taps

    def __len__(self):
        return len(self.h)


@dataclass
class WaveletCoefficients:
    approx: np.ndarray
    detail: np.ndarray
    length: int  # length of the signal before any periodic padding


def coiflet1() -> CoifletFilter:
    """The 6-tap Coiflet-1 pair, from its closed form in sqrt(7)."""
    r7 = math.sqrt(7.0)
    h = np.array([1 - r7, 5 + r7, 14 + 2 * r7, 14 - 2 * r7, 1 - r7, -3 + r7]) * (math.sqrt(2.0) / 32.0)
    n = len(h)
    g = np.array([(-1) ** i * h[n - 1 - i] for i in range(n)])
    return CoifletFilter(h, g)


def _periodic_index(m: int, taps: int) -> np.ndarray:
    k = np.arange(m // 2)[:, None]
    return (2 * k + np.arange(taps)[None, :]) % m


def dwt_single_level(x, f: CoifletFilter | None = None) -> WaveletCoefficients:
    """approx[k] = sum_i h[i] x[(2k + i) mod M], likewise detail with g.

    Odd-length input is first extended by one sample (x[0]) so both halves
    have ceil(M / 2) entries.
    """
    f = f or coiflet1()
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or len(x) < 2:
        raise InputTooShort("need a 1-D signal of at least 2 samples")
    m = len(x)
    if m % 2:
        x = np.append(x, x[0])
    segments = x[_periodic_index(len(x), len(f))]
    return WaveletCoefficients(segments @ f.h, segments @ f.g, m)


def idwt_single_level(c: WaveletCoefficients, f: CoifletFilter | None = None) -> np.ndarray:
    """Transpose of the analysis operator; exact inverse for even-length signals."""
    f = f or coiflet1()
    approx = np.asarray(c.approx, dtype=float)
    detail = np.asarray(c.detail, dtype=float)
    if approx.shape != detail.shape or approx.ndim != 1:
        raise LengthMismatch("approx and detail must be 1-D and equally long")
    padded = 2 * len(approx)
    if c.length not in (padded, padded - 1):
        raise LengthMismatch(f"{len(approx)} coefficient pairs cannot describe {c.length} samples")
    idx = _periodic_index(padded, len(f))
    out = np.zeros(padded)
    contrib = approx[:, None] * f.h[None, :] + detail[:, None] * f.g[None, :]
    np.add.at(out, idx.ravel(), contrib.ravel())
    return out[:c.length]


def extract_features(feature_map, f: CoifletFilter | None = None) -> np.ndarray:
    """Approximation coefficients of every row, concatenated row after row."""
    fm = np.atleast_2d(np.asarray(feature_map, dtype=float))
    if fm.shape[-1] == 0:
        raise InputTooShort("feature map rows are empty")
    return np.concatenate([dwt_single_level(row, f).approx for row in fm])


def extract_features_batch(feature_maps, f: CoifletFilter | None = None) -> np.ndarray:
    """(n, rows, L) feature maps -> (n, rows * ceil(L / 2)) approximation features."""
    f = f or coiflet1()
    fm = np.asarray(feature_maps, dtype=float)
    n, rows, length = fm.shape
    if length < 2:
        raise InputTooShort("need rows of at least 2 samples")
    if length % 2:
        fm = np.concatenate([fm, fm[..., :1]], axis=-1)
    segments = fm[..., _periodic_index(fm.shape[-1], len(f))]
    return (segments @ f.h).reshape(n, -1)


def feature_length(row_length: int, rows: int = 3) -> int:
    return rows * ((row_length + 1) // 2)
