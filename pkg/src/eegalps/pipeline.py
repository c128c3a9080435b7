"""The proposed classifier end to end, plus text artifacts for both models.

Windows are divided by a scale fitted on the training set, passed through
frozen random kernels and ReLU, reduced with the Coiflet-1 approximation,
and classified by the sign of an evolved symbolic discriminant.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Sequence

import numpy as np

from . import baseline, sda
from .conv import forward_batch, init_kernels
from .wavelet import extract_features_batch

ROW_MODES = ("concat", "vote")


def window_features(X, kernels, input_scale: float = 1.0) -> np.ndarray:
    """(n, L) windows -> (n, rows, ceil((L - size + 1) / 2)) approximation features."""
    X = np.atleast_2d(np.asarray(X, dtype=float)) / input_scale
    fm = forward_batch(X, kernels)
    n, rows, _ = fm.shape
    return extract_features_batch(fm).reshape(n, rows, -1)


def _signs(y_index) -> np.ndarray:
    # class index 0 (first label) is the +1 side of the discriminant
    return np.where(np.asarray(y_index) == 0, 1.0, -1.0)


@dataclass
class ProposedModel:
    program: list
    kernels: np.ndarray
    labels: tuple[str, str]
    input_scale: float
    config: sda.AlpsConfig
    row_mode: str = "concat"
    kernel_seed: int = 0
    history: list[sda.GenerationStats] = field(default_factory=list)

    @property
    def best_mse(self) -> float:
        return self.history[-1].best_mse if self.history else math.nan

    def decision(self, X) -> np.ndarray:
        feats = window_features(X, self.kernels, self.input_scale)
        if self.row_mode == "concat":
            return sda.evaluate_batch(self.program, feats.reshape(len(feats), -1))
        votes = np.stack([sda.classify_batch(self.program, feats[:, r]) for r in range(feats.shape[1])])
        return votes.sum(axis=0).astype(float)

    def predict(self, X) -> np.ndarray:
        """Class indices: 0 when the discriminant is >= 0, else 1."""
        return np.where(self.decision(X) >= 0, 0, 1)

    def predict_labels(self, X) -> list[str]:
        return [self.labels[i] for i in self.predict(X)]

    def mse(self, X, y_index) -> float:
        feats = window_features(X, self.kernels, self.input_scale)
        y = _signs(y_index)
        if self.row_mode == "concat":
            return sda.fitness_mse(self.program, feats.reshape(len(feats), -1), y)
        rows = feats.shape[1]
        return sda.fitness_mse(self.program, feats.reshape(-1, feats.shape[2]), np.repeat(y, rows))


def fit_proposed(X, y_index, cfg: sda.AlpsConfig, labels=("Red", "Green"), row_mode: str = "concat",
                 n_kernels: int = 3, kernel_size: int = 10, kernel_seed: int | None = None,
                 input_scale: float | None = None, on_generation=None) -> ProposedModel:
    if row_mode not in ROW_MODES:
        raise ValueError(f"row_mode must be one of {ROW_MODES}")
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.size == 0 or len(y_index) == 0:
        raise sda.EmptyData("no training windows")
    if input_scale is None:
        input_scale = float(X.std()) or 1.0
    kernel_seed = cfg.seed if kernel_seed is None else kernel_seed
    kernels = init_kernels(n_kernels, kernel_size, np.random.default_rng([kernel_seed, 0]))
    feats = window_features(X, kernels, input_scale)
    y = _signs(y_index)
    if row_mode == "concat":
        data, target = feats.reshape(len(feats), -1), y
    else:
        data, target = feats.reshape(-1, feats.shape[2]), np.repeat(y, feats.shape[1])
    result = sda.run_alps(cfg, data, target, on_generation=on_generation)
    return ProposedModel(result.best.program, kernels, tuple(labels), input_scale, cfg, row_mode,
                         kernel_seed, result.history)


# -- artifacts -------------------------------------------------------------------
#
# Line-oriented ``key=value`` text; floats are written with repr() so a saved
# model reloads bit for bit.

def _floats(values) -> str:
    return " ".join(repr(float(v)) for v in np.ravel(values))


def _parse_floats(text: str) -> np.ndarray:
    return np.array([float(t) for t in text.split()])


def save_proposed(model: ProposedModel, path) -> None:
    lines = ["model=proposed",
             f"positive_label={model.labels[0]}",
             f"negative_label={model.labels[1]}",
             f"input_scale={model.input_scale!r}",
             f"row_mode={model.row_mode}",
             f"kernel_seed={model.kernel_seed}"]
    lines += [f"alps.{k}={v!r}" for k, v in asdict(model.config).items()]
    lines += [f"kernel.{i}={_floats(k)}" for i, k in enumerate(model.kernels)]
    lines.append(f"best_mse={model.best_mse!r}")
    lines.append(f"expression={sda.to_text(model.program)}")
    Path(path).write_text("\n".join(lines) + "\n")


def save_standard(model: baseline.StandardCNN, path) -> None:
    lines = ["model=standard",
             f"positive_label={model.labels[0]}",
             f"negative_label={model.labels[1]}",
             f"input_scale={model.input_scale!r}"]
    lines += [f"train.{k}={v!r}" for k, v in asdict(model.config).items()]
    lines.append(f"final_loss={model.losses[-1]!r}" if model.losses else "final_loss=nan")
    lines += [f"kernel.{i}={_floats(k)}" for i, k in enumerate(model.params.kernels)]
    lines.append(f"bias={_floats(model.params.biases)}")
    lines += [f"weight.{i}={_floats(w)}" for i, w in enumerate(model.params.weights)]
    Path(path).write_text("\n".join(lines) + "\n")


def _read_pairs(path) -> dict[str, str]:
    pairs = {}
    for line in Path(path).read_text().splitlines():
        if line.strip():
            key, _, value = line.partition("=")
            pairs[key] = value
    return pairs


def _typed(cls, prefix: str, pairs: dict[str, str]):
    kwargs = {}
    for f in fields(cls):
        raw = pairs[f"{prefix}.{f.name}"]
        if raw in ("True", "False"):
            kwargs[f.name] = raw == "True"
        elif f.type in ("int", int):
            kwargs[f.name] = int(raw)
        else:
            kwargs[f.name] = float(raw)
    return cls(**kwargs)


def _indexed(pairs: dict[str, str], prefix: str) -> np.ndarray:
    rows = []
    i = 0
    while f"{prefix}.{i}" in pairs:
        rows.append(_parse_floats(pairs[f"{prefix}.{i}"]))
        i += 1
    return np.array(rows)


def load_model(path):
    """Read either artifact kind back into a ProposedModel or StandardCNN."""
    pairs = _read_pairs(path)
    labels = (pairs["positive_label"], pairs["negative_label"])
    scale = float(pairs["input_scale"])
    kind = pairs.get("model")
    if kind == "proposed":
        cfg = _typed(sda.AlpsConfig, "alps", pairs)
        best = float(pairs["best_mse"])
        history = [sda.GenerationStats(cfg.max_generations, best, math.nan, False)]
        return ProposedModel(sda.from_text(pairs["expression"]), _indexed(pairs, "kernel"), labels,
                             scale, cfg, pairs["row_mode"], int(pairs["kernel_seed"]), history)
    if kind == "standard":
        cfg = _typed(baseline.TrainConfig, "train", pairs)
        params = baseline.CNNParams(_indexed(pairs, "kernel"), _indexed(pairs, "weight"),
                                    _parse_floats(pairs["bias"]))
        return baseline.StandardCNN(params, cfg, labels, scale, [float(pairs["final_loss"])])
    raise ValueError(f"{path}: unknown model kind {kind!r}")


def model_mse(model, X, y_index) -> float:
    """Test-set MSE in each model's own training loss."""
    if isinstance(model, ProposedModel):
        return model.mse(X, y_index)
    probs = model.predict_proba(X)
    return float(np.mean((probs - baseline.one_hot(y_index)) ** 2))


def label_indices(labels: Sequence[str], class_labels: Sequence[str]) -> np.ndarray:
    lookup = {name: i for i, name in enumerate(class_labels)}
    return np.array([lookup[name] for name in labels])
