"""Confusion matrices and accuracy / precision / recall / F-measure."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

RECORDS_PER_WINDOW = 5000


class UndefinedMetric(ZeroDivisionError):
    pass


class EmptyPredictions(ValueError):
    pass


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0
    record_scale: int = RECORDS_PER_WINDOW

    def __post_init__(self):
        if min(self.tp, self.fp, self.fn, self.tn) < 0:
            raise ValueError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        return ConfusionMatrix(self.tp + other.tp, self.fp + other.fp, self.fn + other.fn,
                               self.tn + other.tn, self.record_scale)

    def scaled(self, factor: int | None = None) -> "ConfusionMatrix":
        f = self.record_scale if factor is None else factor
        return ConfusionMatrix(self.tp * f, self.fp * f, self.fn * f, self.tn * f, self.record_scale)

    def swapped(self) -> "ConfusionMatrix":
        """The same predictions seen with the other class as positive."""
        return ConfusionMatrix(self.tn, self.fn, self.fp, self.tp, self.record_scale)


def accumulate(pairs: Iterable[tuple[object, object]], positive) -> ConfusionMatrix:
    """Count (predicted, actual) pairs against the declared positive class."""
    tp = fp = fn = tn = 0
    seen = False
    for predicted, actual in pairs:
        seen = True
        if predicted == positive:
            if actual == positive:
                tp += 1
            else:
                fp += 1
        elif actual == positive:
            fn += 1
        else:
            tn += 1
    if not seen:
        raise EmptyPredictions("no predictions to count")
    return ConfusionMatrix(tp, fp, fn, tn)


def _ratio(num: int, den: int, name: str) -> float:
    if den == 0:
        raise UndefinedMetric(f"{name} is undefined: denominator is zero")
    return num / den


def accuracy(cm: ConfusionMatrix) -> float:
    return _ratio(cm.tp + cm.tn, cm.total, "accuracy")


def recall(cm: ConfusionMatrix) -> float:
    return _ratio(cm.tp, cm.tp + cm.fn, "recall")


def precision(cm: ConfusionMatrix) -> float:
    return _ratio(cm.tp, cm.tp + cm.fp, "precision")


def f_measure(cm: ConfusionMatrix) -> float:
    return harmonic(precision(cm), recall(cm))


def harmonic(p: float, r: float) -> float:
    if p + r == 0:
        raise UndefinedMetric("F-measure is undefined when precision and recall are both zero")
    return 2 * r * p / (r + p)


def _truncate(value: float, digits: int) -> float:
    scale = 10 ** digits
    # nudge before flooring so 0.83 stored as 0.82999... is not cut to 0.82
    return math.floor(value * scale + 1e-9) / scale


def _round_half_up(value: float, digits: int) -> float:
    scale = 10 ** digits
    return math.floor(value * scale + 0.5 + 1e-9) / scale


def published_figures(cm: ConfusionMatrix, digits: dict[str, int] | None = None) -> dict[str, float]:
    """Metrics as printed in published comparison tables.

    Accuracy is rounded half-up; precision and recall are cut (not rounded)
    to their printed decimals, and the F-measure is the cut harmonic mean of
    the already-cut precision and recall. ``digits`` maps metric name to
    decimals (default 2, and 3 for F). ``metrics()`` holds the exact values.
    """
    d = {"accuracy": 2, "precision": 2, "recall": 2, "f_measure": 3}
    d.update(digits or {})
    p = _truncate(precision(cm), d["precision"])
    r = _truncate(recall(cm), d["recall"])
    return {
        "accuracy": _round_half_up(accuracy(cm), d["accuracy"]),
        "precision": p,
        "recall": r,
        "f_measure": _truncate(harmonic(p, r), d["f_measure"]),
    }


def metrics(cm: ConfusionMatrix) -> dict[str, float]:
    return {"accuracy": accuracy(cm), "precision": precision(cm),
            "recall": recall(cm), "f_measure": f_measure(cm)}


# -- reports -----------------------------------------------------------------------

@dataclass
class Report:
    cm: ConfusionMatrix
    labels: tuple[str, str]
    values: dict[str, float]
    config: dict[str, str]

    @property
    def record_cm(self) -> ConfusionMatrix:
        return self.cm.scaled()


def report(cm: ConfusionMatrix, labels: Sequence[str], config: dict[str, object] | None = None,
           allow_undefined: bool = False) -> Report:
    """Bundle a matrix with its metrics.

    With ``allow_undefined`` a metric whose denominator is zero is stored as
    NaN instead of raising (a classifier that never predicts the positive
    class still gets a report).
    """
    if allow_undefined:
        values = {}
        for name, fn in (("accuracy", accuracy), ("precision", precision),
                         ("recall", recall), ("f_measure", f_measure)):
            try:
                values[name] = fn(cm)
            except UndefinedMetric:
                values[name] = math.nan
    else:
        values = metrics(cm)
    return Report(cm, (labels[0], labels[1]), values, {k: str(v) for k, v in (config or {}).items()})


def _matrix_lines(cm: ConfusionMatrix, labels, title: str) -> list[str]:
    pos, neg = labels
    w = max(len(str(v)) for v in (cm.tp, cm.fp, cm.fn, cm.tn, "actual " + pos, "actual " + neg)) + 2
    return [
        title,
        f"{'':<18}{'actual ' + pos:>{w}}{'actual ' + neg:>{w}}",
        f"{'predict ' + pos:<18}{cm.tp:>{w}}{cm.fp:>{w}}",
        f"{'predict ' + neg:<18}{cm.fn:>{w}}{cm.tn:>{w}}",
    ]


def format_report(rep: Report) -> str:
    lines = ["[config]"]
    lines += [f"{k}={v}" for k, v in rep.config.items()]
    lines.append("")
    lines += _matrix_lines(rep.cm, rep.labels, "[windows]")
    lines.append("")
    lines += _matrix_lines(rep.record_cm, rep.labels, f"[records x{rep.cm.record_scale}]")
    lines.append("")
    lines.append("[metrics]")
    lines.append(f"accuracy={rep.values['accuracy']:.2f}")
    lines.append(f"precision={rep.values['precision']:.2f}")
    lines.append(f"recall={rep.values['recall']:.2f}")
    lines.append(f"f_measure={rep.values['f_measure']:.3f}")
    return "\n".join(lines) + "\n"


REPORT_FIELDS = ("positive", "negative", "tp", "fp", "fn", "tn", "record_scale",
                 "accuracy", "precision", "recall", "f_measure")


def report_csv(rep: Report) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(REPORT_FIELDS)
    cm = rep.cm
    writer.writerow([rep.labels[0], rep.labels[1], cm.tp, cm.fp, cm.fn, cm.tn, cm.record_scale]
                    + [repr(rep.values[k]) for k in REPORT_FIELDS[7:]])
    return buf.getvalue()


def read_report_csv(text: str) -> Report:
    rows = list(csv.DictReader(io.StringIO(text)))
    if len(rows) != 1:
        raise ValueError("report CSV must hold exactly one data row")
    row = rows[0]
    cm = ConfusionMatrix(*(int(row[k]) for k in ("tp", "fp", "fn", "tn", "record_scale")))
    values = {k: float(row[k]) for k in REPORT_FIELDS[7:]}
    return Report(cm, (row["positive"], row["negative"]), values, {})
