"""Session CSV ingestion and window preparation.

A sub-session is one labelled 25 s recording stored as a flat CSV with the
header ``timestamp_ms,raw_eeg,attention,meditation,signal_quality,blink_strength``.
Attention and meditation arrive once per second and are repeated on every raw
row until the next reading.

Preparation turns each sub-session into one 5000-sample window: the ten
seconds with the highest attention are picked (kept in recording order) and
500 raw values are taken from each, padding short seconds by nearest
neighbour resampling.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

CSV_HEADER = ("timestamp_ms", "raw_eeg", "attention", "meditation",
              "signal_quality", "blink_strength")
MERGED_HEADER = ("window_id", "label", "sample_index", "value")

LABELS = {"Color": ("Red", "Green"), "Shape": ("Forward", "Right")}
MODES = ("Visible", "Invisible")
RATIOS = {"70/30": 0.70, "75/25": 0.75, "80/20": 0.80}

SECONDS_PER_WINDOW = 10
RECORDS_PER_SECOND = 500
WINDOW_LENGTH = SECONDS_PER_WINDOW * RECORDS_PER_SECOND


class DatasetError(ValueError):
    pass


class MissingFile(DatasetError, FileNotFoundError):
    pass


class MalformedRow(DatasetError):
    def __init__(self, line_no: int, reason: str = ""):
        self.line_no = line_no
        super().__init__(f"malformed row at line {line_no}" + (f": {reason}" if reason else ""))


class EmptySession(DatasetError):
    pass


class InsufficientSeconds(DatasetError):
    def __init__(self, available: int, needed: int):
        self.available = available
        super().__init__(f"only {available} seconds available, {needed} needed")


class SecondNotFound(DatasetError):
    pass


class EmptyInput(DatasetError):
    pass


class TargetTooSmall(DatasetError):
    pass


class TooFewWindows(DatasetError):
    def __init__(self, label: str, count: int):
        self.label = label
        super().__init__(f"class {label!r} has {count} window(s); at least 2 are needed")


class InvalidSpec(DatasetError):
    pass


@dataclass(frozen=True)
class RawRecord:
    timestamp_ms: int
    raw_eeg: int
    attention: int
    meditation: int
    signal_quality: int
    blink_strength: int | None = None


@dataclass(frozen=True)
class SessionMeta:
    subject_id: str
    category: str
    mode: str
    label: str
    session_index: int

    def __post_init__(self):
        if self.category not in LABELS:
            raise DatasetError(f"unknown category {self.category!r}")
        if self.mode not in MODES:
            raise DatasetError(f"unknown mode {self.mode!r}")
        if self.label not in LABELS[self.category]:
            raise DatasetError(f"label {self.label!r} does not belong to category {self.category}")
        if not 1 <= self.session_index <= 5:
            raise DatasetError(f"session index {self.session_index} outside 1..5")


@dataclass
class SubSession:
    """One labelled recording, stored column-wise.

    ``blink_strength`` uses -1 for rows where no blink value was present.
    """

    meta: SessionMeta
    timestamp_ms: np.ndarray
    raw_eeg: np.ndarray
    attention: np.ndarray
    meditation: np.ndarray
    signal_quality: np.ndarray
    blink_strength: np.ndarray
    duration_s: int = 25

    def __len__(self) -> int:
        return len(self.timestamp_ms)

    @property
    def records(self) -> list[RawRecord]:
        return [
            RawRecord(int(t), int(r), int(a), int(m), int(q), None if b < 0 else int(b))
            for t, r, a, m, q, b in zip(self.timestamp_ms, self.raw_eeg, self.attention,
                                        self.meditation, self.signal_quality, self.blink_strength)
        ]

    @property
    def seconds(self) -> np.ndarray:
        return self.timestamp_ms // 1000

    @property
    def records_per_second(self) -> float:
        return len(self) / self.duration_s

    @classmethod
    def from_records(cls, meta: SessionMeta, records: Sequence[RawRecord], duration_s: int = 25):
        cols = list(zip(*[(r.timestamp_ms, r.raw_eeg, r.attention, r.meditation, r.signal_quality,
                           -1 if r.blink_strength is None else r.blink_strength) for r in records]))
        if not cols:
            cols = [()] * 6
        arrays = [np.asarray(c, dtype=np.int64) for c in cols]
        return cls(meta, *arrays, duration_s=duration_s)


@dataclass
class Window:
    label: str
    samples: np.ndarray
    subject_id: str
    session_index: int
    seconds: tuple[int, ...]
    category: str = "Color"
    mode: str = "Visible"

    @property
    def window_id(self) -> str:
        return f"{self.subject_id}-{self.category}-{self.mode}-{self.label}-{self.session_index}"


@dataclass
class DatasetSplit:
    train: list[Window]
    test: list[Window]
    ratio: str
    seed: int
    labels: tuple[str, ...] = field(default=())


# -- CSV parsing ---------------------------------------------------------------

def _parse_int(text: str, line_no: int, column: str) -> int:
    try:
        return int(text)
    except ValueError:
        try:
            value = float(text)
        except ValueError:
            raise MalformedRow(line_no, f"{column}={text!r}") from None
        if not value.is_integer():
            raise MalformedRow(line_no, f"{column}={text!r}")
        return int(value)


def parse_subsession_csv(path: str | os.PathLike, meta: SessionMeta, duration_s: int = 25) -> SubSession:
    """Read one sub-session file. Any unparseable row raises, none are skipped."""
    path = Path(path)
    if not path.is_file():
        raise MissingFile(f"no such file: {path}")
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise EmptySession(f"{path} is empty")
        header = [h.strip() for h in header]
        if tuple(header[:5]) != CSV_HEADER[:5]:
            raise MalformedRow(1, f"unexpected header {header}")
        rows = []
        last_ts = None
        for line_no, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) not in (5, 6):
                raise MalformedRow(line_no, f"expected 5 or 6 fields, got {len(row)}")
            ts, raw, att, med, qual = (_parse_int(row[i].strip(), line_no, CSV_HEADER[i]) for i in range(5))
            blink_text = row[5].strip() if len(row) == 6 else ""
            blink = _parse_int(blink_text, line_no, "blink_strength") if blink_text else -1
            if not (0 <= att <= 100 and 0 <= med <= 100):
                raise MalformedRow(line_no, "attention/meditation outside 0..100")
            if not 0 <= qual <= 200:
                raise MalformedRow(line_no, "signal_quality outside 0..200")
            if last_ts is not None and ts < last_ts:
                raise MalformedRow(line_no, "timestamp decreases")
            last_ts = ts
            rows.append((ts, raw, att, med, qual, blink))
    if not rows:
        raise EmptySession(f"{path} has no data rows")
    cols = np.asarray(rows, dtype=np.int64).T
    return SubSession(meta, *cols, duration_s=duration_s)


def write_subsession_csv(session: SubSession, path: str | os.PathLike) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for rec in zip(session.timestamp_ms, session.raw_eeg, session.attention,
                       session.meditation, session.signal_quality, session.blink_strength):
            row = [int(v) for v in rec]
            writer.writerow(row[:5] + ["" if row[5] < 0 else row[5]])


# -- preparation ---------------------------------------------------------------

def select_top_attention_seconds(session: SubSession, n: int = SECONDS_PER_WINDOW) -> list[int]:
    """Seconds with the n highest attention values, returned in recording order.

    A second's attention is the highest reading seen during it; equal values
    favour the earlier second.
    """
    seconds = session.seconds
    distinct, start = np.unique(seconds, return_index=True)
    if len(distinct) < n:
        raise InsufficientSeconds(len(distinct), n)
    per_second = np.maximum.reduceat(session.attention, start)
    order = sorted(range(len(distinct)), key=lambda i: (-per_second[i], distinct[i]))
    return sorted(int(distinct[i]) for i in order[:n])


def neighbor_interpolate(x: Sequence[float], target: int) -> np.ndarray:
    """Nearest-index resampling of x up to ``target`` values.

    Position i takes x[round(i * (len(x) - 1) / (target - 1))], halves rounding
    up, so every original value survives and nothing new is invented.
    """
    x = np.asarray(x)
    if len(x) == 0:
        raise EmptyInput("cannot interpolate an empty sequence")
    if target < len(x):
        raise TargetTooSmall(f"target {target} is shorter than input ({len(x)})")
    if target == 1:
        return x[:1].copy()
    # exact integer arithmetic; np.round would send 0.5 to the even neighbour
    i = np.arange(target, dtype=np.int64)
    idx = (2 * i * (len(x) - 1) + (target - 1)) // (2 * (target - 1))
    return x[idx]


def fetch_records_for_second(session: SubSession, second: int,
                             target: int = RECORDS_PER_SECOND) -> np.ndarray:
    mask = session.seconds == second
    if not mask.any():
        raise SecondNotFound(f"second {second} not present in session")
    values = session.raw_eeg[mask].astype(float)
    if len(values) >= target:
        return values[:target]
    return neighbor_interpolate(values, target)


def build_window(session: SubSession, n_seconds: int = SECONDS_PER_WINDOW,
                 per_second: int = RECORDS_PER_SECOND) -> Window:
    chosen = select_top_attention_seconds(session, n_seconds)
    samples = np.concatenate([fetch_records_for_second(session, s, per_second) for s in chosen])
    m = session.meta
    return Window(m.label, samples, m.subject_id, m.session_index, tuple(chosen), m.category, m.mode)


def build_windows(sessions: Iterable[SubSession], n_seconds: int = SECONDS_PER_WINDOW,
                  per_second: int = RECORDS_PER_SECOND) -> list[Window]:
    return [build_window(s, n_seconds, per_second) for s in sessions]


def split_train_test(windows: Sequence[Window], ratio: str = "80/20", seed: int = 0) -> DatasetSplit:
    """Stratified, seeded split at window level.

    Each class contributes round(count * train_fraction) windows to the
    training side, clipped so both sides keep at least one window.
    """
    if ratio not in RATIOS:
        raise DatasetError(f"ratio must be one of {sorted(RATIOS)}, got {ratio!r}")
    frac = RATIOS[ratio]
    by_label: dict[str, list[Window]] = {}
    for w in windows:
        by_label.setdefault(w.label, []).append(w)
    for label, members in by_label.items():
        if len(members) < 2:
            raise TooFewWindows(label, len(members))
    rng = np.random.default_rng(seed)
    train, test = [], []
    for label in sorted(by_label):
        members = sorted(by_label[label], key=lambda w: w.window_id)
        perm = rng.permutation(len(members))
        n_train = min(max(int(math.floor(len(members) * frac + 0.5)), 1), len(members) - 1)
        train.extend(members[i] for i in sorted(perm[:n_train]))
        test.extend(members[i] for i in sorted(perm[n_train:]))
    return DatasetSplit(train, test, ratio, seed, tuple(sorted(by_label)))


# -- merged window files -------------------------------------------------------

def merged_filename(category: str, mode: str) -> str:
    return f"{category.lower()}_{mode.lower()}.csv"


def write_merged_csv(windows: Sequence[Window], path: str | os.PathLike) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(MERGED_HEADER)
        for w in windows:
            wid = w.window_id
            for i, v in enumerate(w.samples):
                writer.writerow((wid, w.label, i, repr(float(v))))


def read_merged_csv(path: str | os.PathLike) -> list[Window]:
    path = Path(path)
    if not path.is_file():
        raise MissingFile(f"no such file: {path}")
    samples: dict[str, list[float]] = {}
    labels: dict[str, str] = {}
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != MERGED_HEADER:
            raise MalformedRow(1, "bad merged-window header")
        for line_no, row in enumerate(reader, start=2):
            if len(row) != 4:
                raise MalformedRow(line_no)
            wid, label, idx, value = row
            seq = samples.setdefault(wid, [])
            labels[wid] = label
            try:
                if int(idx) != len(seq):
                    raise MalformedRow(line_no, "sample_index out of order")
                seq.append(float(value))
            except ValueError:
                raise MalformedRow(line_no) from None
    windows = []
    for wid, seq in samples.items():
        subject, category, mode, label, session = wid.rsplit("-", 4)
        windows.append(Window(labels[wid], np.asarray(seq), subject, int(session), (),
                              category, mode))
    return windows


# -- manifests -------------------------------------------------------------------

@dataclass
class Manifest:
    entries: list[tuple[Path, SessionMeta]]
    settings: dict[str, str]


MANIFEST_KEYS = {"root", "duration_s", "seconds", "records_per_second"}


def read_manifest(path: str | os.PathLike) -> Manifest:
    """Parse a dataset manifest.

    ``key=value`` lines set options; every other non-comment line reads
    ``path,subject,category,mode,label,session``. Relative paths resolve
    against ``root`` (itself relative to the manifest's directory).
    """
    path = Path(path)
    if not path.is_file():
        raise MissingFile(f"no such file: {path}")
    settings: dict[str, str] = {}
    raw_entries = []
    for line_no, line in enumerate(path.read_text().splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" in line and "," not in line:
            key, value = (p.strip() for p in line.split("=", 1))
            if key not in MANIFEST_KEYS:
                raise MalformedRow(line_no, f"unknown manifest key {key!r}")
            settings[key] = value
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != 6:
            raise MalformedRow(line_no, "expected path,subject,category,mode,label,session")
        try:
            meta = SessionMeta(parts[1], parts[2], parts[3], parts[4], int(parts[5]))
        except (ValueError, DatasetError) as exc:
            raise MalformedRow(line_no, str(exc)) from None
        raw_entries.append((parts[0], meta))
    root = path.parent / settings.get("root", ".")
    return Manifest([(root / p, m) for p, m in raw_entries], settings)


def write_manifest(entries: Sequence[tuple[str, SessionMeta]], path: str | os.PathLike,
                   settings: dict[str, str] | None = None) -> None:
    lines = [f"{k}={v}" for k, v in (settings or {}).items()]
    for p, m in entries:
        lines.append(",".join([p, m.subject_id, m.category, m.mode, m.label, str(m.session_index)]))
    Path(path).write_text("\n".join(lines) + "\n")


def protocol_duration_s(subjects: int = 6, sessions: int = 5, subsession_s: int = 25,
                        subsessions: int = 2, modes: int = 2, categories: int = 2) -> int:
    """Total recorded seconds for the full collection protocol."""
    return subjects * sessions * subsession_s * subsessions * modes * categories


# -- synthetic sessions --------------------------------------------------------

@dataclass(frozen=True)
class SignalSpec:
    """Per-class raw signal model: a sinusoid in ADC units plus Gaussian noise.

    ``phase`` is the sinusoid phase at the first sample of each recorded
    second's clock (stimulus-locked); ``phase_jitter`` draws an extra uniform
    offset in [-jitter, jitter] per session.
    """

    frequency: float
    amplitude: float = 50.0
    noise: float = 20.0
    phase: float = 0.0
    phase_jitter: float = 0.0
    offset: float = 0.0

    def validate(self) -> None:
        values = (self.frequency, self.amplitude, self.noise, self.phase, self.phase_jitter, self.offset)
        if not all(math.isfinite(v) for v in values):
            raise InvalidSpec("signal spec values must be finite")
        if self.frequency <= 0 or self.amplitude < 0 or self.noise < 0 or self.phase_jitter < 0:
            raise InvalidSpec(f"invalid signal spec {self}")


def generate_synthetic_session(spec: SignalSpec, seed: int, meta: SessionMeta,
                               duration_s: int = 25, rate: int = 506) -> SubSession:
    spec.validate()
    if duration_s < 1 or rate < 1:
        raise InvalidSpec("duration and rate must be positive")
    rng = np.random.default_rng(seed)
    n = duration_s * rate
    idx = np.arange(n)
    timestamp_ms = (idx * 1000) // rate
    t = idx / rate
    phase = spec.phase + (rng.uniform(-spec.phase_jitter, spec.phase_jitter) if spec.phase_jitter else 0.0)
    signal = spec.offset + spec.amplitude * np.sin(2 * np.pi * spec.frequency * t + phase)
    if spec.noise:
        signal = signal + rng.normal(0.0, spec.noise, n)
    raw = np.rint(signal).astype(np.int64)
    sec = timestamp_ms // 1000
    attention = rng.integers(20, 101, duration_s)[sec]
    meditation = rng.integers(0, 101, duration_s)[sec]
    quality = np.zeros(n, dtype=np.int64)
    blink = np.full(n, -1, dtype=np.int64)
    return SubSession(meta, timestamp_ms.astype(np.int64), raw, attention, meditation,
                      quality, blink, duration_s=duration_s)
