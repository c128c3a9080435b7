"""Command line: synth, prepare, train, compare.

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
Every command is deterministic given its inputs and ``--seed``; nothing
time-dependent is written to disk.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import sys
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from . import baseline, dataset as ds, metrics, pipeline, sda

RUN_MANIFEST = "run_manifest.txt"
STAGES = {"split": 1, "kernels": 2, "alps": 3, "standard": 4, "synth": 5}


class UsageError(Exception):
    """Bad flags, config keys or missing inputs (exit code 2)."""


class IncompatibleTestSet(Exception):
    pass


def stage_seed(root: int, stage: str) -> int:
    return int(np.random.SeedSequence([root, STAGES[stage]]).generate_state(1)[0])


def read_key_values(path) -> dict[str, str]:
    path = Path(path)
    if not path.is_file():
        raise UsageError(f"config file not found: {path}")
    out = {}
    for line_no, line in enumerate(path.read_text().splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{line_no}: expected key=value")
        key, value = (p.strip() for p in line.split("=", 1))
        out[key] = value
    return out


def write_run_manifest(out_dir: Path) -> None:
    lines = []
    for p in sorted(out_dir.rglob("*")):
        if p.is_file() and p.name != RUN_MANIFEST:
            digest = hashlib.sha256(p.read_bytes()).hexdigest()
            lines.append(f"{digest}  {p.relative_to(out_dir).as_posix()}")
    (out_dir / RUN_MANIFEST).write_text("\n".join(lines) + "\n")


# -- synth -----------------------------------------------------------------------

SYNTH_KEYS = {"subjects", "sessions", "duration_s", "rate", "category", "modes"}
SIGNAL_FIELDS = {f.name for f in fields(ds.SignalSpec)}


def parse_synth_spec(pairs: dict[str, str]):
    settings = {"subjects": "6", "sessions": "5", "duration_s": "25", "rate": "506",
                "category": "Color", "modes": "Visible"}
    signals: dict[str, dict[str, float]] = {}
    for key, value in pairs.items():
        if "." in key:
            label, name = key.split(".", 1)
            if name not in SIGNAL_FIELDS:
                raise UsageError(f"unknown signal field {name!r} in {key!r}")
            try:
                signals.setdefault(label, {})[name] = float(value)
            except ValueError:
                raise UsageError(f"{key} must be a number") from None
        elif key in SYNTH_KEYS:
            settings[key] = value
        else:
            raise UsageError(f"unknown synth key {key!r}")
    category = settings["category"]
    if category not in ds.LABELS:
        raise UsageError(f"category must be one of {sorted(ds.LABELS)}")
    labels = ds.LABELS[category]
    if set(signals) != set(labels):
        raise UsageError(f"{category} needs signal settings for exactly {labels}")
    modes = [m.strip() for m in settings["modes"].split(",") if m.strip()]
    if not modes or any(m not in ds.MODES for m in modes):
        raise UsageError(f"modes must be drawn from {ds.MODES}")
    try:
        counts = {k: int(settings[k]) for k in ("subjects", "sessions", "duration_s", "rate")}
        specs = {label: ds.SignalSpec(**signals[label]) for label in labels}
        for spec in specs.values():
            spec.validate()
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid synth spec: {exc}") from None
    if not 1 <= counts["sessions"] <= 5 or counts["subjects"] < 1:
        raise UsageError("need at least one subject and 1..5 sessions")
    return counts, category, modes, specs


def cmd_synth(args) -> int:
    counts, category, modes, specs = parse_synth_spec(read_key_values(args.spec))
    out = Path(args.out)
    (out / "sessions").mkdir(parents=True, exist_ok=True)
    root = stage_seed(args.seed, "synth")
    entries = []
    for s in range(counts["subjects"]):
        subject = f"S{s + 1}"
        for mi, mode in enumerate(modes):
            for session in range(1, counts["sessions"] + 1):
                for li, label in enumerate(ds.LABELS[category]):
                    meta = ds.SessionMeta(subject, category, mode, label, session)
                    sub = ds.generate_synthetic_session(specs[label], [root, s, ds.MODES.index(mode), session, li],
                                                        meta, counts["duration_s"], counts["rate"])
                    rel = f"sessions/{subject}_{category}_{mode}_{label}_{session}.csv".lower()
                    ds.write_subsession_csv(sub, out / rel)
                    entries.append((rel, meta))
    ds.write_manifest(entries, out / "manifest.txt", {"duration_s": str(counts["duration_s"])})
    write_run_manifest(out)
    print(f"wrote {len(entries)} sub-sessions to {out}")
    return 0


# -- prepare ---------------------------------------------------------------------

def cmd_prepare(args) -> int:
    try:
        manifest = ds.read_manifest(args.manifest)
    except ds.MissingFile as exc:
        raise UsageError(str(exc)) from None
    missing = [str(p) for p, _ in manifest.entries if not p.is_file()]
    if missing:
        raise UsageError("missing session file(s): " + ", ".join(missing))
    duration = int(manifest.settings.get("duration_s", 25))
    n_seconds = int(manifest.settings.get("seconds", ds.SECONDS_PER_WINDOW))
    per_second = int(manifest.settings.get("records_per_second", ds.RECORDS_PER_SECOND))
    groups: dict[tuple[str, str], list[ds.Window]] = {}
    for path, meta in manifest.entries:
        session = ds.parse_subsession_csv(path, meta, duration)
        window = ds.build_window(session, n_seconds, per_second)
        groups.setdefault((meta.category, meta.mode), []).append(window)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    summary = [f"seed={args.seed}", f"seconds={n_seconds}", f"records_per_second={per_second}"]
    prov = io.StringIO()
    writer = csv.writer(prov, lineterminator="\n")
    writer.writerow(("window_id", "subject", "category", "mode", "label", "session", "seconds"))
    for (category, mode), windows in sorted(groups.items()):
        windows.sort(key=lambda w: w.window_id)
        name = ds.merged_filename(category, mode)
        ds.write_merged_csv(windows, out / name)
        for w in windows:
            writer.writerow((w.window_id, w.subject_id, w.category, w.mode, w.label, w.session_index,
                             " ".join(map(str, w.seconds))))
        rows = sum(len(w.samples) for w in windows)
        summary.append(f"{name}: windows={len(windows)} rows={rows}")
        print(f"{name}: {len(windows)} windows, {rows} rows")
    (out / "windows.csv").write_text(prov.getvalue())
    (out / "prepare.txt").write_text("\n".join(summary) + "\n")
    write_run_manifest(out)
    return 0


# -- train -----------------------------------------------------------------------

@dataclass
class RunConfig:
    model: str = "proposed"
    dataset: str = ""
    split: str = "80/20"
    seed: int | None = None
    generations: int = 702
    population: int = 300
    mutation: float = 0.18
    layers: int = 5
    age_gap: int = 10
    tournament: int = 3
    max_depth: int = 8
    row_mode: str = "concat"
    lr: float = 0.004
    epochs: int = 2000
    kernels: int = 3
    kernel_size: int = 10

    @classmethod
    def from_sources(cls, file_pairs: dict[str, str], flags: dict[str, object]) -> "RunConfig":
        known = {f.name: f for f in fields(cls)}
        values: dict[str, object] = {}
        for key, raw in file_pairs.items():
            if key not in known:
                raise UsageError(f"unknown config key {key!r}")
            values[key] = raw
        values.update({k: v for k, v in flags.items() if v is not None})
        cfg = cls()
        for key, raw in values.items():
            default = getattr(cfg, key)
            kind = int if key == "seed" else type(default)
            try:
                setattr(cfg, key, kind(raw))
            except ValueError:
                raise UsageError(f"bad value for {key}: {raw!r}") from None
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if self.seed is None:
            raise UsageError("a seed is required (--seed or seed= in the config file)")
        if self.model not in ("proposed", "standard"):
            raise UsageError("model must be 'proposed' or 'standard'")
        if self.split not in ds.RATIOS:
            raise UsageError(f"split must be one of {sorted(ds.RATIOS)}")
        if self.row_mode not in pipeline.ROW_MODES:
            raise UsageError(f"row_mode must be one of {pipeline.ROW_MODES}")
        try:
            self.alps_config()
            self.train_config()
        except ValueError as exc:
            raise UsageError(str(exc)) from None

    def alps_config(self) -> sda.AlpsConfig:
        return sda.AlpsConfig(population_size=self.population, max_generations=self.generations,
                              mutation_probability=self.mutation, n_layers=self.layers,
                              age_gap=self.age_gap, tournament_size=self.tournament,
                              max_depth=self.max_depth, seed=stage_seed(self.seed, "alps"))

    def train_config(self) -> baseline.TrainConfig:
        return baseline.TrainConfig(learning_rate=self.lr, epochs=self.epochs, n_kernels=self.kernels,
                                    kernel_size=self.kernel_size, seed=stage_seed(self.seed, "standard"))


def _resolve_dataset(data_dir: Path, name: str) -> Path:
    if name:
        path = data_dir / (name if name.endswith(".csv") else f"{name}.csv")
        if not path.is_file():
            raise UsageError(f"prepared dataset not found: {path}")
        return path
    merged = sorted(p for p in data_dir.glob("*_*.csv") if p.name != "windows.csv")
    if len(merged) != 1:
        raise UsageError(f"{data_dir} holds {len(merged)} prepared datasets; pick one with --dataset")
    return merged[0]


def _load_windows(data_dir: Path, name: str):
    if not data_dir.is_dir():
        raise UsageError(f"prepared data directory not found: {data_dir}")
    path = _resolve_dataset(data_dir, name)
    windows = ds.read_merged_csv(path)
    if not windows:
        raise UsageError(f"{path} holds no windows")
    labels = ds.LABELS[windows[0].category]
    return path.stem, windows, labels


def _xy(windows, labels):
    X = np.array([w.samples for w in windows])
    return X, pipeline.label_indices([w.label for w in windows], labels)


def _evaluate(model, X, y, labels):
    pred = model.predict(X)
    cm = metrics.accumulate(zip(pred.tolist(), y.tolist()), positive=0)
    return cm, pipeline.model_mse(model, X, y)


def cmd_train(args) -> int:
    flags = {"model": args.model, "dataset": args.dataset, "split": args.split, "seed": args.seed,
             "generations": args.generations, "population": args.population, "mutation": args.mutation,
             "layers": args.layers, "age_gap": args.age_gap, "tournament": args.tournament,
             "max_depth": args.max_depth, "row_mode": args.row_mode, "lr": args.lr,
             "epochs": args.epochs, "kernels": args.kernels, "kernel_size": args.kernel_size}
    cfg = RunConfig.from_sources(read_key_values(args.config) if args.config else {}, flags)
    name, windows, labels = _load_windows(Path(args.data), cfg.dataset)
    cfg.dataset = name
    split = ds.split_train_test(windows, cfg.split, stage_seed(cfg.seed, "split"))
    X_train, y_train = _xy(split.train, labels)
    X_test, y_test = _xy(split.test, labels)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    log = io.StringIO()
    writer = csv.writer(log, lineterminator="\n")
    if cfg.model == "proposed":
        writer.writerow(("generation", "best_mse", "mean_mse", "layer0_refresh_flag"))
        model = pipeline.fit_proposed(X_train, y_train, cfg.alps_config(), labels, cfg.row_mode,
                                      cfg.kernels, cfg.kernel_size, stage_seed(cfg.seed, "kernels"))
        for h in model.history:
            writer.writerow((h.generation, repr(h.best_mse), repr(h.mean_mse), int(h.layer0_refresh)))
        pipeline.save_proposed(model, out / "model.txt")
    else:
        writer.writerow(("epoch", "loss"))
        model = baseline.train(X_train, y_train, cfg.train_config(), labels)
        for epoch, loss in enumerate(model.losses):
            writer.writerow((epoch, repr(loss)))
        pipeline.save_standard(model, out / "model.txt")
    (out / "train_log.csv").write_text(log.getvalue())

    split_rows = ["window_id,set"] + [f"{w.window_id},train" for w in split.train] \
        + [f"{w.window_id},test" for w in split.test]
    (out / "split.csv").write_text("\n".join(split_rows) + "\n")
    echo = {k: v for k, v in asdict(cfg).items()}
    (out / "config.txt").write_text("".join(f"{k}={v}\n" for k, v in echo.items()))

    cm, mse = _evaluate(model, X_test, y_test, labels)
    rep = metrics.report(cm, labels, {**echo, "test_mse": repr(mse)}, allow_undefined=True)
    (out / "report.txt").write_text(metrics.format_report(rep))
    (out / "report.csv").write_text(metrics.report_csv(rep))
    write_run_manifest(out)
    print(f"{cfg.model} on {name}: test accuracy {rep.values['accuracy']:.2f} "
          f"({cm.tp + cm.tn}/{cm.total} windows)")
    return 0


# -- compare ---------------------------------------------------------------------

COMPARE_FIELDS = ("dataset", "model", "generation_or_lr", "population_or_epochs", "accuracy",
                  "mutation", "mse_loss", "precision", "recall", "f_measure")


@dataclass
class ComparisonRow:
    dataset: str
    model: str
    generation_or_lr: str
    population_or_epochs: str
    accuracy: float
    mutation: str
    mse_loss: float
    precision: float
    recall: float
    f_measure: float


def _load_run(run_dir: Path):
    if not (run_dir / "model.txt").is_file():
        raise UsageError(f"no model.txt in {run_dir}")
    model = pipeline.load_model(run_dir / "model.txt")
    config = read_key_values(run_dir / "config.txt")
    test_ids = [line.split(",")[0] for line in (run_dir / "split.csv").read_text().splitlines()[1:]
                if line.endswith(",test")]
    return model, config, test_ids


def comparison_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(COMPARE_FIELDS)
    for r in rows:
        writer.writerow([repr(v) if isinstance(v, float) else v for v in asdict(r).values()])
    return buf.getvalue()


def read_comparison_csv(text: str) -> list[ComparisonRow]:
    rows = []
    for raw in csv.DictReader(io.StringIO(text)):
        kwargs = {}
        for f in fields(ComparisonRow):
            kwargs[f.name] = float(raw[f.name]) if f.type in ("float", float) else raw[f.name]
        rows.append(ComparisonRow(**kwargs))
    return rows


def format_comparison(rows) -> str:
    head = ("Dataset", "CNN", "Gen/L.R", "Pop/Epoch", "Accuracy", "Mutation", "MSE/Loss",
            "Precision", "Recall", "F-Measure")
    body = [head]
    for r in rows:
        body.append((r.dataset, r.model, r.generation_or_lr, r.population_or_epochs, f"{r.accuracy:.2f}",
                     r.mutation, f"{r.mse_loss:.4g}", f"{r.precision:.2f}", f"{r.recall:.2f}",
                     f"{r.f_measure:.3f}"))
    widths = [max(len(row[i]) for row in body) for i in range(len(head))]
    return "\n".join("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip() for row in body) + "\n"


def cmd_compare(args) -> int:
    runs = [_load_run(Path(d)) for d in (args.run_a, args.run_b)]
    (_, cfg_a, ids_a), (_, cfg_b, ids_b) = runs
    if cfg_a.get("dataset") != cfg_b.get("dataset") or sorted(ids_a) != sorted(ids_b):
        raise IncompatibleTestSet("the two runs were evaluated on different test sets")
    name, windows, labels = _load_windows(Path(args.data), cfg_a.get("dataset", ""))
    by_id = {w.window_id: w for w in windows}
    try:
        test = [by_id[i] for i in ids_a]
    except KeyError as exc:
        raise IncompatibleTestSet(f"test window {exc.args[0]} missing from {args.data}") from None
    X, y = _xy(test, labels)
    rows = []
    for model, cfg, _ in runs:
        cm, mse = _evaluate(model, X, y, labels)
        vals = metrics.report(cm, labels, allow_undefined=True).values
        if cfg["model"] == "proposed":
            knobs = (cfg["generations"], cfg["population"], cfg["mutation"])
        else:
            knobs = (cfg["lr"], cfg["epochs"], "-")
        rows.append(ComparisonRow(name, cfg["model"], knobs[0], knobs[1], vals["accuracy"], knobs[2], mse,
                                  vals["precision"], vals["recall"], vals["f_measure"]))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    text = format_comparison(rows)
    (out / "comparison.txt").write_text(text)
    (out / "comparison.csv").write_text(comparison_csv(rows))
    write_run_manifest(out)
    sys.stdout.write(text)
    return 0


# -- entry point ---------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(2, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="eegalps", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="generate synthetic sub-session CSVs and a manifest")
    p.add_argument("--spec", required=True, help="key=value synthetic data spec")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("prepare", help="build 5000-sample windows from a session manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("train", help="train the proposed or standard model")
    p.add_argument("--data", required=True, help="directory written by 'prepare'")
    p.add_argument("--out", required=True)
    p.add_argument("--config", help="key=value file; flags override it")
    p.add_argument("--model", choices=("proposed", "standard"))
    p.add_argument("--dataset", help="prepared dataset name, e.g. color_visible")
    p.add_argument("--split", choices=sorted(ds.RATIOS))
    p.add_argument("--seed", type=int)
    p.add_argument("--generations", type=int)
    p.add_argument("--population", type=int)
    p.add_argument("--mutation", type=float)
    p.add_argument("--layers", type=int)
    p.add_argument("--age-gap", dest="age_gap", type=int)
    p.add_argument("--tournament", type=int)
    p.add_argument("--max-depth", dest="max_depth", type=int)
    p.add_argument("--row-mode", dest="row_mode", choices=pipeline.ROW_MODES)
    p.add_argument("--lr", type=float)
    p.add_argument("--epochs", type=int)
    p.add_argument("--kernels", type=int)
    p.add_argument("--kernel-size", dest="kernel_size", type=int)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("compare", help="evaluate two trained runs side by side")
    p.add_argument("run_a")
    p.add_argument("run_b")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ds.DatasetError, sda.EmptyData, baseline.EmptyTrainSet, baseline.DivergedLoss,
            IncompatibleTestSet, metrics.UndefinedMetric, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
