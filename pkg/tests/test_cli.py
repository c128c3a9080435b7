import subprocess
import sys
from pathlib import Path

import pytest

from eegalps import cli

SPEC = """subjects=2
sessions=3
category=Color
modes=Visible
Red.frequency=10
Green.frequency=20
"""

FAST = ["--generations", "4", "--population", "20", "--layers", "2", "--age-gap", "2"]


def run(*argv):
    return cli.main([str(a) for a in argv])


def tree(root: Path) -> dict[str, bytes]:
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


@pytest.fixture(scope="module")
def prepared(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    (root / "spec.txt").write_text(SPEC)
    assert run("synth", "--spec", root / "spec.txt", "--seed", 3, "--out", root / "syn") == 0
    assert run("prepare", "--manifest", root / "syn" / "manifest.txt", "--seed", 3, "--out", root / "prep") == 0
    return root


def test_help_exits_zero(capsys):
    with pytest.raises(SystemExit) as exc:
        run("--help")
    assert exc.value.code == 0
    for command in ("synth", "prepare", "train", "compare"):
        with pytest.raises(SystemExit) as exc:
            run(command, "--help")
        assert exc.value.code == 0


def test_module_entry_point():
    done = subprocess.run([sys.executable, "-m", "eegalps", "--help"], capture_output=True, text=True)
    assert done.returncode == 0 and "prepare" in done.stdout


def test_bad_flag_exits_two_without_side_effects(tmp_path, prepared):
    out = tmp_path / "run"
    with pytest.raises(SystemExit) as exc:
        run("train", "--data", prepared / "prep", "--out", out, "--seed", 1, "--bogus")
    assert exc.value.code == 2
    assert not out.exists()


def test_prepare_requires_seed(tmp_path, prepared):
    with pytest.raises(SystemExit) as exc:
        run("prepare", "--manifest", prepared / "syn" / "manifest.txt", "--out", tmp_path / "p")
    assert exc.value.code == 2


def test_train_requires_seed(tmp_path, prepared, capsys):
    assert run("train", "--data", prepared / "prep", "--out", tmp_path / "r", *FAST) == 2
    assert "seed" in capsys.readouterr().err
    assert not (tmp_path / "r").exists()


def test_missing_session_file_named(tmp_path, prepared, capsys):
    manifest = (prepared / "syn" / "manifest.txt").read_text()
    first = next(line for line in manifest.splitlines() if line.endswith(",1") and "/" in line)
    rel = first.split(",")[0]
    broken = tmp_path / "syn"
    broken.mkdir()
    (broken / "manifest.txt").write_text(manifest.replace(rel, "sessions/nowhere.csv"))
    code = run("prepare", "--manifest", broken / "manifest.txt", "--seed", 1, "--out", tmp_path / "p")
    assert code == 2
    assert "nowhere.csv" in capsys.readouterr().err


def test_unknown_config_key(tmp_path, prepared, capsys):
    (tmp_path / "c.txt").write_text("seed=1\nlearning_speed=3\n")
    assert run("train", "--data", prepared / "prep", "--out", tmp_path / "r", "--config", tmp_path / "c.txt") == 2
    assert "learning_speed" in capsys.readouterr().err


def test_config_file_overridden_by_flags(tmp_path, prepared):
    (tmp_path / "c.txt").write_text("# proposed run\nseed=5\ngenerations=50\npopulation=20\nlayers=2\n")
    assert run("train", "--data", prepared / "prep", "--out", tmp_path / "r", "--config", tmp_path / "c.txt",
               "--generations", 2) == 0
    echo = cli.read_key_values(tmp_path / "r" / "config.txt")
    assert echo["generations"] == "2" and echo["seed"] == "5" and echo["dataset"] == "color_visible"
    assert len((tmp_path / "r" / "train_log.csv").read_text().splitlines()) == 1 + 3


def test_prepare_outputs(prepared):
    prep = prepared / "prep"
    assert (prep / "color_visible.csv").is_file()
    summary = (prep / "prepare.txt").read_text()
    assert "color_visible.csv: windows=12 rows=60000" in summary
    manifest = (prep / "run_manifest.txt").read_text()
    assert "color_visible.csv" in manifest and "windows.csv" in manifest


@pytest.mark.parametrize("command", ["synth", "prepare", "train-proposed", "train-standard", "compare"])
def test_rerun_is_byte_identical(tmp_path, prepared, command):
    def once(out):
        if command == "synth":
            return run("synth", "--spec", prepared / "spec.txt", "--seed", 3, "--out", out)
        if command == "prepare":
            return run("prepare", "--manifest", prepared / "syn" / "manifest.txt", "--seed", 3, "--out", out)
        if command == "train-proposed":
            return run("train", "--data", prepared / "prep", "--out", out, "--seed", 9, *FAST)
        if command == "train-standard":
            return run("train", "--data", prepared / "prep", "--out", out, "--seed", 9, "--model", "standard",
                       "--epochs", 3)
        a, b = out / "a", out / "b"
        run("train", "--data", prepared / "prep", "--out", a, "--seed", 9, *FAST)
        run("train", "--data", prepared / "prep", "--out", b, "--seed", 9, "--model", "standard", "--epochs", 3)
        return run("compare", a, b, "--data", prepared / "prep", "--out", out / "cmp")

    assert once(tmp_path / "one") == 0
    assert once(tmp_path / "two") == 0
    assert tree(tmp_path / "one") == tree(tmp_path / "two")
    assert tree(tmp_path / "one")


def test_prepare_seed_does_not_change_windows(tmp_path, prepared):
    run("prepare", "--manifest", prepared / "syn" / "manifest.txt", "--seed", 4, "--out", tmp_path / "p")
    assert (tmp_path / "p" / "color_visible.csv").read_bytes() == (prepared / "prep" / "color_visible.csv").read_bytes()


def test_train_report_and_compare(tmp_path, prepared, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run("train", "--data", prepared / "prep", "--out", a, "--seed", 2, *FAST) == 0
    assert run("train", "--data", prepared / "prep", "--out", b, "--seed", 2, "--model", "standard",
               "--epochs", 3) == 0
    for d in (a, b):
        names = set(tree(d))
        assert {"model.txt", "train_log.csv", "split.csv", "config.txt", "report.txt", "report.csv",
                "run_manifest.txt"} <= names
        assert "[records x5000]" in (d / "report.txt").read_text()
    assert (b / "train_log.csv").read_text().splitlines()[0] == "epoch,loss"
    assert (a / "train_log.csv").read_text().splitlines()[0] == "generation,best_mse,mean_mse,layer0_refresh_flag"
    assert run("compare", a, b, "--data", prepared / "prep", "--out", tmp_path / "cmp") == 0
    text = (tmp_path / "cmp" / "comparison.txt").read_text()
    assert "proposed" in text and "standard" in text
    rows = cli.read_comparison_csv((tmp_path / "cmp" / "comparison.csv").read_text())
    assert [r.model for r in rows] == ["proposed", "standard"]
    assert rows[0].generation_or_lr == "4" and rows[1].population_or_epochs == "3"
    assert cli.comparison_csv(rows) == (tmp_path / "cmp" / "comparison.csv").read_text()


def test_compare_identical_runs_give_identical_rows(tmp_path, prepared):
    a = tmp_path / "a"
    run("train", "--data", prepared / "prep", "--out", a, "--seed", 2, *FAST)
    assert run("compare", a, a, "--data", prepared / "prep", "--out", tmp_path / "cmp") == 0
    r1, r2 = cli.read_comparison_csv((tmp_path / "cmp" / "comparison.csv").read_text())
    assert r1 == r2


def test_compare_rejects_different_test_sets(tmp_path, prepared, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    run("train", "--data", prepared / "prep", "--out", a, "--seed", 2, *FAST)
    run("train", "--data", prepared / "prep", "--out", b, "--seed", 3, *FAST)
    assert run("compare", a, b, "--data", prepared / "prep", "--out", tmp_path / "cmp") == 1
    assert "different test sets" in capsys.readouterr().err


def test_stage_seeds_are_distinct():
    seeds = {cli.stage_seed(7, s) for s in cli.STAGES}
    assert len(seeds) == len(cli.STAGES)
    assert cli.stage_seed(7, "alps") == cli.stage_seed(7, "alps")


def test_bad_synth_spec(tmp_path):
    (tmp_path / "s.txt").write_text(SPEC + "Blue.frequency=3\n")
    assert run("synth", "--spec", tmp_path / "s.txt", "--seed", 1, "--out", tmp_path / "o") == 2
