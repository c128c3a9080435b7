import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from eegalps import dataset as ds

META = ds.SessionMeta("S1", "Color", "Visible", "Red", 1)


def make_session(counts, attention=None, meta=META, raw=None):
    """Session with counts[s] records in second s; raw values count up from 0."""
    ts, att = [], []
    attention = attention if attention is not None else [50] * len(counts)
    for s, c in enumerate(counts):
        ts.extend(s * 1000 + (i * 1000) // c for i in range(c))
        att.extend([attention[s]] * c)
    n = len(ts)
    raw = np.arange(n) if raw is None else np.asarray(raw)
    zeros = np.zeros(n, dtype=np.int64)
    return ds.SubSession(meta, np.asarray(ts), raw, np.asarray(att), zeros, zeros,
                         np.full(n, -1), duration_s=len(counts))


def nearest_index_oracle(n, target):
    # round half up with exact rationals
    return [int(math.floor(Fraction(i * (n - 1), target - 1) + Fraction(1, 2))) for i in range(target)]


# -- parsing -----------------------------------------------------------------------

def write_csv(path, rows, header=",".join(ds.CSV_HEADER)):
    path.write_text(header + "\n" + "".join(r + "\n" for r in rows))
    return path


def test_parse_full_session(tmp_path):
    session = ds.generate_synthetic_session(ds.SignalSpec(10), 1, META)
    p = tmp_path / "s.csv"
    ds.write_subsession_csv(session, p)
    back = ds.parse_subsession_csv(p, META)
    assert len(back) == 12650
    assert back.records_per_second == pytest.approx(506)
    np.testing.assert_array_equal(back.raw_eeg, session.raw_eeg)
    np.testing.assert_array_equal(back.attention, session.attention)
    assert back.records[0].blink_strength is None


def test_parse_header_only(tmp_path):
    with pytest.raises(ds.EmptySession):
        ds.parse_subsession_csv(write_csv(tmp_path / "e.csv", []), META)


def test_parse_bad_attention_names_line(tmp_path):
    p = write_csv(tmp_path / "bad.csv", ["0,12,40,50,0,", "2,13,abc,50,0,"])
    with pytest.raises(ds.MalformedRow) as info:
        ds.parse_subsession_csv(p, META)
    assert info.value.line_no == 3


def test_parse_missing_file(tmp_path):
    with pytest.raises(ds.MissingFile):
        ds.parse_subsession_csv(tmp_path / "nope.csv", META)


def test_parse_rejects_out_of_range_and_unordered(tmp_path):
    with pytest.raises(ds.MalformedRow):
        ds.parse_subsession_csv(write_csv(tmp_path / "a.csv", ["0,1,101,0,0,"]), META)
    with pytest.raises(ds.MalformedRow):
        ds.parse_subsession_csv(write_csv(tmp_path / "b.csv", ["5,1,1,0,0,", "4,1,1,0,0,"]), META)


def test_parse_blink_column(tmp_path):
    p = write_csv(tmp_path / "b.csv", ["0,-3,40,50,0,", "2,7,40,50,26,55"])
    s = ds.parse_subsession_csv(p, META)
    assert [r.blink_strength for r in s.records] == [None, 55]
    assert s.records[0].raw_eeg == -3


def test_label_must_match_category():
    with pytest.raises(ds.DatasetError):
        ds.SessionMeta("S1", "Color", "Visible", "Forward", 1)


# -- attention selection ----------------------------------------------------------------

def test_top_attention_matches_sort_oracle():
    att = [10, 90, 85, 20, 95] + [5] * 20
    s = make_session([506] * 25, att)
    oracle = sorted(sorted(range(25), key=lambda i: (-att[i], i))[:3])
    assert ds.select_top_attention_seconds(s, 3) == oracle == [1, 2, 4]


def test_top_attention_ties_take_earliest():
    s = make_session([506] * 25, [60] * 25)
    assert ds.select_top_attention_seconds(s, 10) == list(range(10))


def test_top_attention_insufficient():
    with pytest.raises(ds.InsufficientSeconds) as info:
        ds.select_top_attention_seconds(make_session([506] * 5), 10)
    assert info.value.available == 5


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(0, 100), min_size=10, max_size=30), st.integers(1, 10))
def test_top_attention_sorted_and_sized(att, n):
    s = make_session([20] * len(att), att)
    chosen = ds.select_top_attention_seconds(s, n)
    assert len(chosen) == n and chosen == sorted(chosen)
    oracle = sorted(sorted(range(len(att)), key=lambda i: (-att[i], i))[:n])
    assert chosen == oracle


# -- fetch and interpolation ---------------------------------------------------------

def test_fetch_first_500_of_506():
    s = make_session([506] * 12)
    out = ds.fetch_records_for_second(s, 3)
    np.testing.assert_array_equal(out, np.arange(3 * 506, 3 * 506 + 500))


def test_fetch_exactly_500_is_identity():
    s = make_session([500] * 12)
    np.testing.assert_array_equal(ds.fetch_records_for_second(s, 0), np.arange(500))


def test_fetch_499_interpolates_from_neighbours():
    s = make_session([499] * 12)
    out = ds.fetch_records_for_second(s, 0)
    assert len(out) == 500
    expected = np.arange(499)[nearest_index_oracle(499, 500)]
    np.testing.assert_array_equal(out, expected)
    assert set(out) == set(range(499))


def test_fetch_missing_second():
    with pytest.raises(ds.SecondNotFound):
        ds.fetch_records_for_second(make_session([10] * 3), 7)


@pytest.mark.parametrize("x, target, expected", [
    ([1, 2, 3], 3, [1, 2, 3]),
    ([1, 2], 4, [1, 1, 2, 2]),
    ([7], 3, [7, 7, 7]),
])
def test_neighbor_interpolate_examples(x, target, expected):
    assert ds.neighbor_interpolate(x, target).tolist() == expected


def test_neighbor_interpolate_errors():
    with pytest.raises(ds.EmptyInput):
        ds.neighbor_interpolate([], 5)
    with pytest.raises(ds.TargetTooSmall):
        ds.neighbor_interpolate([1, 2, 3], 2)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.integers(-2048, 2047), min_size=1, max_size=60), st.integers(0, 80))
def test_neighbor_interpolate_properties(x, extra):
    target = len(x) + extra
    out = ds.neighbor_interpolate(x, target)
    assert len(out) == target
    idx = nearest_index_oracle(len(x), target) if target > 1 else [0]
    assert out.tolist() == [x[i] for i in idx]
    assert idx == sorted(idx)
    # every original position survives, so no value is invented or lost
    assert sorted(set(idx)) == list(range(len(x)))


# -- windows -------------------------------------------------------------------------

@settings(max_examples=25, deadline=None)
@given(st.lists(st.integers(400, 520), min_size=10, max_size=25), st.data())
def test_window_always_5000(counts, data):
    att = data.draw(st.lists(st.integers(0, 100), min_size=len(counts), max_size=len(counts)))
    w = ds.build_window(make_session(counts, att))
    assert w.samples.shape == (5000,)
    assert list(w.seconds) == sorted(w.seconds)


def test_window_concatenates_selected_seconds_in_order():
    att = [0] * 25
    for s in (3, 20, 7, 11, 0, 24, 15, 9, 18, 5):
        att[s] = 90
    s = make_session([506] * 25, att)
    w = ds.build_window(s)
    assert w.seconds == (0, 3, 5, 7, 9, 11, 15, 18, 20, 24)
    np.testing.assert_array_equal(w.samples[:500], np.arange(500))
    np.testing.assert_array_equal(w.samples[500:1000], np.arange(3 * 506, 3 * 506 + 500))


def protocol_sessions(subjects=6, sessions=5, category="Color", mode="Visible"):
    out = []
    for subj in range(subjects):
        for sess in range(1, sessions + 1):
            for li, label in enumerate(ds.LABELS[category]):
                meta = ds.SessionMeta(f"S{subj + 1}", category, mode, label, sess)
                spec = ds.SignalSpec(10 if li == 0 else 20, noise=5)
                out.append(ds.generate_synthetic_session(spec, [subj, sess, li], meta))
    return out


def test_build_windows_protocol_count():
    windows = ds.build_windows(protocol_sessions())
    assert len(windows) == 6 * 5 * 2
    assert all(len(w.samples) == 5000 for w in windows)
    assert len({w.window_id for w in windows}) == 60


def test_build_windows_empty():
    assert ds.build_windows([]) == []


def test_merged_csv_round_trip(tmp_path):
    windows = ds.build_windows(protocol_sessions(subjects=1, sessions=2))
    p = tmp_path / ds.merged_filename("Color", "Visible")
    ds.write_merged_csv(windows, p)
    back = ds.read_merged_csv(p)
    assert [w.window_id for w in back] == [w.window_id for w in windows]
    for a, b in zip(windows, back):
        assert a.label == b.label
        np.testing.assert_array_equal(a.samples, b.samples)


# -- splitting -----------------------------------------------------------------------

def fake_windows(per_class):
    return [ds.Window(label, np.zeros(5), f"S{i}", 1, (), "Color", "Visible")
            for label, n in per_class.items() for i in range(n)]


def test_split_80_20_of_60():
    split = ds.split_train_test(fake_windows({"Red": 30, "Green": 30}), "80/20", seed=4)
    assert (len(split.train), len(split.test)) == (48, 12)
    assert sum(w.label == "Red" for w in split.test) == 6


def test_split_reproducible_and_seed_sensitive():
    w = fake_windows({"Red": 30, "Green": 30})
    ids = lambda s: [x.window_id for x in s.test]
    assert ids(ds.split_train_test(w, "80/20", 1)) == ids(ds.split_train_test(w, "80/20", 1))
    assert ids(ds.split_train_test(w, "80/20", 1)) != ids(ds.split_train_test(w, "80/20", 2))


def test_split_too_few():
    with pytest.raises(ds.TooFewWindows):
        ds.split_train_test(fake_windows({"Red": 5, "Green": 1}), "80/20", 0)


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 40), st.integers(2, 40), st.sampled_from(sorted(ds.RATIOS)), st.integers(0, 2**32 - 1))
def test_split_partition_and_stratified(n_red, n_green, ratio, seed):
    windows = fake_windows({"Red": n_red, "Green": n_green})
    split = ds.split_train_test(windows, ratio, seed)
    train_ids = {w.window_id for w in split.train}
    test_ids = {w.window_id for w in split.test}
    assert not train_ids & test_ids
    assert train_ids | test_ids == {w.window_id for w in windows}
    frac = ds.RATIOS[ratio]
    for label, n in (("Red", n_red), ("Green", n_green)):
        in_train = sum(w.label == label for w in split.train)
        assert abs(in_train - n * frac) <= 1
        assert abs((n - in_train) - n * (1 - frac)) <= 1


# -- manifests & synthesis -----------------------------------------------------------

def test_manifest_round_trip(tmp_path):
    entries = [("a.csv", META), ("b.csv", ds.SessionMeta("S2", "Shape", "Invisible", "Right", 5))]
    ds.write_manifest(entries, tmp_path / "m.txt", {"duration_s": "25"})
    m = ds.read_manifest(tmp_path / "m.txt")
    assert [meta for _, meta in m.entries] == [META, entries[1][1]]
    assert m.entries[0][0] == tmp_path / "a.csv"
    assert m.settings == {"duration_s": "25"}


def test_manifest_unknown_key(tmp_path):
    (tmp_path / "m.txt").write_text("colour=blue\n")
    with pytest.raises(ds.MalformedRow):
        ds.read_manifest(tmp_path / "m.txt")


def test_protocol_totals():
    total = ds.protocol_duration_s()
    assert total == 6000
    assert total / 60 == 100
    assert ds.protocol_duration_s(modes=1, categories=1) == 1500


def test_synthetic_session_shape():
    s = ds.generate_synthetic_session(ds.SignalSpec(10), 0, META)
    assert len(s) == 25 * 506
    assert np.bincount(s.seconds).tolist() == [506] * 25
    assert len(set(s.attention.tolist())) > 1
    assert s.attention.min() >= 0 and s.attention.max() <= 100


def test_synthetic_noise_free_is_pure_sinusoid():
    s = ds.generate_synthetic_session(ds.SignalSpec(10, amplitude=100, noise=0), 0, META)
    t = np.arange(len(s)) / 506
    np.testing.assert_allclose(s.raw_eeg, np.rint(100 * np.sin(2 * np.pi * 10 * t)), atol=0)


def test_synthetic_same_seed_same_bytes(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    spec = ds.SignalSpec(20, noise=30, phase_jitter=0.5)
    ds.write_subsession_csv(ds.generate_synthetic_session(spec, 11, META), a)
    ds.write_subsession_csv(ds.generate_synthetic_session(spec, 11, META), b)
    assert a.read_bytes() == b.read_bytes()


@pytest.mark.parametrize("spec", [ds.SignalSpec(0), ds.SignalSpec(10, noise=-1),
                                  ds.SignalSpec(float("nan"))])
def test_synthetic_invalid_spec(spec):
    with pytest.raises(ds.InvalidSpec):
        ds.generate_synthetic_session(spec, 0, META)
