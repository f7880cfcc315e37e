import csv
import hashlib

import numpy as np
import pytest
from scipy.linalg import solve_toeplitz

from lidkit.audio_io import Waveform, read_wav
from lidkit.errors import BadManifest, BadModelFile, MissingFile, TooShort
from lidkit.features import FeatureConfig, extract
from lidkit.gmm import classify_gmm
from lidkit.harness import (EvalReport, ModelSet, TrainParams, Trial, evaluate, load_manifest,
                            load_model_set, save_model_set, segment_test, synth_corpus, train_all)
from lidkit.harness.persist import dumps, loads


@pytest.fixture(scope="module")
def small(tmp_path_factory):
    root = tmp_path_factory.mktemp("small")
    return synth_corpus(root, n_languages=3, n_speakers=3, utterance_seconds=6.0, seed=5), root


@pytest.fixture(scope="module")
def small_models(small):
    corpus, _ = small
    params = TrainParams(mixtures=2, codebook_size=8, train_seconds=4.0)
    return (train_all(corpus, "mfcc", "gmm", params, seed=1),
            train_all(corpus, "mfcc", "vq_dtw", params, seed=1))


def _write_rows(path, rows, header="language,speaker,path,role"):
    path.write_text(header + "\n" + "".join(",".join(r) + "\n" for r in rows))


# -- manifests -----------------------------------------------------------------


def _touch_corpus(root, n_lang=10, n_spk=7):
    rows = []
    for li in range(n_lang):
        for si in range(n_spk):
            name = f"l{li}_s{si}.wav"
            (root / name).write_bytes(b"")
            rows.append((f"lang{li}", f"s{si}", name))
    return rows


def test_full_manifest_with_roles(tmp_path):
    rows = [r + ("test" if r[1] == "s6" else "train",) for r in _touch_corpus(tmp_path)]
    _write_rows(tmp_path / "m.csv", rows)
    m = load_manifest(tmp_path / "m.csv")
    assert len(m) == 70
    assert len(m.languages) == 10
    assert len(m.select("train")) == 60 and len(m.select("test")) == 10


def test_default_split_without_role_column(tmp_path):
    rows = _touch_corpus(tmp_path)
    rng = np.random.default_rng(0)
    rows = [rows[i] for i in rng.permutation(len(rows))]
    _write_rows(tmp_path / "m.csv", rows, header="language,speaker,path")
    m = load_manifest(tmp_path / "m.csv")
    for lang in m.languages:
        in_order = [r[2] for r in rows if r[0] == lang]
        assert [e.path.name for e in m.select("test", lang)] == in_order[-1:]
        assert [e.path.name for e in m.select("train", lang)] == in_order[:-1]


def test_empty_role_cells_use_default(tmp_path):
    rows = _touch_corpus(tmp_path, 2, 3)
    _write_rows(tmp_path / "m.csv", [r + ("",) for r in rows])
    m = load_manifest(tmp_path / "m.csv")
    assert [e.speaker for e in m.select("test")] == ["s2", "s2"]


def test_duplicate_path(tmp_path):
    rows = _touch_corpus(tmp_path, 2, 2)
    rows.append(rows[0])
    _write_rows(tmp_path / "m.csv", [r + ("train",) for r in rows[:-1]] + [rows[-1] + ("test",)],)
    with pytest.raises(BadManifest):
        load_manifest(tmp_path / "m.csv")


def test_manifest_errors(tmp_path):
    rows = _touch_corpus(tmp_path, 2, 2)
    _write_rows(tmp_path / "cols.csv", [r[:2] for r in rows], header="language,speaker")
    with pytest.raises(BadManifest):
        load_manifest(tmp_path / "cols.csv")
    _write_rows(tmp_path / "role.csv", [r + ("dev",) for r in rows])
    with pytest.raises(BadManifest):
        load_manifest(tmp_path / "role.csv")
    _write_rows(tmp_path / "missing.csv", [("a", "s0", "nope.wav", "train")] + [r + ("",) for r in rows])
    with pytest.raises(MissingFile):
        load_manifest(tmp_path / "missing.csv")
    _write_rows(tmp_path / "onlytrain.csv", [r + ("train",) for r in rows])
    with pytest.raises(BadManifest):
        load_manifest(tmp_path / "onlytrain.csv")


# -- segmentation ----------------------------------------------------------------


@pytest.mark.parametrize("total, seg, count", [(35, 10, 3), (35, 2, 17), (10, 10, 1), (60, 4, 15)])
def test_segment_counts(total, seg, count):
    w = Waveform(np.arange(total * 1000, dtype=np.float64), 1000)
    segs = segment_test(w, seg)
    assert len(segs) == count
    assert all(len(s) == seg * 1000 for s in segs)
    np.testing.assert_array_equal(np.concatenate([s.samples for s in segs]), w.samples[: count * seg * 1000])


def test_segment_too_short():
    with pytest.raises(TooShort):
        segment_test(Waveform(np.zeros(24000), 16000), 2.0)


# -- synthetic corpus --------------------------------------------------------------


def _digest(root):
    return {p.name: hashlib.sha256(p.read_bytes()).hexdigest() for p in sorted(root.glob("*.wav"))}


def test_synth_is_deterministic(tmp_path):
    synth_corpus(tmp_path / "a", n_languages=4, n_speakers=2, utterance_seconds=2.0, seed=42)
    synth_corpus(tmp_path / "b", n_languages=4, n_speakers=2, utterance_seconds=2.0, seed=42)
    synth_corpus(tmp_path / "c", n_languages=4, n_speakers=2, utterance_seconds=2.0, seed=43)
    a, b, c = _digest(tmp_path / "a"), _digest(tmp_path / "b"), _digest(tmp_path / "c")
    assert len(a) == 8 and a == b
    assert a != c
    assert (tmp_path / "a" / "manifest.csv").read_bytes() == (tmp_path / "b" / "manifest.csv").read_bytes()


def test_synth_files_are_16k_16bit(small):
    corpus, root = small
    w = read_wav(corpus.entries[0].path)
    assert w.sample_rate == 16000
    with open(corpus.entries[0].path, "rb") as fh:
        assert int.from_bytes(fh.read(36)[34:36], "little") == 16
    assert load_manifest(root / "manifest.csv").languages == corpus.languages


def _lp_from_wave(x, p=12):
    """Long-term LP fit from the biased autocorrelation (scipy Toeplitz solve)."""
    x = x - x.mean()
    r = np.array([x[: len(x) - k] @ x[k:] for k in range(p + 1)]) / len(x)
    a = solve_toeplitz(r[:p], r[1:])
    return np.concatenate([[1.0], -a]), r


def _itakura(ref, test):
    a_ref, r_ref = ref
    a_test, _ = test
    from scipy.linalg import toeplitz
    R = toeplitz(r_ref)
    return float(np.log((a_test @ R @ a_test) / (a_ref @ R @ a_ref)))


def test_languages_differ_more_than_speakers(tmp_path):
    corpus = synth_corpus(tmp_path, n_languages=4, n_speakers=3, utterance_seconds=6.0, seed=42)
    fits = {(e.language, e.speaker): _lp_from_wave(read_wav(e.path).samples) for e in corpus.entries}
    within, between = [], []
    for (l1, s1), f1 in fits.items():
        for (l2, s2), f2 in fits.items():
            if (l1, s1) == (l2, s2):
                continue
            d = _itakura(f1, f2) + _itakura(f2, f1)
            (within if l1 == l2 else between).append(d)
    assert min(within + between) >= -1e-12
    assert np.mean(between) > np.mean(within)


# -- training and persistence -------------------------------------------------------


def test_train_all_shapes(small, small_models):
    corpus, _ = small
    gmm, vq = small_models
    assert gmm.languages == corpus.languages and vq.languages == corpus.languages
    assert gmm.size == 2 and vq.size == 8
    assert all(m.means.shape == (2, 13) for m in gmm.models.values())
    assert all(cb.centroids.shape == (8, 13) for cb in vq.models.values())
    assert gmm.meta["seed"] == "1" and vq.meta["codebook_size"] == "8"


def test_train_all_bit_identical_files(small, small_models, tmp_path):
    corpus, _ = small
    again = train_all(corpus, "mfcc", "gmm", TrainParams(mixtures=2, train_seconds=4.0), seed=1)
    save_model_set(small_models[0], tmp_path / "a.lidkit")
    save_model_set(again, tmp_path / "b.lidkit")
    assert (tmp_path / "a.lidkit").read_bytes() == (tmp_path / "b.lidkit").read_bytes()


def test_train_all_rejects_unknowns(small):
    corpus, _ = small
    with pytest.raises(ValueError):
        train_all(corpus, "lpcc", "gmm")
    with pytest.raises(ValueError):
        train_all(corpus, "mfcc", "hmm")


@pytest.mark.parametrize("which", [0, 1])
def test_model_round_trip(small, small_models, tmp_path, which):
    ms = small_models[which]
    path = tmp_path / "m.lidkit"
    save_model_set(ms, path)
    back = load_model_set(path)
    assert (back.backend, back.feature_kind, back.meta, back.train_files) == \
        (ms.backend, ms.feature_kind, ms.meta, ms.train_files)
    for lang, m in ms.models.items():
        for name in ("weights", "means", "variances", "centroids"):
            if hasattr(m, name):
                np.testing.assert_array_equal(getattr(back.models[lang], name), getattr(m, name))
    assert dumps(back) == dumps(ms)


def test_round_trip_keeps_decisions(small, small_models):
    corpus, _ = small
    ms = small_models[0]
    back = loads(dumps(ms))
    cfg = FeatureConfig()
    for e in corpus.select("test"):
        for seg in segment_test(read_wav(e.path), 2.0):
            f = extract("mfcc", seg, cfg).vectors
            assert classify_gmm(f, ms.models) == classify_gmm(f, back.models)


def test_bad_magic(small_models):
    text = dumps(small_models[0])
    with pytest.raises(BadModelFile, match="magic"):
        loads("LIDKIT/0" + text[len("LIDKIT/1"):])


def test_truncated_file_names_section(small_models):
    text = dumps(small_models[0])
    cut = text.index("[language L01]") + 40
    with pytest.raises(BadModelFile, match=r"\[language L01\]"):
        loads(text[:cut])


def test_checksum_mismatch(small_models):
    text = dumps(small_models[0])
    i = text.index("weights")
    with pytest.raises(BadModelFile, match="checksum"):
        loads(text[:i] + "W" + text[i + 1:])


def test_file_layout(small_models):
    lines = dumps(small_models[1]).rstrip("\n").split("\n")
    assert lines[0] == "LIDKIT/1 vq_dtw mfcc"
    assert lines[1] == "[meta]"
    assert lines[-1].startswith("checksum=")


# -- evaluation ------------------------------------------------------------------------


def test_perfect_classifier_report():
    langs = ["a", "b", "c"]
    report = EvalReport(langs)
    report.add_trials(Trial("gmm", "mfcc", 8, s, f"{l}.wav", i, l, (l,) + tuple(x for x in langs if x != l))
                      for s in (2.0, 10.0) for l in langs for i in range(3 if s == 2.0 else 1))
    for s in (2.0, 10.0):
        cell = report.cells[("gmm", "mfcc", 8, s)]
        assert cell.rate == 100.0
        assert np.count_nonzero(cell.confusion - np.diag(np.diag(cell.confusion))) == 0
        assert report.recomputed_rate("gmm", "mfcc", 8, s) == 100.0
    assert report.cells[("gmm", "mfcc", 8, 2.0)].confusion.sum(1).tolist() == [3, 3, 3]


def test_evaluate_consistency(small, small_models, tmp_path):
    corpus, _ = small
    report = evaluate(corpus, list(small_models), segment_lengths=(2, 4))
    assert set(report.cells) == {("gmm", "mfcc", 2, 2.0), ("gmm", "mfcc", 2, 4.0), ("vq_dtw", "mfcc", 8, None)}
    n_test = len(corpus.select("test"))
    expected_rows = {2.0: 3, 4.0: 1, None: 1}
    for key, cell in report.cells.items():
        assert cell.confusion.sum(1).tolist() == [expected_rows[key[3]]] * n_test
        assert cell.rate == report.recomputed_rate(*key)
        assert cell.rate == pytest.approx(100 * np.trace(cell.confusion) / cell.confusion.sum())
    written = report.write(tmp_path)
    assert sorted(p.name for p in written) == ["confusion.csv", "decisions.csv", "grid_gmm.csv", "grid_vq_dtw.csv"]
    header = next(csv.reader(open(tmp_path / "grid_gmm.csv")))
    assert header == ["feature", "2s_M2", "2s_avg", "4s_M2", "4s_avg"]
    decisions = list(csv.DictReader(open(tmp_path / "decisions.csv")))
    assert len(decisions) == len(report.trials)


def test_train_test_disjoint(small, small_models):
    corpus, _ = small
    test_paths = {str(e.path) for e in corpus.select("test")}
    for ms in small_models:
        assert not set(ms.train_files) & test_paths
    leaky = ModelSet("mfcc", "gmm", small_models[0].models, {}, tuple(sorted(test_paths)))
    with pytest.raises(ValueError, match="training"):
        evaluate(corpus, [leaky], (2,))
