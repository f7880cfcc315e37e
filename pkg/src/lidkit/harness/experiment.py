"""Training and evaluation over a corpus manifest."""

from __future__ import annotations

import csv
import io
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .. import __version__
from ..audio_io import load_canonical
from ..features import FEATURE_KINDS, FeatureConfig, extract
from ..gmm import EMOptions, classify_gmm, em_fit
from ..vq_dtw import DEFAULT_CODEBOOK_SIZE, classify_vq_dtw, lbg_train
from .corpus import CorpusManifest, segment_test
from .persist import BACKENDS, ModelSet

DEFAULT_MIXTURES = (2, 4, 8, 16)
DEFAULT_SEGMENTS = (2.0, 4.0, 10.0)
GMM_TRAIN_SECONDS = 30.0


@dataclass(frozen=True)
class TrainParams:
    mixtures: int = 8
    codebook_size: int = DEFAULT_CODEBOOK_SIZE
    train_seconds: float = GMM_TRAIN_SECONDS  # gmm only; vq_dtw uses whole utterances
    max_iters: int = 100
    tol: float = 1e-5
    var_floor: float = 1e-4


def pmap(fn, items, workers: int = 1) -> list:
    """Order-preserving map; ``workers > 1`` fans out to processes."""
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items, chunksize=1))


# picklable work units -------------------------------------------------------


def _features_job(job):
    path, kind, max_seconds, rate = job
    w = load_canonical(path, rate)
    if max_seconds is not None:
        w = type(w)(w.samples[: int(round(max_seconds * rate))], rate)
    return extract(kind, w, FeatureConfig(sample_rate=rate)).vectors


def _segment_features_job(job):
    path, kind, seconds, rate = job
    w = load_canonical(path, rate)
    cfg = FeatureConfig(sample_rate=rate)
    return [extract(kind, seg, cfg).vectors for seg in segment_test(w, seconds)]


def _train_job(job):
    backend, lang, frames, params, seed = job
    if backend == "gmm":
        opts = EMOptions(params.max_iters, params.tol, seed, params.var_floor)
        return em_fit(frames, params.mixtures, opts, language=lang)
    return lbg_train(frames, params.codebook_size)


def _classify_job(job):
    backend, frames, models, size = job
    if backend == "gmm":
        return classify_gmm(frames, models)
    return classify_vq_dtw(frames, models, size)


def training_features(corpus: CorpusManifest, feature_kind: str, workers: int = 1) -> dict:
    """language -> list of whole-utterance feature arrays, in manifest order."""
    entries = corpus.select("train")
    jobs = [(str(e.path), feature_kind, None, corpus.sample_rate) for e in entries]
    out = {lang: [] for lang in corpus.languages}
    for e, feats in zip(entries, pmap(_features_job, jobs, workers)):
        out[e.language].append(feats)
    return out


def _prefix_frames(feats: np.ndarray, seconds: float, rate: int) -> np.ndarray:
    """Frames lying wholly inside the first ``seconds`` of the utterance.

    Pre-emphasis and framing are causal, so these rows equal the features of
    the truncated waveform.
    """
    cfg = FeatureConfig(sample_rate=rate)
    n = int(round(seconds * rate))
    keep = 0 if n < cfg.frame_len else (n - cfg.frame_len) // cfg.hop + 1
    return feats[:keep]


def train_all(corpus: CorpusManifest, feature_kind: str, backend: str,
              params: TrainParams = TrainParams(), seed: int = 0, workers: int = 1,
              features: dict | None = None) -> ModelSet:
    """One model per language from its pooled training frames.

    ``features`` may carry the output of :func:`training_features` so several
    model orders can share one extraction pass.
    """
    if feature_kind not in FEATURE_KINDS:
        raise ValueError(f"unknown feature kind {feature_kind!r}")
    if backend not in BACKENDS:
        raise ValueError(f"unknown backend {backend!r}")
    if features is None:
        features = training_features(corpus, feature_kind, workers)
    langs = corpus.languages
    if backend == "gmm":
        pooled = {lang: np.concatenate([_prefix_frames(f, params.train_seconds, corpus.sample_rate)
                                        for f in features[lang]]) for lang in langs}
    else:
        pooled = {lang: np.concatenate(features[lang]) for lang in langs}
    jobs = [(backend, lang, pooled[lang], params, seed) for lang in langs]
    models = dict(zip(langs, pmap(_train_job, jobs, workers)))

    meta = {"toolkit_version": __version__, "seed": str(seed), "sample_rate": str(corpus.sample_rate)}
    if backend == "gmm":
        meta.update({k: str(v) for k, v in asdict(params).items() if k != "codebook_size"})
    else:
        meta["codebook_size"] = str(params.codebook_size)
    train_files = tuple(str(e.path) for e in corpus.select("train"))
    return ModelSet(feature_kind, backend, models, meta, train_files)


# evaluation -----------------------------------------------------------------


@dataclass(frozen=True)
class Trial:
    backend: str
    feature_kind: str
    size: int
    seconds: float | None  # None: whole utterance
    path: str
    segment: int
    true_language: str
    ranking: tuple

    @property
    def predicted(self) -> str:
        return self.ranking[0]


@dataclass
class Cell:
    backend: str
    feature_kind: str
    size: int
    seconds: float | None
    languages: list
    confusion: np.ndarray  # rows: true language, columns: predicted

    @property
    def total(self) -> int:
        return int(self.confusion.sum())

    @property
    def correct(self) -> int:
        return int(np.trace(self.confusion))

    @property
    def rate(self) -> float:
        return 100.0 * self.correct / self.total if self.total else 0.0


def _seconds_label(seconds) -> str:
    return "whole" if seconds is None else f"{seconds:g}s"


@dataclass
class EvalReport:
    languages: list
    trials: list = field(default_factory=list)
    cells: dict = field(default_factory=dict)  # (backend, kind, size, seconds) -> Cell

    def add_trials(self, trials) -> None:
        idx = {lang: i for i, lang in enumerate(self.languages)}
        for t in trials:
            key = (t.backend, t.feature_kind, t.size, t.seconds)
            if key not in self.cells:
                n = len(self.languages)
                self.cells[key] = Cell(*key, self.languages, np.zeros((n, n), dtype=np.int64))
            self.cells[key].confusion[idx[t.true_language], idx[t.predicted]] += 1
            self.trials.append(t)

    def rate(self, backend, kind, size, seconds) -> float:
        return self.cells[(backend, kind, size, seconds)].rate

    def recomputed_rate(self, backend, kind, size, seconds) -> float:
        """Rate rebuilt from the stored per-segment decisions."""
        sel = [t for t in self.trials
               if (t.backend, t.feature_kind, t.size, t.seconds) == (backend, kind, size, seconds)]
        return 100.0 * sum(t.predicted == t.true_language for t in sel) / len(sel)

    def axes(self, backend):
        keys = [k for k in self.cells if k[0] == backend]
        kinds = [k for k in FEATURE_KINDS if any(key[1] == k for key in keys)]
        sizes = sorted({k[2] for k in keys})
        secs = sorted({k[3] for k in keys}, key=lambda s: (s is None, s or 0.0))
        return kinds, sizes, secs

    def grid_csv(self, backend: str) -> str:
        """Rates per feature kind; columns grouped by test length, then model size, then Avg."""
        kinds, sizes, secs = self.axes(backend)
        prefix = "M" if backend == "gmm" else "K"
        out = io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        header = ["feature"]
        for s in secs:
            header += [f"{_seconds_label(s)}_{prefix}{n}" for n in sizes] + [f"{_seconds_label(s)}_avg"]
        w.writerow(header)
        for kind in kinds:
            row = [kind]
            for s in secs:
                rates = [self.cells[(backend, kind, n, s)].rate for n in sizes
                         if (backend, kind, n, s) in self.cells]
                row += [f"{self.cells[(backend, kind, n, s)].rate:.2f}"
                        if (backend, kind, n, s) in self.cells else "" for n in sizes]
                row.append(f"{np.mean(rates):.2f}" if rates else "")
            w.writerow(row)
        return out.getvalue()

    def confusion_csv(self) -> str:
        out = io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["backend", "feature", "size", "seconds", "true_language"] + self.languages)
        for key in sorted(self.cells, key=_cell_order):
            cell = self.cells[key]
            for lang, row in zip(self.languages, cell.confusion):
                w.writerow([cell.backend, cell.feature_kind, cell.size,
                            _seconds_label(cell.seconds), lang] + row.tolist())
        return out.getvalue()

    def decisions_csv(self) -> str:
        out = io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["backend", "feature", "size", "seconds", "path", "segment",
                    "true_language", "predicted", "ranking"])
        for t in self.trials:
            w.writerow([t.backend, t.feature_kind, t.size, _seconds_label(t.seconds), t.path,
                        t.segment, t.true_language, t.predicted, " ".join(t.ranking)])
        return out.getvalue()

    def summary(self) -> str:
        lines = []
        for backend in BACKENDS:
            kinds, sizes, secs = self.axes(backend)
            if not kinds:
                continue
            lines.append(f"== {backend} identification rate (%) ==")
            lines.append(self.grid_csv(backend).replace(",", "\t").rstrip())
        return "\n".join(lines)

    def write(self, out_dir) -> list:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        written = []
        for backend in BACKENDS:
            if self.axes(backend)[0]:
                p = out_dir / f"grid_{backend}.csv"
                p.write_text(self.grid_csv(backend))
                written.append(p)
        for name, text in (("confusion.csv", self.confusion_csv()), ("decisions.csv", self.decisions_csv())):
            p = out_dir / name
            p.write_text(text)
            written.append(p)
        return written


def _cell_order(key):
    backend, kind, size, seconds = key
    return (BACKENDS.index(backend), FEATURE_KINDS.index(kind), size,
            seconds is None, seconds or 0.0)


def evaluate(corpus: CorpusManifest, model_sets: list,
             segment_lengths=DEFAULT_SEGMENTS, workers: int = 1) -> EvalReport:
    """Classify every test utterance with every model set.

    GMM sets score each fixed-length segment as an independent trial;
    VQ+DTW sets score whole utterances.
    """
    report = EvalReport(corpus.languages)
    tests = corpus.select("test")
    rate = corpus.sample_rate
    for ms in model_sets:
        if set(ms.models) != set(corpus.languages):
            raise ValueError(f"model set languages {ms.languages} differ from corpus {corpus.languages}")
        leaked = set(ms.train_files) & {str(e.path) for e in tests}
        if leaked:
            raise ValueError(f"test files used in training: {sorted(leaked)}")

    seg_cache, whole_cache = {}, {}
    for ms in model_sets:
        kind = ms.feature_kind
        if ms.backend == "gmm":
            for seconds in segment_lengths:
                key = (kind, float(seconds))
                if key not in seg_cache:
                    jobs = [(str(e.path), kind, float(seconds), rate) for e in tests]
                    seg_cache[key] = pmap(_segment_features_job, jobs, workers)
                units = [(e, i, f) for e, segs in zip(tests, seg_cache[key]) for i, f in enumerate(segs)]
                rankings = pmap(_classify_job, [("gmm", f, ms.models, ms.size) for _, _, f in units], workers)
                report.add_trials(
                    Trial("gmm", kind, ms.size, float(seconds), str(e.path), i, e.language, tuple(r))
                    for (e, i, _), r in zip(units, rankings))
        else:
            if kind not in whole_cache:
                jobs = [(str(e.path), kind, None, rate) for e in tests]
                whole_cache[kind] = pmap(_features_job, jobs, workers)
            rankings = pmap(_classify_job, [("vq_dtw", f, ms.models, ms.size) for f in whole_cache[kind]],
                            workers)
            report.add_trials(Trial("vq_dtw", kind, ms.size, None, str(e.path), 0, e.language, tuple(r))
                              for e, r in zip(tests, rankings))
    return report
