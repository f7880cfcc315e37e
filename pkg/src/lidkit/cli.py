"""Command-line entry point: ``lidkit {extract,synth,train,identify,evaluate}``.

Exit status: 0 on success, 1 on usage errors, 2 on data or model errors.
Flags override values read from ``--config FILE`` (``key = value`` lines).
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

from . import __version__
from .audio_io import CANONICAL_RATE, load_canonical
from .errors import LidError
from .features import FEATURE_KINDS, FeatureConfig, extract
from .gmm import classify_gmm, avg_log_likelihood
from .harness import (DEFAULT_MIXTURES, DEFAULT_SEGMENTS, TrainParams, evaluate, load_manifest,
                      load_model_set, save_model_set, synth_corpus, train_all, training_features)
from .harness.persist import BACKENDS
from .vq_dtw import DEFAULT_CODEBOOK_SIZE, classify_vq_dtw, dtw_distance, lbg_train

COMMANDS = ("extract", "synth", "train", "identify", "evaluate")

DEFAULTS = {
    "feat": "mfcc",
    "backend": "gmm",
    "mixtures": ",".join(str(m) for m in DEFAULT_MIXTURES),
    "codebook_size": DEFAULT_CODEBOOK_SIZE,
    "segments": ",".join(f"{s:g}" for s in DEFAULT_SEGMENTS),
    "train_seconds": 30.0,
    "seed": 0,
    "workers": 1,
    "rate": CANONICAL_RATE,
    "languages": 10,
    "speakers": 7,
    "seconds": 60.0,
}


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    feature_kinds: list = field(default_factory=list)
    backend: str = "gmm"
    mixtures: list = field(default_factory=list)
    codebook_size: int = DEFAULT_CODEBOOK_SIZE
    segments: list = field(default_factory=list)
    train_seconds: float = 30.0
    seed: int = 0
    workers: int = 1
    rate: int = CANONICAL_RATE
    languages: int = 10
    speakers: int = 7
    seconds: float = 60.0
    manifest: str | None = None
    model: str | None = None
    models: list = field(default_factory=list)
    out: str | None = None
    inputs: list = field(default_factory=list)

    def describe(self) -> str:
        return " ".join(f"{k}={_show(v)}" for k, v in asdict(self).items())


def _show(v) -> str:
    if isinstance(v, list):
        return ",".join(str(x) for x in v) or "-"
    return "-" if v is None else str(v)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}\n{self.format_usage()}")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="lidkit", description="Spoken language identification toolkit.")
    p.add_argument("--version", action="version", version=f"lidkit {__version__}")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    def common(sp):
        sp.add_argument("--config", help="key = value file; flags take precedence")
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--workers", type=int, default=None)
        sp.add_argument("--rate", type=int, default=None, help="canonical sample rate in Hz")

    sp = sub.add_parser("extract", help="WAV -> feature CSV")
    common(sp)
    sp.add_argument("--feat", default=None)
    sp.add_argument("--out", default=None, help="output CSV (default: stdout)")
    sp.add_argument("inputs", nargs=1, metavar="WAV")

    sp = sub.add_parser("synth", help="generate a synthetic corpus")
    common(sp)
    sp.add_argument("--languages", type=int, default=None)
    sp.add_argument("--speakers", type=int, default=None)
    sp.add_argument("--seconds", type=float, default=None)
    sp.add_argument("--out", default=None, required=False)

    sp = sub.add_parser("train", help="manifest -> model files")
    common(sp)
    sp.add_argument("--backend", default=None)
    sp.add_argument("--feat", default=None, help="feature kind(s), comma separated")
    sp.add_argument("--mixtures", default=None, help="comma separated mixture counts (gmm)")
    sp.add_argument("--codebook-size", type=int, default=None)
    sp.add_argument("--train-seconds", type=float, default=None)
    sp.add_argument("--manifest", default=None)
    sp.add_argument("--out", default=None)

    sp = sub.add_parser("identify", help="rank languages for WAV files")
    common(sp)
    sp.add_argument("--model", default=None)
    sp.add_argument("inputs", nargs="+", metavar="WAV")

    sp = sub.add_parser("evaluate", help="score model files on the manifest's test entries")
    common(sp)
    sp.add_argument("--manifest", default=None)
    sp.add_argument("--models", nargs="+", default=None, help="model files or directories")
    sp.add_argument("--segments", default=None, help="comma separated test lengths in seconds")
    sp.add_argument("--out", default=None)
    return p


def read_config(path) -> dict:
    out = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror}") from None
    for n, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise UsageError(f"{path}:{n}: expected 'key = value'")
        out[key.strip().replace("-", "_")] = value.strip()
    return out


def _int_list(text, what) -> list:
    try:
        vals = [int(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"bad {what} list {text!r}") from None
    if not vals or min(vals) < 1:
        raise UsageError(f"{what} must be positive integers")
    return vals


def _float_list(text, what) -> list:
    try:
        vals = [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"bad {what} list {text!r}") from None
    if not vals or min(vals) <= 0:
        raise UsageError(f"{what} must be positive")
    return vals


def resolve(args: argparse.Namespace) -> RunConfig:
    given = {k: v for k, v in vars(args).items() if v is not None and k not in ("config", "command")}
    merged = dict(DEFAULTS)
    if getattr(args, "config", None):
        merged.update(read_config(args.config))
    merged.update(given)

    def num(key, kind):
        try:
            return kind(merged[key])
        except (TypeError, ValueError):
            raise UsageError(f"{key} must be a number, got {merged[key]!r}") from None

    kinds = [k.strip() for k in str(merged["feat"]).split(",") if k.strip()]
    bad = [k for k in kinds if k not in FEATURE_KINDS]
    if bad or not kinds:
        raise UsageError(f"unknown feature kind(s) {bad}; choose from {', '.join(FEATURE_KINDS)}")
    backend = str(merged["backend"])
    if backend not in BACKENDS:
        raise UsageError(f"unknown backend {backend!r}; choose from {', '.join(BACKENDS)}")
    cfg = RunConfig(
        command=args.command,
        feature_kinds=kinds,
        backend=backend,
        mixtures=_int_list(merged["mixtures"], "mixtures"),
        codebook_size=num("codebook_size", int),
        segments=_float_list(merged["segments"], "segments"),
        train_seconds=num("train_seconds", float),
        seed=num("seed", int),
        workers=num("workers", int),
        rate=num("rate", int),
        languages=num("languages", int),
        speakers=num("speakers", int),
        seconds=num("seconds", float),
        manifest=merged.get("manifest"),
        model=merged.get("model"),
        models=list(merged["models"]) if isinstance(merged.get("models"), list)
        else str(merged.get("models", "")).split(),
        out=merged.get("out"),
        inputs=list(merged.get("inputs", [])),
    )
    if cfg.workers < 1:
        raise UsageError("workers must be >= 1")
    if cfg.codebook_size < 1 or cfg.codebook_size & (cfg.codebook_size - 1):
        raise UsageError("codebook size must be a power of two")
    need = {"synth": ["out"], "train": ["manifest", "out"], "identify": ["model"],
            "evaluate": ["manifest", "models"]}.get(cfg.command, [])
    for key in need:
        if not getattr(cfg, key):
            raise UsageError(f"{cfg.command}: --{key} is required")
    return cfg


# commands ----------------------------------------------------------------------


def cmd_extract(cfg: RunConfig) -> None:
    if len(cfg.feature_kinds) != 1:
        raise UsageError("extract takes exactly one --feat")
    w = load_canonical(_existing(cfg.inputs[0]), cfg.rate)
    fm = extract(cfg.feature_kinds[0], w, FeatureConfig(sample_rate=cfg.rate))
    text = fm.to_csv()
    if cfg.out:
        Path(cfg.out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_synth(cfg: RunConfig) -> None:
    m = synth_corpus(cfg.out, cfg.languages, cfg.speakers, cfg.seconds, cfg.seed, cfg.rate)
    print(f"wrote {len(m)} utterances and {Path(cfg.out) / 'manifest.csv'}")


def model_filename(backend: str, kind: str, size: int) -> str:
    tag = f"m{size}" if backend == "gmm" else f"k{size}"
    return f"{backend}_{kind}_{tag}.lidkit"


def cmd_train(cfg: RunConfig) -> None:
    corpus = load_manifest(cfg.manifest)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    for kind in cfg.feature_kinds:
        feats = training_features(corpus, kind, cfg.workers)
        sizes = cfg.mixtures if cfg.backend == "gmm" else [cfg.codebook_size]
        for size in sizes:
            params = TrainParams(mixtures=size if cfg.backend == "gmm" else TrainParams.mixtures,
                                 codebook_size=cfg.codebook_size, train_seconds=cfg.train_seconds)
            ms = train_all(corpus, kind, cfg.backend, params, cfg.seed, cfg.workers, features=feats)
            path = out / model_filename(cfg.backend, kind, size)
            save_model_set(ms, path)
            print(path)


def _existing(path) -> str:
    if not Path(path).is_file():
        raise LidError(f"no such file: {path}")
    return str(path)


def cmd_identify(cfg: RunConfig) -> None:
    ms = load_model_set(_existing(cfg.model))
    rate = int(ms.meta.get("sample_rate", cfg.rate))
    paths = [_existing(p) for p in cfg.inputs]
    lines = []
    for path in paths:
        feats = extract(ms.feature_kind, load_canonical(path, rate), FeatureConfig(sample_rate=rate))
        if ms.backend == "gmm":
            scores = {lang: avg_log_likelihood(m, feats) for lang, m in ms.models.items()}
            ranking = classify_gmm(feats, ms.models)
        else:
            own = lbg_train(feats, ms.size)
            scores = {lang: dtw_distance(own.centroids, cb.centroids) for lang, cb in ms.models.items()}
            ranking = classify_vq_dtw(feats, ms.models, ms.size)
        prefix = f"{path}\t" if len(paths) > 1 else ""
        lines += [f"{prefix}{i}\t{lang}\t{scores[lang]:.6f}" for i, lang in enumerate(ranking, 1)]
    print("\n".join(lines))


def _model_paths(items) -> list:
    out = []
    for item in items:
        p = Path(item)
        if p.is_dir():
            out += sorted(p.glob("*.lidkit"))
        else:
            out.append(Path(_existing(p)))
    if not out:
        raise LidError("no model files found")
    return out


def cmd_evaluate(cfg: RunConfig) -> None:
    corpus = load_manifest(cfg.manifest)
    model_sets = [load_model_set(p) for p in _model_paths(cfg.models)]
    report = evaluate(corpus, model_sets, cfg.segments, cfg.workers)
    if cfg.out:
        for p in report.write(cfg.out):
            print(f"wrote {p}", file=sys.stderr)
    print(report.summary())


HANDLERS = {"extract": cmd_extract, "synth": cmd_synth, "train": cmd_train,
            "identify": cmd_identify, "evaluate": cmd_evaluate}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not args.command:
            raise UsageError(parser.format_usage())
        cfg = resolve(args)
    except UsageError as exc:
        msg = str(exc).rstrip()
        print(msg if "usage:" in msg else f"{msg}\n{parser.format_usage().rstrip()}", file=sys.stderr)
        return 1
    print(f"# lidkit {__version__} seed={cfg.seed} {cfg.describe()}", file=sys.stderr)
    try:
        HANDLERS[cfg.command](cfg)
    except UsageError as exc:
        print(str(exc).rstrip(), file=sys.stderr)
        return 1
    except (LidError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
