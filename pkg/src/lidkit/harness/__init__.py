"""Corpus handling, training/evaluation orchestration and model persistence."""

from .corpus import CorpusManifest, ManifestEntry, load_manifest, segment_test, write_manifest
from .experiment import (DEFAULT_MIXTURES, DEFAULT_SEGMENTS, EvalReport, TrainParams, Trial,
                         evaluate, train_all, training_features)
from .persist import ModelSet, load_model_set, save_model_set
from .synth import synth_corpus

__all__ = [
    "CorpusManifest", "ManifestEntry", "load_manifest", "segment_test", "write_manifest",
    "DEFAULT_MIXTURES", "DEFAULT_SEGMENTS", "EvalReport", "TrainParams", "Trial",
    "evaluate", "train_all", "training_features",
    "ModelSet", "load_model_set", "save_model_set", "synth_corpus",
]
