"""Synthetic multi-language corpus: AR(8) "vocal tracts" driven by pulse-train + noise.

Each language owns one stable AR(8) filter (four resonances) and its own
pitch/voicing statistics. Speakers perturb the language's pole frequencies
and radii with a small seeded jitter. Utterances are strings of syllables
whose resonances wobble slightly around the speaker's filter, so short
excerpts are noisier evidence than long ones.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import signal

from ..audio_io import CANONICAL_RATE, Waveform, write_wav
from .corpus import CorpusManifest, ManifestEntry, write_manifest

AR_ORDER = 8
_FORMANT_RANGES = ((250.0, 900.0), (900.0, 2300.0), (2000.0, 3400.0), (3200.0, 5200.0))
_BANDWIDTH_RANGE = (60.0, 200.0)
_MIN_LANGUAGE_SEPARATION = 0.2  # Bark, RMS over the four resonances
_SPEAKER_FORMANT_JITTER = 0.12  # relative
_SPEAKER_BANDWIDTH_JITTER = 0.10
_SYLLABLE_FORMANT_JITTER = 0.15


@dataclass(frozen=True)
class LanguageProfile:
    formants: np.ndarray  # Hz, 4 resonances
    bandwidths: np.ndarray  # Hz
    f0_mean: float
    f0_spread: float
    voicing: float  # probability a syllable is voiced
    syllable_ms: float
    noise_level: float


def _bark(f):
    return 6.0 * np.arcsinh(np.asarray(f) / 600.0)


def draw_language(rng: np.random.Generator, existing=()) -> LanguageProfile:
    """Rejection-sample a language whose resonances differ from ``existing``."""
    while True:
        formants = np.array([rng.uniform(lo, hi) for lo, hi in _FORMANT_RANGES])
        far = all(np.sqrt(np.mean((_bark(formants) - _bark(o.formants)) ** 2)) >= _MIN_LANGUAGE_SEPARATION
                  for o in existing)
        if far:
            break
    return LanguageProfile(
        formants=formants,
        bandwidths=rng.uniform(*_BANDWIDTH_RANGE, size=4),
        f0_mean=rng.uniform(100.0, 240.0),
        f0_spread=rng.uniform(0.05, 0.15),
        voicing=rng.uniform(0.55, 0.9),
        syllable_ms=rng.uniform(120.0, 220.0),
        noise_level=rng.uniform(0.02, 0.08),
    )


def ar_polynomial(formants, bandwidths, rate: int = CANONICAL_RATE) -> np.ndarray:
    """Denominator A(z) (leading 1) with one conjugate pole pair per resonance."""
    radius = np.exp(-np.pi * np.asarray(bandwidths) / rate)
    theta = 2.0 * np.pi * np.asarray(formants) / rate
    poles = np.concatenate([radius * np.exp(1j * theta), radius * np.exp(-1j * theta)])
    return np.real(np.poly(poles))


def speaker_voice(lang: LanguageProfile, rng: np.random.Generator):
    f = lang.formants * (1.0 + _SPEAKER_FORMANT_JITTER * rng.standard_normal(4))
    b = lang.bandwidths * (1.0 + _SPEAKER_BANDWIDTH_JITTER * rng.standard_normal(4))
    f0 = lang.f0_mean * (1.0 + 0.1 * rng.standard_normal())
    return np.clip(f, 150.0, 7000.0), np.clip(b, 40.0, 400.0), max(f0, 70.0)


def synth_utterance(lang: LanguageProfile, voice, seconds: float, rng: np.random.Generator,
                    rate: int = CANONICAL_RATE) -> np.ndarray:
    formants, bandwidths, f0 = voice
    total = int(round(seconds * rate))
    out = np.zeros(total)
    pos = 0
    while pos < total:
        n = int(rate * lang.syllable_ms / 1000.0 * rng.uniform(0.6, 1.4))
        n = min(n, total - pos)
        f = formants * (1.0 + _SYLLABLE_FORMANT_JITTER * rng.standard_normal(4))
        a = ar_polynomial(np.clip(f, 150.0, 7500.0), bandwidths, rate)
        if rng.random() < lang.voicing:
            pitch = f0 * (1.0 + lang.f0_spread * rng.standard_normal())
            period = rate / max(pitch, 60.0)
            exc = np.zeros(n)
            exc[np.arange(rng.uniform(0, period), n, period).astype(int)] = 1.0
            exc += lang.noise_level * rng.standard_normal(n)
        else:
            exc = 0.3 * rng.standard_normal(n)
        seg = signal.lfilter([1.0], a, exc)
        env = np.hanning(n + 2)[1:-1] ** 0.5 if n > 2 else np.ones(n)
        seg *= env * rng.uniform(0.5, 1.0) / (np.std(seg) + 1e-12)
        out[pos:pos + n] = seg
        pos += n
    out += 1e-3 * rng.standard_normal(total)
    return 0.9 * out / np.max(np.abs(out))


def synth_corpus(out_dir, n_languages: int = 10, n_speakers: int = 7,
                 utterance_seconds: float = 60.0, seed: int = 0,
                 rate: int = CANONICAL_RATE) -> CorpusManifest:
    """Write ``n_languages * n_speakers`` WAVs plus ``manifest.csv`` into ``out_dir``.

    The last speaker of every language is marked for testing.
    """
    if n_languages < 2:
        raise ValueError("need at least two languages")
    if n_speakers < 2:
        raise ValueError("need at least two speakers (one train, one test)")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    root = np.random.SeedSequence(seed)
    lang_seq, spk_seq = root.spawn(2)
    lang_rng = np.random.default_rng(lang_seq)
    profiles = []
    for _ in range(n_languages):
        profiles.append(draw_language(lang_rng, profiles))

    width = max(2, len(str(n_languages - 1)))
    entries = []
    for li, (prof, lseq) in enumerate(zip(profiles, spk_seq.spawn(n_languages))):
        lang = f"L{li:0{width}d}"
        for si, sseq in enumerate(lseq.spawn(n_speakers)):
            rng = np.random.default_rng(sseq)
            voice = speaker_voice(prof, rng)
            x = synth_utterance(prof, voice, utterance_seconds, rng, rate)
            path = out_dir / f"{lang}_s{si}.wav"
            write_wav(path, Waveform(x, rate))
            entries.append(ManifestEntry(lang, f"s{si}", path,
                                         "test" if si == n_speakers - 1 else "train"))
    manifest = CorpusManifest(tuple(entries), rate)
    write_manifest(manifest, out_dir / "manifest.csv")
    return manifest
