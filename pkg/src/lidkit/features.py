"""Cepstral feature pipelines (MFCC, PLP, BFCC, RPLP) and their numeric kernels."""

from __future__ import annotations

import io
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import frontend as fe
from .audio_io import Waveform
from .errors import NonPositiveGain, SingularAutocorr, TooShort

FEATURE_KINDS = ("mfcc", "plp", "bfcc", "rplp")
N_CEPS = 13


@dataclass(frozen=True)
class FeatureConfig:
    sample_rate: int = 16000
    frame_ms: float = 25.0
    hop_ms: float = 15.0
    preemphasis: float = fe.PREEMPHASIS
    n_mel: int = 24
    n_ceps: int = N_CEPS
    lp_order: int = 13
    log_floor: float = 1e-10
    nfft: int | None = None  # None: smallest power of two >= frame length

    @property
    def frame_len(self) -> int:
        return fe.frame_length(self.sample_rate, self.frame_ms)

    @property
    def hop(self) -> int:
        return fe.frame_length(self.sample_rate, self.hop_ms)

    @property
    def fft_size(self) -> int:
        return self.nfft or fe.next_pow2(self.frame_len)


@dataclass(frozen=True)
class FeatureMatrix:
    vectors: np.ndarray  # (n_frames, 13)
    kind: str
    sample_rate: int
    frame_len: int
    hop: int

    @property
    def n_frames(self) -> int:
        return self.vectors.shape[0]

    def to_csv(self, fh=None) -> str | None:
        """Write one row per frame, 17 significant digits per value."""
        out = io.StringIO() if fh is None else fh
        out.write(f"# kind={self.kind} rate={self.sample_rate} "
                  f"frame_ms={_ms(self.frame_len, self.sample_rate)} "
                  f"hop_ms={_ms(self.hop, self.sample_rate)}\n")
        for row in self.vectors:
            out.write(",".join(format(v, ".17g") for v in row) + "\n")
        return out.getvalue() if fh is None else None

    @classmethod
    def from_csv(cls, text: str) -> "FeatureMatrix":
        lines = text.splitlines()
        meta = dict(tok.split("=", 1) for tok in lines[0].lstrip("# ").split())
        rate = int(meta["rate"])
        rows = [[float(v) for v in ln.split(",")] for ln in lines[1:] if ln.strip()]
        vectors = np.array(rows, dtype=np.float64).reshape(len(rows), -1)
        return cls(vectors, meta["kind"], rate,
                   fe.frame_length(rate, float(meta["frame_ms"])),
                   fe.frame_length(rate, float(meta["hop_ms"])))


def _ms(n: int, rate: int) -> str:
    return format(1000.0 * n / rate, "g")


@dataclass(frozen=True)
class LpModel:
    coeffs: np.ndarray  # a[1..p] with A(z) = 1 - sum a_k z^-k
    gain: float
    reflection: np.ndarray

    @property
    def order(self) -> int:
        return len(self.coeffs)


# --------------------------------------------------------------------------
# kernels


def dct_ii(values, n_out: int | None = None) -> np.ndarray:
    """Orthonormal DCT-II along the last axis, truncated to ``n_out`` outputs."""
    x = np.asarray(values, dtype=np.float64)
    n = x.shape[-1]
    n_out = n if n_out is None else n_out
    if not 1 <= n_out <= n:
        raise ValueError(f"need 1 <= n_out <= {n}, got {n_out}")
    return x @ _dct_matrix(n)[:n_out].T


def idct_ii(coeffs) -> np.ndarray:
    """Inverse of the full-length orthonormal :func:`dct_ii`."""
    c = np.asarray(coeffs, dtype=np.float64)
    return c @ _dct_matrix(c.shape[-1])


@lru_cache(maxsize=16)
def _dct_matrix(n: int) -> np.ndarray:
    j = np.arange(n)[:, None]
    m = np.arange(n)[None, :]
    basis = np.cos(np.pi * j * (m + 0.5) / n) * np.sqrt(2.0 / n)
    basis[0] /= np.sqrt(2.0)
    basis.setflags(write=False)
    return basis


def auditory_to_autocorr(band_values, p: int) -> np.ndarray:
    """Autocorrelation r[0..p] of a sampled power spectrum.

    The n samples are taken to span 0..Nyquist; they are mirrored to an even
    sequence of length 2(n-1) whose inverse DFT is the autocorrelation.
    """
    s = np.asarray(band_values, dtype=np.float64)
    n = s.shape[-1]
    if not 0 <= p < n:
        raise ValueError(f"max lag p={p} must be < number of bands {n}")
    return np.fft.irfft(s, n=2 * (n - 1), axis=-1)[..., : p + 1]


def levinson_batch(r, order: int):
    """Levinson-Durbin over the last axis of ``r``.

    Returns ``(a, gain, k)`` with shapes (..., order), (...), (..., order).
    Raises SingularAutocorr when r[0] <= 0 or any |k_i| >= 1.
    """
    r = np.asarray(r, dtype=np.float64)
    if r.shape[-1] < order + 1:
        raise ValueError(f"need {order + 1} autocorrelation lags, got {r.shape[-1]}")
    lead = r.shape[:-1]
    if np.any(~(r[..., 0] > 0)):
        raise SingularAutocorr("r[0] must be positive")
    a = np.zeros(lead + (order,))
    k = np.zeros(lead + (order,))
    err = r[..., 0].copy()
    for i in range(order):
        acc = r[..., i + 1] - np.einsum("...j,...j->...", a[..., :i], r[..., i:0:-1])
        ki = acc / err
        if np.any(~(np.abs(ki) < 1.0)):
            raise SingularAutocorr(f"reflection coefficient |k_{i + 1}| >= 1")
        prev = a[..., :i].copy()
        a[..., :i] = prev - ki[..., None] * prev[..., ::-1]
        a[..., i] = ki
        k[..., i] = ki
        err = err * (1.0 - ki * ki)
    return a, err, k


def levinson_durbin(r, order: int) -> LpModel:
    a, gain, k = levinson_batch(np.asarray(r, dtype=np.float64)[: order + 1], order)
    return LpModel(a, float(gain), k)


def lpc_cepstra_batch(a, gain, n_ceps: int) -> np.ndarray:
    """Cepstral recursion vectorised over leading axes of ``a``/``gain``."""
    a = np.asarray(a, dtype=np.float64)
    gain = np.asarray(gain, dtype=np.float64)
    if np.any(~(gain > 0)):
        raise NonPositiveGain("LP gain must be positive to take its log")
    p = a.shape[-1]
    c = np.zeros(a.shape[:-1] + (n_ceps,))
    c[..., 0] = np.log(gain)
    for n in range(1, n_ceps):
        acc = a[..., n - 1].copy() if n <= p else np.zeros(a.shape[:-1])
        for kk in range(max(1, n - p), n):
            acc += (kk / n) * c[..., kk] * a[..., n - kk - 1]
        c[..., n] = acc
    return c


def lpc_to_cepstra(lp: LpModel, n_ceps: int = N_CEPS) -> np.ndarray:
    return lpc_cepstra_batch(lp.coeffs, lp.gain, n_ceps)


# --------------------------------------------------------------------------
# pipelines


@lru_cache(maxsize=8)
def _mel_bank(nfft: int, rate: int, n_filters: int) -> fe.Filterbank:
    return fe.build_mel_filterbank(nfft, rate, n_filters)


@lru_cache(maxsize=8)
def _bark_bank(nfft: int, rate: int) -> fe.Filterbank:
    return fe.build_bark_filterbank(nfft, rate)


def _spectra(w: Waveform, cfg: FeatureConfig, preemph: bool) -> fe.PowerSpectrum:
    if w.sample_rate != cfg.sample_rate:
        raise ValueError(f"waveform rate {w.sample_rate} != configured {cfg.sample_rate}")
    x = fe.preemphasize(w.samples, cfg.preemphasis) if preemph else w.samples
    frames = fe.frame_signal(x, w.sample_rate, cfg.frame_ms, cfg.hop_ms)
    if frames.n_frames == 0:
        raise TooShort(f"{len(w.samples)} samples yield no {cfg.frame_len}-sample frame")
    return fe.power_spectrum(fe.apply_hamming(frames.frames), cfg.fft_size, w.sample_rate)


def _wrap(vectors, kind: str, cfg: FeatureConfig) -> FeatureMatrix:
    return FeatureMatrix(vectors, kind, cfg.sample_rate, cfg.frame_len, cfg.hop)


def auditory_spectrum(spec: fe.PowerSpectrum, fb: fe.Filterbank) -> np.ndarray:
    """Critical-band integration, equal-loudness weighting and cube-root compression."""
    bands = fe.apply_filterbank(spec, fb)
    return fe.intensity_to_loudness(bands * fe.equal_loudness_weights(fb.center_freqs))


def dct_pipeline(w: Waveform, cfg: FeatureConfig, fb: fe.Filterbank, *,
                 perceptual: bool, preemph: bool = True) -> np.ndarray:
    """Band energies -> (optional auditory weighting) -> floored log -> DCT-II."""
    spec = _spectra(w, cfg, preemph)
    bands = auditory_spectrum(spec, fb) if perceptual else fe.apply_filterbank(spec, fb)
    return dct_ii(np.log(np.maximum(bands, cfg.log_floor)), cfg.n_ceps)


def lp_pipeline(w: Waveform, cfg: FeatureConfig, fb: fe.Filterbank, *,
                perceptual: bool, preemph: bool) -> np.ndarray:
    """Band values -> autocorrelation -> Levinson-Durbin -> LP cepstrum."""
    spec = _spectra(w, cfg, preemph)
    bands = auditory_spectrum(spec, fb) if perceptual else fe.apply_filterbank(spec, fb)
    r = auditory_to_autocorr(bands, cfg.lp_order)
    # silent frames carry no spectrum; model them as floor-level white noise
    silent = ~(r[:, 0] > cfg.log_floor * 1e-3)
    if silent.any():
        r[silent] = 0.0
        r[silent, 0] = cfg.log_floor
    a, gain, _ = levinson_batch(r, cfg.lp_order)
    return lpc_cepstra_batch(a, gain, cfg.n_ceps)


def extract_mfcc(w: Waveform, cfg: FeatureConfig = FeatureConfig()) -> FeatureMatrix:
    fb = _mel_bank(cfg.fft_size, cfg.sample_rate, cfg.n_mel)
    return _wrap(dct_pipeline(w, cfg, fb, perceptual=False), "mfcc", cfg)


def extract_plp(w: Waveform, cfg: FeatureConfig = FeatureConfig()) -> FeatureMatrix:
    # no 1 - 0.98 z^-1 filter: the equal-loudness curve takes its place
    fb = _bark_bank(cfg.fft_size, cfg.sample_rate)
    return _wrap(lp_pipeline(w, cfg, fb, perceptual=True, preemph=False), "plp", cfg)


def extract_bfcc(w: Waveform, cfg: FeatureConfig = FeatureConfig()) -> FeatureMatrix:
    fb = _bark_bank(cfg.fft_size, cfg.sample_rate)
    return _wrap(dct_pipeline(w, cfg, fb, perceptual=True), "bfcc", cfg)


def extract_rplp(w: Waveform, cfg: FeatureConfig = FeatureConfig()) -> FeatureMatrix:
    fb = _mel_bank(cfg.fft_size, cfg.sample_rate, cfg.n_mel)
    return _wrap(lp_pipeline(w, cfg, fb, perceptual=False, preemph=True), "rplp", cfg)


EXTRACTORS = {
    "mfcc": extract_mfcc,
    "plp": extract_plp,
    "bfcc": extract_bfcc,
    "rplp": extract_rplp,
}


def extract(kind: str, w: Waveform, cfg: FeatureConfig = FeatureConfig()) -> FeatureMatrix:
    try:
        fn = EXTRACTORS[kind]
    except KeyError:
        raise ValueError(f"unknown feature kind {kind!r}; expected one of {FEATURE_KINDS}") from None
    return fn(w, cfg)
