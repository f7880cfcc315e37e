"""Short-time analysis shared by all feature pipelines.

Everything here is a pure function of its arguments. Functions that act on
a single frame also accept a stack of frames (leading axes are carried
through), which is how the pipelines in :mod:`lidkit.features` call them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BadFftSize, DegenerateBank, ShapeMismatch

PREEMPHASIS = 0.98


@dataclass(frozen=True)
class FrameSequence:
    frames: np.ndarray  # (n_frames, frame_len)
    frame_len: int
    hop: int

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]

    def starts(self) -> np.ndarray:
        return np.arange(self.n_frames) * self.hop


@dataclass(frozen=True)
class PowerSpectrum:
    bins: np.ndarray  # (..., nfft//2 + 1)
    nfft: int
    sample_rate: int


@dataclass(frozen=True)
class Filterbank:
    weights: np.ndarray  # (n_filters, nfft//2 + 1)
    center_freqs: np.ndarray
    kind: str
    nfft: int
    sample_rate: int

    @property
    def n_filters(self) -> int:
        return self.weights.shape[0]


def preemphasize(samples, alpha: float = PREEMPHASIS) -> np.ndarray:
    """y[0] = x[0], y[n] = x[n] - alpha * x[n-1]."""
    if not 0.0 <= alpha < 1.0:
        raise ValueError(f"alpha must lie in [0, 1), got {alpha}")
    x = np.asarray(samples, dtype=np.float64)
    y = x.copy()
    y[1:] -= alpha * x[:-1]
    return y


def frame_length(sample_rate: int, ms: float) -> int:
    return int(round(sample_rate * ms / 1000.0))


def frame_signal(samples, sample_rate: int, frame_ms: float = 25.0, hop_ms: float = 15.0) -> FrameSequence:
    if not frame_ms > hop_ms > 0:
        raise ValueError("need frame_ms > hop_ms > 0")
    x = np.asarray(samples, dtype=np.float64)
    flen = frame_length(sample_rate, frame_ms)
    hop = frame_length(sample_rate, hop_ms)
    if len(x) < flen:
        return FrameSequence(np.zeros((0, flen)), flen, hop)
    n = (len(x) - flen) // hop + 1
    idx = np.arange(flen)[None, :] + hop * np.arange(n)[:, None]
    return FrameSequence(x[idx], flen, hop)


def hamming(n: int) -> np.ndarray:
    if n < 2:
        raise ValueError("Hamming window needs at least 2 points")
    return 0.54 - 0.46 * np.cos(2.0 * np.pi * np.arange(n) / (n - 1))


def apply_hamming(frame) -> np.ndarray:
    x = np.asarray(frame, dtype=np.float64)
    return x * hamming(x.shape[-1])


def next_pow2(n: int) -> int:
    return 1 << max(0, int(n - 1).bit_length())


def power_spectrum(frame, nfft: int, sample_rate: int = 16000) -> PowerSpectrum:
    """One-sided |X[k]|^2 of the zero-padded frame, k = 0..nfft/2."""
    x = np.asarray(frame, dtype=np.float64)
    if nfft < 1 or nfft & (nfft - 1) or nfft < x.shape[-1]:
        raise BadFftSize(f"nfft={nfft} must be a power of two >= frame length {x.shape[-1]}")
    spec = np.fft.rfft(x, n=nfft, axis=-1)
    return PowerSpectrum(spec.real**2 + spec.imag**2, nfft, sample_rate)


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def bark_warp(f):
    """Schroeder's Hz -> Bark warp, written as 6*asinh(f/600)."""
    return 6.0 * np.arcsinh(np.asarray(f, dtype=np.float64) / 600.0)


def bark_to_hz(z):
    return 600.0 * np.sinh(np.asarray(z, dtype=np.float64) / 6.0)


def _bin_freqs(nfft: int, sample_rate: int) -> np.ndarray:
    return np.arange(nfft // 2 + 1) * (sample_rate / nfft)


def _check_support(weights: np.ndarray, kind: str, nfft: int):
    empty = np.flatnonzero(~(weights > 0).any(axis=1))
    if empty.size:
        raise DegenerateBank(f"{kind} filters {empty.tolist()} have no support at nfft={nfft}")


def build_mel_filterbank(nfft: int, sample_rate: int, n_filters: int = 24,
                         f_lo: float = 0.0, f_hi: float | None = None) -> Filterbank:
    """Triangular filters with edges equally spaced on the Mel axis."""
    if f_hi is None:
        f_hi = sample_rate / 2.0
    if not 0 <= f_lo < f_hi <= sample_rate / 2.0:
        raise ValueError("need 0 <= f_lo < f_hi <= sample_rate/2")
    edges = mel_to_hz(np.linspace(hz_to_mel(f_lo), hz_to_mel(f_hi), n_filters + 2))
    edges[0], edges[-1] = f_lo, f_hi
    f = _bin_freqs(nfft, sample_rate)
    lo, mid, hi = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    rising = (f - lo) / (mid - lo)
    falling = (hi - f) / (hi - mid)
    weights = np.clip(np.minimum(rising, falling), 0.0, None)
    _check_support(weights, "mel", nfft)
    return Filterbank(weights, edges[1:-1].copy(), "mel", nfft, sample_rate)


def critical_band_curve(offset):
    """Critical-band masking curve as a function of Bark offset from the band centre."""
    om = np.asarray(offset, dtype=np.float64)
    out = np.zeros_like(om)
    low = (om >= -1.3) & (om < -0.5)
    flat = (om >= -0.5) & (om <= 0.5)
    high = (om > 0.5) & (om <= 2.5)
    out[low] = 10.0 ** (2.5 * (om[low] + 0.5))
    out[flat] = 1.0
    out[high] = 10.0 ** (-(om[high] - 0.5))
    return out


def build_bark_filterbank(nfft: int, sample_rate: int) -> Filterbank:
    """Critical-band filters centred at 0.5, 1.5, ... Bark.

    The last centre is the largest one whose flat top stays below Nyquist,
    i.e. at most bark(Nyquist) - 0.5.
    """
    z_nyq = float(bark_warp(sample_rate / 2.0))
    n_filters = int(np.floor(z_nyq - 1.0)) + 1
    if n_filters < 1:
        raise DegenerateBank(f"sample rate {sample_rate} too low for a Bark filterbank")
    centers = 0.5 + np.arange(n_filters)
    z = bark_warp(_bin_freqs(nfft, sample_rate))
    weights = critical_band_curve(z[None, :] - centers[:, None])
    _check_support(weights, "bark", nfft)
    return Filterbank(weights, bark_to_hz(centers), "bark", nfft, sample_rate)


def apply_filterbank(spec: PowerSpectrum, fb: Filterbank) -> np.ndarray:
    """e[m] = sum_k weights[m, k] * bins[k] (vectorised over leading axes)."""
    if spec.bins.shape[-1] != fb.weights.shape[1] or spec.nfft != fb.nfft:
        raise ShapeMismatch(
            f"spectrum has {spec.bins.shape[-1]} bins (nfft={spec.nfft}), "
            f"filterbank expects {fb.weights.shape[1]} (nfft={fb.nfft})")
    return spec.bins @ fb.weights.T


def equal_loudness_weights(center_freqs) -> np.ndarray:
    w2 = (2.0 * np.pi * np.asarray(center_freqs, dtype=np.float64)) ** 2
    return ((w2 + 56.8e6) * w2**2) / ((w2 + 6.3e6) ** 2 * (w2 + 0.38e9))


def intensity_to_loudness(e):
    return np.cbrt(np.asarray(e, dtype=np.float64))
