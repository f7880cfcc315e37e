"""WAV input/output, resampling and amplitude conditioning."""

from __future__ import annotations

import struct
import wave
from dataclasses import dataclass
from math import gcd
from pathlib import Path

import numpy as np
from scipy import signal

from .errors import EmptySignal, MalformedWav, UnsupportedEncoding

CANONICAL_RATE = 16000

_FORMAT_PCM = 0x0001
_FORMAT_FLOAT = 0x0003
_FORMAT_EXTENSIBLE = 0xFFFE

# Resampler: Kaiser-windowed sinc, 64 taps per polyphase branch.
_TAPS_PER_PHASE = 64
_KAISER_BETA = 8.6
_CUTOFF_FRACTION = 0.9


@dataclass(frozen=True)
class Waveform:
    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        if int(self.sample_rate) <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")
        object.__setattr__(self, "samples", np.asarray(self.samples, dtype=np.float64))
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate

    def __len__(self):
        return len(self.samples)


def _decode_pcm(data: bytes, bits: int, n_channels: int) -> np.ndarray:
    width = bits // 8
    if bits == 8:
        x = (np.frombuffer(data, dtype=np.uint8).astype(np.float64) - 128.0) / 128.0
    elif bits == 16:
        x = np.frombuffer(data, dtype="<i2").astype(np.float64) / 32768.0
    elif bits == 24:
        raw = np.frombuffer(data, dtype=np.uint8).reshape(-1, 3).astype(np.int32)
        v = raw[:, 0] | (raw[:, 1] << 8) | (raw[:, 2] << 16)
        v = np.where(v >= 1 << 23, v - (1 << 24), v)
        x = v.astype(np.float64) / float(1 << 23)
    elif bits == 32:
        x = np.frombuffer(data, dtype="<i4").astype(np.float64) / float(1 << 31)
    else:
        raise UnsupportedEncoding(f"unsupported PCM bit depth {bits}")
    n = len(data) // (width * n_channels)
    return x[: n * n_channels].reshape(n, n_channels)


def read_wav(path) -> Waveform:
    """Read a RIFF/WAVE file into a mono float waveform.

    Integer samples are divided by the full-scale value of their type
    (2**(bits-1)); multichannel audio is averaged to mono.
    """
    blob = Path(path).read_bytes()
    if len(blob) < 12 or blob[:4] != b"RIFF" or blob[8:12] != b"WAVE":
        raise MalformedWav(f"{path}: not a RIFF/WAVE file")

    fmt = None
    data = None
    pos = 12
    while pos + 8 <= len(blob):
        cid, size = struct.unpack("<4sI", blob[pos : pos + 8])
        body = blob[pos + 8 : pos + 8 + size]
        if len(body) < size:
            raise MalformedWav(f"{path}: chunk {cid!r} declares {size} bytes, only {len(body)} present")
        if cid == b"fmt ":
            if size < 16:
                raise MalformedWav(f"{path}: fmt chunk too short")
            fmt = body
        elif cid == b"data":
            data = body
        pos += 8 + size + (size & 1)

    if fmt is None or data is None:
        raise MalformedWav(f"{path}: missing fmt or data chunk")

    tag, n_channels, rate, _, block_align, bits = struct.unpack("<HHIIHH", fmt[:16])
    if tag == _FORMAT_EXTENSIBLE:
        if len(fmt) < 40:
            raise MalformedWav(f"{path}: truncated WAVE_FORMAT_EXTENSIBLE header")
        tag = struct.unpack("<H", fmt[24:26])[0]
    if n_channels < 1 or rate < 1 or bits == 0:
        raise MalformedWav(f"{path}: invalid fmt fields")
    if block_align != n_channels * (bits // 8):
        raise MalformedWav(f"{path}: block_align inconsistent with channels/bits")
    if len(data) % block_align:
        raise MalformedWav(f"{path}: data length is not a whole number of frames")

    if tag == _FORMAT_PCM:
        frames = _decode_pcm(data, bits, n_channels)
    elif tag == _FORMAT_FLOAT and bits == 32:
        frames = np.frombuffer(data, dtype="<f4").astype(np.float64).reshape(-1, n_channels)
    else:
        raise UnsupportedEncoding(f"{path}: format tag {tag:#06x} with {bits} bits is not supported")

    return Waveform(frames.mean(axis=1), rate)


def write_wav(path, w: Waveform) -> None:
    """Write 16-bit mono PCM; samples are scaled by 32768 and clipped."""
    q = np.clip(np.round(w.samples * 32768.0), -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as fh:
        fh.setnchannels(1)
        fh.setsampwidth(2)
        fh.setframerate(w.sample_rate)
        fh.writeframes(q.tobytes())


def _design_lowpass(up: int, down: int) -> np.ndarray:
    n_taps = _TAPS_PER_PHASE * up + 1
    cutoff = _CUTOFF_FRACTION / max(up, down)  # fraction of the upsampled Nyquist
    h = signal.firwin(n_taps, cutoff, window=("kaiser", _KAISER_BETA))
    return h * up


def resample(w: Waveform, target_hz: int) -> Waveform:
    if target_hz <= 0:
        raise ValueError(f"target_hz must be positive, got {target_hz}")
    target_hz = int(target_hz)
    if target_hz == w.sample_rate:
        return Waveform(w.samples.copy(), target_hz)
    g = gcd(w.sample_rate, target_hz)
    up, down = target_hz // g, w.sample_rate // g
    if len(w.samples) == 0:
        return Waveform(np.zeros(0), target_hz)
    y = signal.resample_poly(w.samples, up, down, window=_design_lowpass(up, down))
    return Waveform(y, target_hz)


def preprocess(w: Waveform) -> Waveform:
    """Remove the DC mean, then scale so the largest magnitude is 1."""
    if len(w.samples) == 0:
        raise EmptySignal("cannot preprocess an empty waveform")
    x = w.samples - w.samples.mean()
    peak = np.max(np.abs(x))
    # residue of a pure-DC signal is rounding noise, not signal
    if peak <= 1e-12 * np.max(np.abs(w.samples)):
        return Waveform(np.zeros_like(x), w.sample_rate)
    x = x / peak
    return Waveform(x, w.sample_rate)


def load_canonical(path, rate: int = CANONICAL_RATE) -> Waveform:
    """read_wav -> resample to ``rate`` -> preprocess."""
    return preprocess(resample(read_wav(path), rate))
