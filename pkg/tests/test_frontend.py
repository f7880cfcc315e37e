import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from lidkit import frontend as fe
from lidkit.errors import BadFftSize, DegenerateBank, ShapeMismatch


def test_preemphasis_examples():
    np.testing.assert_array_equal(fe.preemphasize([0, 0, 0]), [0, 0, 0])
    np.testing.assert_allclose(fe.preemphasize([1, 0, 0], 0.98), [1, -0.98, 0], atol=1e-15)
    np.testing.assert_allclose(fe.preemphasize([1, 1, 1], 0.98), [1, 0.02, 0.02], atol=1e-15)


def test_preemphasis_rejects_bad_alpha():
    with pytest.raises(ValueError):
        fe.preemphasize([1.0], 1.0)


@pytest.mark.parametrize("n,frames", [(400, 1), (640, 2), (399, 0), (16000, 66)])
def test_frame_counts(n, frames):
    fs = fe.frame_signal(np.arange(n, dtype=float), 16000)
    assert fs.n_frames == frames
    assert fs.frames.shape == (frames, 400)
    assert fs.hop == 240


def test_frames_start_at_multiples_of_hop():
    x = np.arange(5000, dtype=float)
    fs = fe.frame_signal(x, 16000)
    np.testing.assert_array_equal(fs.frames[:, 0], fs.starts())
    assert np.all(np.diff(fs.starts()) == 240)
    # overlap of consecutive frames is 10 ms
    np.testing.assert_array_equal(fs.frames[0, 240:], fs.frames[1, :160])


def test_hamming():
    w = fe.apply_hamming(np.ones(401))
    np.testing.assert_allclose(w, fe.hamming(401))
    assert abs(w[0] - 0.08) < 1e-12 and abs(w[-1] - 0.08) < 1e-12
    assert abs(w[200] - 1.0) < 1e-12


def test_power_spectrum_impulse_and_constant():
    imp = np.zeros(512)
    imp[0] = 1
    np.testing.assert_allclose(fe.power_spectrum(imp, 512).bins, np.ones(257))
    ones = fe.power_spectrum(np.ones(512), 512).bins
    assert ones[0] == pytest.approx(512.0**2)
    assert np.max(np.abs(ones[1:])) < 1e-6


@pytest.mark.parametrize("nfft", [300, 256])
def test_bad_fft_size(nfft):
    with pytest.raises(BadFftSize):
        fe.power_spectrum(np.ones(400), nfft)


def full_spectrum_energy(bins, nfft):
    return bins[0] + bins[nfft // 2] + 2 * bins[1:nfft // 2].sum()


@given(arrays(np.float64, st.integers(2, 512), elements=st.floats(-10, 10)))
def test_parseval(x):
    spec = fe.power_spectrum(x, 512)
    assert np.all(spec.bins >= 0)
    lhs = full_spectrum_energy(spec.bins, 512)
    rhs = 512 * np.sum(x * x)
    assert lhs == pytest.approx(rhs, rel=1e-6, abs=1e-9)


def test_mel_points():
    assert fe.hz_to_mel(0) == 0
    assert abs(fe.hz_to_mel(700) - 2595 * np.log10(2)) < 1e-9
    assert fe.hz_to_mel(8000) == pytest.approx(2840.0, abs=0.05)


@given(st.floats(0, 1e5))
def test_mel_inverse(f):
    assert fe.mel_to_hz(fe.hz_to_mel(f)) == pytest.approx(f, rel=1e-9, abs=1e-9)


def test_bark_points():
    assert fe.bark_warp(0) == 0
    assert abs(fe.bark_warp(600) - 6 * np.log(1 + np.sqrt(2))) < 1e-9
    assert fe.bark_warp(8000) == pytest.approx(19.70, abs=0.01)


def test_bark_matches_schroeder_form():
    f = np.array([10.0, 333.0, 1000.0, 4000.0])
    om = 2 * np.pi * f
    direct = 6 * np.log(om / (1200 * np.pi) + np.sqrt((om / (1200 * np.pi)) ** 2 + 1))
    np.testing.assert_allclose(fe.bark_warp(f), direct, rtol=1e-12)


@given(st.floats(0, 2e4), st.floats(0, 2e4))
def test_warps_monotonic(f1, f2):
    lo, hi = sorted((f1, f2))
    if hi - lo <= 1e-9 * max(1.0, hi):
        return
    assert fe.hz_to_mel(lo) < fe.hz_to_mel(hi)
    assert fe.bark_warp(lo) < fe.bark_warp(hi)


def test_mel_bank_structure():
    fb = fe.build_mel_filterbank(512, 16000, 24, 0, 8000)
    assert fb.weights.shape == (24, 257)
    assert np.all(fb.weights >= 0)
    assert np.all(fb.weights.sum(1) > 0)
    freqs = np.arange(257) * 16000 / 512
    inside = (freqs > 0) & (freqs < 8000)
    assert np.all(fb.weights[:, inside].sum(0) > 0)
    spacing = np.diff(fe.hz_to_mel(fb.center_freqs))
    np.testing.assert_allclose(spacing, spacing[0], atol=1e-6)
    assert np.max(fb.weights) <= 1.0


def test_mel_bank_edges():
    fb = fe.build_mel_filterbank(512, 16000, 24, 0, 8000)
    step = fe.hz_to_mel(8000) / 25  # 26 edges, 25 intervals
    # first edge 0 Hz, last edge 8000 Hz
    assert fe.mel_to_hz(step * 0) == 0 and fe.mel_to_hz(step * 25) == pytest.approx(8000)
    assert fb.center_freqs[0] == pytest.approx(fe.mel_to_hz(step))
    assert fb.center_freqs[1] == pytest.approx(fe.mel_to_hz(2 * step))
    assert fb.center_freqs[1] == pytest.approx(156.35, abs=0.01)


def test_mel_bank_degenerate():
    with pytest.raises(DegenerateBank):
        fe.build_mel_filterbank(64, 16000, 40)


def test_critical_band_curve_points():
    assert fe.critical_band_curve(0.0) == 1.0
    assert fe.critical_band_curve(-0.5) == 1.0
    assert fe.critical_band_curve(1.5) == pytest.approx(0.1)
    assert fe.critical_band_curve(-1.3) == pytest.approx(10 ** (2.5 * -0.8))
    assert fe.critical_band_curve(-2.0) == 0 and fe.critical_band_curve(3.0) == 0


def test_bark_bank_structure():
    fb = fe.build_bark_filterbank(512, 16000)
    assert fb.n_filters == 19
    np.testing.assert_allclose(fe.bark_warp(fb.center_freqs), 0.5 + np.arange(19), atol=1e-9)
    assert np.all(fb.weights.sum(1) > 0)
    assert fb.kind == "bark"


def test_apply_filterbank_linearity():
    fb = fe.build_mel_filterbank(512, 16000)
    zero = fe.PowerSpectrum(np.zeros(257), 512, 16000)
    np.testing.assert_array_equal(fe.apply_filterbank(zero, fb), np.zeros(24))
    ones = fe.PowerSpectrum(np.ones(257), 512, 16000)
    np.testing.assert_allclose(fe.apply_filterbank(ones, fb), fb.weights.sum(1))
    for k0 in (3, 100, 255):
        probe = np.zeros(257)
        probe[k0] = 1
        np.testing.assert_array_equal(
            fe.apply_filterbank(fe.PowerSpectrum(probe, 512, 16000), fb), fb.weights[:, k0])


def test_apply_filterbank_shape_mismatch():
    fb = fe.build_mel_filterbank(512, 16000)
    with pytest.raises(ShapeMismatch):
        fe.apply_filterbank(fe.PowerSpectrum(np.ones(129), 256, 16000), fb)


def test_equal_loudness():
    assert fe.equal_loudness_weights([0.0])[0] == 0
    e200, e1000 = fe.equal_loudness_weights([200.0, 1000.0])
    assert e1000 / e200 > 1
    assert np.all(fe.equal_loudness_weights(np.linspace(1, 8000, 500)) > 0)


def test_cube_root():
    np.testing.assert_allclose(fe.intensity_to_loudness([0, 1, 8]), [0, 1, 2])
