import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from geneq.dsp import (
    Signal,
    Spectrogram,
    StftConfig,
    analysis_config,
    apply_zero_phase_filter,
    db_to_gain,
    full_grid,
    gain_to_db,
    istft,
    next_pow2,
    stft,
    zero_phase_filter,
)
from geneq.errors import InputSizeError, NumericError, ShapeError

SR = 22050.0
CFG = StftConfig(window_size=256)


def test_signal_rejects_non_finite():
    with pytest.raises(NumericError):
        Signal(np.array([0.0, np.nan]), SR)
    with pytest.raises(ValueError):
        Signal(np.zeros(4), 0.0)


def test_signal_is_read_only():
    s = Signal(np.zeros(8), SR)
    with pytest.raises(ValueError):
        s.samples[0] = 1.0


def test_analysis_grid_per_rate():
    assert analysis_config(44100).window_size == 4096
    assert analysis_config(22050).window_size == 2048
    assert analysis_config(44100).hop == 1024


def test_stft_zero_signal():
    spec = stft(Signal(np.zeros(1024), SR), CFG)
    assert spec.frames.shape[1] == CFG.window_size // 2 + 1
    assert np.all(spec.frames == 0)


def test_stft_short_signal_raises():
    with pytest.raises(InputSizeError):
        stft(Signal(np.zeros(100), SR), CFG)


def test_stft_matches_direct_dft_of_frames(rng):
    x = rng.standard_normal(1000)
    spec = stft(Signal(x, SR), CFG)
    w = CFG.window_array()
    for k in (0, 3, spec.n_frames - 1):
        seg = x[k * CFG.hop : k * CFG.hop + CFG.window_size] * w
        n = np.arange(CFG.window_size)
        bins = np.arange(CFG.n_bins)
        direct = np.exp(-2j * np.pi * np.outer(bins, n) / CFG.window_size) @ seg
        np.testing.assert_allclose(spec.frames[k], direct, atol=1e-9)


def test_bin_centred_sinusoid_concentrates_energy():
    k0 = 20
    n = np.arange(2048)
    x = np.cos(2 * np.pi * k0 * n / CFG.window_size)
    mag = np.abs(stft(Signal(x, SR), CFG).frames)
    assert np.all(np.argmax(mag, axis=1) == k0)
    # periodic Hann leaks only into the two neighbouring bins
    assert np.all(mag[:, k0] > 1.9 * mag[:, k0 + 1])
    assert np.max(mag[:, k0 + 2 :]) < 1e-9 * np.max(mag)


def test_round_trip_interior(rng):
    x = rng.standard_normal(4000)
    spec = stft(Signal(x, SR), CFG)
    y = istft(spec).samples
    lo, hi = CFG.window_size, spec.n_frames * CFG.hop
    err = np.linalg.norm(y[lo:hi] - x[lo:hi]) / np.linalg.norm(x[lo:hi])
    assert err < 1e-6


def test_istft_zero_and_single_grain():
    frames = np.zeros((6, CFG.n_bins), complex)
    spec = Spectrogram(frames, CFG, SR)
    assert np.all(istft(spec).samples == 0)
    frames[2] = np.fft.rfft(np.ones(CFG.window_size))
    y = istft(Spectrogram(frames, CFG, SR)).samples
    w = CFG.window_array()
    # least-squares OLA of a single frame: w * frame / sum_k w_k^2 at that offset
    off = 2 * CFG.hop
    den = np.zeros(y.size)
    for k in range(6):
        den[k * CFG.hop : k * CFG.hop + CFG.window_size] += w**2
    expected = np.zeros(y.size)
    expected[off : off + CFG.window_size] = w
    mask = den > 1e-10 * den.max()
    np.testing.assert_allclose(y[mask], (expected[mask] / den[mask]), atol=1e-9)
    assert np.all(y[:off] == 0)


def test_spectrogram_bin_count_checked():
    with pytest.raises(ShapeError):
        Spectrogram(np.zeros((3, 10), complex), CFG, SR)


def test_parseval_with_window_compensation(rng):
    x = rng.standard_normal(8192)
    spec = stft(Signal(x, SR), CFG)
    w = CFG.window_array()
    # COLA: sum_k w^2(n - kH) is constant in the interior
    frame_energy = np.sum(np.abs(np.fft.irfft(spec.frames, n=CFG.window_size, axis=1)) ** 2)
    lo, hi = CFG.window_size, spec.n_frames * CFG.hop
    den = np.zeros(x.size)
    for k in range(spec.n_frames):
        den[k * CFG.hop : k * CFG.hop + CFG.window_size] += w**2
    assert np.ptp(den[lo:hi]) < 1e-12 * den[lo]
    weighted = np.sum(den * x**2)
    assert abs(frame_energy - weighted) / weighted < 1e-6


def test_zero_phase_identity_and_uniform_gain(rng):
    x = Signal(rng.standard_normal(3000), SR)
    n_fft, freqs = full_grid(len(x), SR)
    assert n_fft == 4096
    y = apply_zero_phase_filter(x, np.zeros(freqs.size))
    np.testing.assert_allclose(y.samples, x.samples, atol=1e-12)
    z = apply_zero_phase_filter(x, np.full(freqs.size, -80.0))
    rms = lambda a: np.sqrt(np.mean(a**2))  # noqa: E731
    assert abs(rms(z.samples) / rms(x.samples) - 1e-4) < 1e-10


def test_zero_phase_bin_by_bin(rng):
    n = 4096
    x = rng.standard_normal(n)
    _, freqs = full_grid(n, SR)
    db = 6 * np.sin(freqs / 2000.0)
    y = apply_zero_phase_filter(Signal(x, SR), db).samples
    np.testing.assert_allclose(np.abs(np.fft.rfft(y)), np.abs(np.fft.rfft(x)) * db_to_gain(db), rtol=1e-9, atol=1e-9)


def test_zero_phase_symmetric_pulse():
    x = np.zeros(4096)
    x[2048] = 1.0
    x[2044:2053] += np.hanning(9)
    _, freqs = full_grid(x.size, SR)
    y = zero_phase_filter(x, db_to_gain(-20 * np.log10(1 + freqs / 1000.0)))
    # symmetric about the pulse centre on the circular grid
    mirrored = np.roll(y[::-1], 2 * 2048 + 1 - x.size)
    assert np.max(np.abs(y - mirrored)) < 1e-8 * np.max(np.abs(y))


def test_zero_phase_rejects_bad_response(rng):
    x = Signal(rng.standard_normal(100), SR)
    with pytest.raises(ShapeError):
        apply_zero_phase_filter(x, np.zeros(10))
    _, freqs = full_grid(100, SR)
    bad = np.zeros(freqs.size)
    bad[3] = np.inf
    with pytest.raises(NumericError):
        apply_zero_phase_filter(x, bad)


@given(
    arrays(float, 64, elements=st.floats(-1e3, 1e3)),
    arrays(float, 64, elements=st.floats(-1e3, 1e3)),
    st.floats(-10, 10),
    st.floats(-10, 10),
)
def test_zero_phase_linearity(x, z, a, b):
    gain = db_to_gain(np.linspace(-30, 10, 33))
    lhs = zero_phase_filter(a * x + b * z, gain)
    rhs = a * zero_phase_filter(x, gain) + b * zero_phase_filter(z, gain)
    scale = max(1.0, np.max(np.abs(lhs)), np.max(np.abs(rhs)))
    assert np.max(np.abs(lhs - rhs)) <= 1e-10 * scale


@given(st.integers(1, 10**6))
def test_next_pow2(n):
    p = next_pow2(n)
    assert p >= n and p & (p - 1) == 0 and p // 2 < n


def test_db_gain_round_trip():
    db = np.array([-80.0, -6.0, 0.0, 12.0])
    np.testing.assert_allclose(gain_to_db(db_to_gain(db)), db, atol=1e-12)
