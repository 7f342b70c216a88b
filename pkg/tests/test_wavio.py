import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from geneq.dsp import Signal
from geneq.errors import AudioIOError
from geneq.wavio import read_wav, write_wav


@settings(max_examples=15)
@given(st.sampled_from(["pcm16", "pcm24", "float32"]), st.integers(0, 2**31))
def test_round_trip(tmp_path_factory, subtype, seed):
    path = tmp_path_factory.mktemp("wav") / "a.wav"
    x = np.random.default_rng(seed).uniform(-0.9, 0.9, 1000)
    write_wav(path, Signal(x, 22050), subtype)
    y = read_wav(path)
    tol = {"pcm16": 1 / 32768, "pcm24": 1 / 8388608, "float32": 1e-7}[subtype]
    assert y.sample_rate == 22050 and len(y) == 1000
    assert np.max(np.abs(y.samples - x)) <= tol


def test_clipping_pcm(tmp_path):
    write_wav(tmp_path / "c.wav", Signal(np.array([2.0, -2.0, 0.0]), 8000), "pcm16")
    y = read_wav(tmp_path / "c.wav").samples
    assert y[0] == pytest.approx(32767 / 32768) and y[1] == -1.0


def test_stereo_mixdown(tmp_path):
    from scipy.io import wavfile

    data = np.stack([np.full(100, 0.5), np.full(100, -0.1)], axis=1).astype(np.float32)
    wavfile.write(str(tmp_path / "s.wav"), 8000, data)
    with pytest.warns(UserWarning):
        y = read_wav(tmp_path / "s.wav")
    np.testing.assert_allclose(y.samples, 0.2, atol=1e-7)


def test_unreadable(tmp_path):
    (tmp_path / "junk.wav").write_bytes(b"not a wav at all")
    with pytest.raises(AudioIOError):
        read_wav(tmp_path / "junk.wav")
    with pytest.raises(OSError):
        read_wav(tmp_path / "missing.wav")


def test_unknown_subtype(tmp_path):
    with pytest.raises(ValueError):
        write_wav(tmp_path / "x.wav", Signal(np.zeros(4), 8000), "pcm8")
