import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from geneq.degrade import check_snr, degrade_signal, flat_filter, gramophone_filter, measured_snr_db, preset_filter
from geneq.dsp import Signal, analysis_config
from geneq.errors import ValidationError
from geneq.filters import eval_response_db
from geneq.ltas import compute_ltas

SR = 22050


def test_flat_noiseless_is_identity(rng):
    x = Signal(rng.standard_normal(SR), SR)
    y, _ = degrade_signal(x, None, math.inf, rng)
    np.testing.assert_array_equal(y.samples, x.samples)
    # the model form of "flat" is 0 dB everywhere except the outermost bins
    tone = Signal(np.sin(2 * np.pi * 1000 * np.arange(SR) / SR), SR)
    yt, _ = degrade_signal(tone, flat_filter(SR), "inf", rng)
    # leakage of the truncated tone into the cliff bins costs under 1% of full scale
    np.testing.assert_allclose(yt.samples, tone.samples, atol=1e-2)


def test_gramophone_ltas_follows_response(rng):
    x = Signal(0.1 * rng.standard_normal(20 * SR), SR)
    params = gramophone_filter(SR)
    y, _ = degrade_signal(x, params, math.inf, rng)
    cfg = analysis_config(SR)
    dev = compute_ltas(y, cfg).db() - compute_ltas(x, cfg).db()
    f = cfg.freqs(SR)
    expected = eval_response_db(params, np.maximum(f, 1.0))
    # stay a third octave clear of the band-limit cliffs, where smoothing blurs the response
    band = (f > 150 * 2 ** (1 / 3)) & (f < 4000 * 2 ** (-1 / 3))
    assert np.max(np.abs(dev[band] - expected[band])) < 1.0


@settings(max_examples=10)
@given(st.floats(0.0, 40.0), st.integers(0, 2**31))
def test_measured_snr(snr, seed):
    r = np.random.default_rng(seed)
    x = Signal(r.standard_normal(4 * SR), SR)
    y, clean = degrade_signal(x, gramophone_filter(SR), snr, r)
    assert abs(measured_snr_db(y, clean) - snr) < 0.5


@pytest.mark.parametrize("bad", [float("nan"), "-inf", "loud", None])
def test_snr_validation(bad):
    with pytest.raises(ValidationError):
        check_snr(bad)


def test_unknown_preset():
    with pytest.raises(ValidationError):
        preset_filter("tape", SR)


def test_gramophone_shape():
    p = gramophone_filter(44100)
    assert p.is_feasible()
    db = eval_response_db(p, [1000.0, 2500.0, 8000.0])
    assert db[0] == 0.0 and db[1] > 3.0 and db[2] < -20.0
