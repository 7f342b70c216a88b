import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from geneq.benchmark import benchmark_prior, degrade, seam_jump_ratio
from geneq.blockar import BlockArConfig, block_ar_cost, block_layout, crossfade, restore_recording
from geneq.dsp import Signal, full_grid, zero_phase_filter
from geneq.errors import ConfigError
from geneq.filters import F_MIN_HZ, FilterParams, default_f_max, response_on_grid
from geneq.sampler import GuidanceConfig, InnerLoopConfig, build_schedule, restore_segment

SR = 22050
SEG = 8192
SCHEDULE = build_schedule(0.5, 4e-5, 13, 11, s_churn=10.0)
INNER = InnerLoopConfig(iterations=5)
HOP = SEG - int(round(0.1 * SEG))


def truth():
    return FilterParams((60, 400, 1000, 3000, 8000), (4, 1, -3, -2), 2, F_MIN_HZ, default_f_max(SR))


def b_cfg(**kw):
    return BlockArConfig(segment_length=SEG / SR, **kw)


@given(st.integers(1, 100000), st.integers(16, 5000), st.floats(0.01, 0.49))
def test_layout_covers_everything(n, seg, frac):
    ov = max(1, int(round(frac * seg)))
    blocks = block_layout(n, seg, ov)
    assert blocks[0][0] == 0 and blocks[-1][1] == n
    for (s0, e0), (s1, e1) in zip(blocks[:-1], blocks[1:]):
        assert e1 - s1 == seg == e0 - s0
        # consecutive blocks overlap by at least the nominal overlap and leave no gap
        assert e0 - s1 >= ov and s1 > s0


def test_layout_errors():
    with pytest.raises(ConfigError):
        block_layout(1000, 100, 100)
    with pytest.raises(ConfigError):
        block_layout(1000, 100, 0)
    with pytest.raises(ConfigError):
        BlockArConfig(1.0, overlap_fraction=0.5)


def test_crossfade_endpoints():
    a = np.zeros(9)
    b = np.ones(9)
    c = crossfade(a, b)
    np.testing.assert_allclose(c, np.arange(1, 10) / 10)
    np.testing.assert_array_equal(crossfade(b, b), b)


def test_block_cost_zero_at_optimum(rng):
    n, ov = 4096, 400
    x_hat0 = rng.normal(size=n)
    p = truth()
    _, f = full_grid(n, SR)
    y = zero_phase_filter(x_hat0, 10 ** (response_on_grid(p, f) / 20))
    y[:ov] = rng.normal(size=ov)  # observations inside the overlap are ignored
    assert block_ar_cost(y, x_hat0[:ov], x_hat0, p, SR) < 1e-20
    assert block_ar_cost(y, x_hat0[:ov] + 0.1, x_hat0, p, SR) == pytest.approx(0.01 * ov)


def _case(rng, n):
    prior = benchmark_prior(SEG, SR)
    x = Signal(np.concatenate([prior.sample(SEG, rng) for _ in range(-(-n // SEG))])[:n], SR)
    return prior, degrade(x, truth(), 1e-4, rng)


def test_single_block_matches_segment(rng):
    prior, y = _case(rng, SEG)
    a, fa = restore_recording(y, prior, SCHEDULE, GuidanceConfig(), INNER, b_cfg(), rng=np.random.default_rng(3))
    b, fb = restore_segment(y, prior, SCHEDULE, GuidanceConfig(), INNER, rng=np.random.default_rng(3))
    assert a.samples.tobytes() == b.samples.tobytes()
    assert fa == [fb]


def test_two_blocks_continuous(rng):
    prior, y = _case(rng, SEG + HOP)
    traces = []
    out, filters = restore_recording(y, prior, SCHEDULE, GuidanceConfig(), INNER, b_cfg(), rng=rng, traces=traces)
    assert len(filters) == 2 == len(traces)
    (s0, e0), (s1, _) = block_layout(len(y), SEG, b_cfg().overlap_samples(SR))
    assert seam_jump_ratio(out.samples, s1, e0 - s1) < 5.0
    assert np.all(np.isfinite(out.samples)) and len(out) == len(y)


def test_frozen_filter_is_reused(rng):
    prior, y = _case(rng, SEG + 2 * HOP)
    _, filters = restore_recording(y, prior, SCHEDULE, GuidanceConfig(), INNER,
                                   b_cfg(reestimate_filter_per_block=False), rng=rng)
    assert len(filters) == 3
    assert filters[1] == filters[0] and filters[2] == filters[0]


def test_ltas_mode_needs_reference(rng):
    prior, y = _case(rng, SEG)
    with pytest.raises(ConfigError):
        restore_recording(y, prior, SCHEDULE, GuidanceConfig(mode="ltas_init"), INNER, b_cfg(), rng=rng)
