"""Synthetic benchmark: Gaussian-prior signals, random filters and recovery metrics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .denoiser import GaussianPsdPrior
from .dsp import Signal, analysis_config, full_grid, zero_phase_filter
from .filters import F_MIN_HZ, FilterParams, default_f_max, eval_response_db, response_on_grid

BENCH_RATE = 22050
BENCH_SAMPLES = 32768
BENCH_RMS = 0.063
RECOVERY_FLOOR_DB = -40.0


def music_like_density(freqs, corner_hz: float = 1000.0, highpass_hz: float = 40.0) -> np.ndarray:
    """Pink-ish spectral density: ~1/f above ``corner_hz``, second-order roll-off below ``highpass_hz``."""
    f = np.asarray(freqs, dtype=float)
    hp = (f / highpass_hz) ** 2
    return hp / (1.0 + hp) / (1.0 + f / corner_hz)


def benchmark_prior(n_samples: int = BENCH_SAMPLES, sample_rate: float = BENCH_RATE, rms: float = BENCH_RMS):
    """Gaussian prior with a music-like PSD, scaled so samples have RMS ``rms``."""
    base = GaussianPsdPrior.from_density(music_like_density, n_samples, sample_rate)
    # expected variance of a sample: sum over the two-sided spectrum / n_fft**2
    p = base.psd
    var = (p[0] + p[-1] + 2.0 * np.sum(p[1:-1])) / base.n_fft**2
    return GaussianPsdPrior(p * rms**2 / var)


def random_filter(rng: np.random.Generator, sample_rate: float = BENCH_RATE, max_passband_db: float = 20.0,
                  min_band_limit_hz: float = 2000.0) -> FilterParams:
    """Random 5-breakpoint filter anchored at 0 dB whose passband stays within +-``max_passband_db``."""
    f_max = default_f_max(sample_rate)
    while True:
        top = rng.uniform(min_band_limit_hz, min(8000.0, f_max - 100.0))
        low = rng.uniform(40.0, 200.0)
        inner = np.sort(np.exp(rng.uniform(np.log(low * 1.5), np.log(top / 1.2), size=3)))
        bps = np.concatenate([[low], inner, [top]])
        if np.any(np.diff(bps) < 20.0):
            continue
        slopes = rng.uniform(-12.0, 12.0, size=4)
        params = FilterParams(bps, slopes, 2, F_MIN_HZ, f_max)
        db = eval_response_db(params, np.geomspace(bps[0], bps[-1], 256))
        if np.max(np.abs(db)) <= max_passband_db:
            return params


def degrade(x: Signal, params: FilterParams, noise_std: float, rng: np.random.Generator) -> Signal:
    _, freqs = full_grid(len(x), x.sample_rate)
    gain = np.power(10.0, response_on_grid(params, freqs) / 20.0)
    y = zero_phase_filter(x.samples, gain)
    if noise_std > 0:
        y = y + noise_std * rng.standard_normal(y.size)
    return x.with_samples(y)


def hard_clip(y: Signal, fraction: float = 0.10) -> Signal:
    """Clip the ``fraction`` largest-magnitude samples to the threshold they exceed."""
    a = np.abs(y.samples)
    thr = np.quantile(a, 1.0 - fraction)
    return y.with_samples(np.clip(y.samples, -thr, thr))


def wiener_posterior_mean(y: Signal, prior: GaussianPsdPrior, params: FilterParams, noise_var: float) -> np.ndarray:
    """E[x | y] for y = H x + white noise under the Gaussian prior (circulant grid)."""
    n_fft, freqs = full_grid(len(y), y.sample_rate)
    g = np.power(10.0, response_on_grid(params, freqs) / 20.0)
    p = prior.psd
    return zero_phase_filter(y.samples, p * g / (g * g * p + noise_var * n_fft))


def recovery_error_db(estimate_db, truth_db, floor_db: float = RECOVERY_FLOOR_DB) -> float:
    """Median absolute dB error over bins where the true gain exceeds ``floor_db``."""
    est = np.asarray(estimate_db, dtype=float)
    tru = np.asarray(truth_db, dtype=float)
    mask = tru > floor_db
    return float(np.median(np.abs(est[mask] - tru[mask])))


def filter_recovery_error(estimate: FilterParams, truth: FilterParams, sample_rate: float = BENCH_RATE,
                          estimate_extra_db=None) -> float:
    """Recovery error on the analysis-grid bins above DC."""
    freqs = analysis_config(sample_rate).freqs(sample_rate)[1:]
    est = eval_response_db(estimate, freqs)
    if estimate_extra_db is not None:
        est = est + estimate_extra_db(freqs)
    return recovery_error_db(est, eval_response_db(truth, freqs))


def relative_l2(a, b) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return float(np.linalg.norm(a - b) / np.linalg.norm(b))


def seam_jump_ratio(x, seam: int, n_overlap: int) -> float:
    """Largest jump at the crossfade edges divided by the median first difference elsewhere.

    The crossfade occupies ``[seam, seam + n_overlap)``; its edges are where
    the previous block's tail hands over and where the new block takes over.
    """
    d = np.abs(np.diff(np.asarray(x, dtype=float)))
    edges = [seam - 1, seam + n_overlap - 1]
    jump = max(d[e] for e in edges if 0 <= e < d.size)
    mask = np.ones(d.size, dtype=bool)
    for e in edges:
        mask[max(e - 1, 0) : e + 2] = False
    return float(jump / np.median(d[mask]))


@dataclass(frozen=True)
class BenchmarkCase:
    clean: Signal
    observed: Signal
    truth: FilterParams
    prior: GaussianPsdPrior
    noise_std: float


def make_case(seed: int, noise_std: float = 1e-4, clip_fraction: float = 0.0,
              n_samples: int = BENCH_SAMPLES, sample_rate: float = BENCH_RATE) -> BenchmarkCase:
    rng = np.random.default_rng(seed)
    prior = benchmark_prior(n_samples, sample_rate)
    truth = random_filter(rng, sample_rate)
    clean = Signal(prior.sample(n_samples, rng), sample_rate)
    y = degrade(clean, truth, noise_std, rng)
    if clip_fraction > 0:
        y = hard_clip(y, clip_fraction)
    return BenchmarkCase(clean, y, truth, prior, noise_std)


def gentle_filter(sample_rate: float = BENCH_RATE) -> FilterParams:
    """Mild coloration with no stop band inside the analysis range."""
    return FilterParams((25.0, 400.0, 1000.0, 3000.0, 10500.0), (3.0, 0.0, -4.0, -2.0), 2, F_MIN_HZ,
                        default_f_max(sample_rate))


def nonblind_trial(seed: int, steps: int = 51, order: int = 1, s_churn: float = 0.0, xi_prime: float = 1.0,
                   noise_std: float = 1e-4) -> float:
    """Relative L2 between the sampler output and the Wiener posterior mean, filter known."""
    from .sampler import GuidanceConfig, InnerLoopConfig, build_schedule, restore_segment

    rng = np.random.default_rng(seed)
    prior = benchmark_prior()
    params = gentle_filter()
    clean = Signal(prior.sample(BENCH_SAMPLES, rng), BENCH_RATE)
    y = degrade(clean, params, noise_std, rng)
    schedule = build_schedule(0.5, 4e-5, 13.0, steps, s_churn)
    g_cfg = GuidanceConfig(xi_prime, 0.0, weighting="flat")
    x, _ = restore_segment(y, prior, schedule, g_cfg, InnerLoopConfig(0), rng=np.random.default_rng(100 + seed),
                           order=order, filter_init=params)
    return relative_l2(x.samples, wiener_posterior_mean(y, prior, params, noise_std**2))


def blind_trial(seed: int, noise_reg_gamma: float = 0.25, clip_fraction: float = 0.0, steps: int = 51,
                order: int = 2, s_churn: float = 10.0, iterations: int = 100, weighting: str = "inverse") -> float:
    """Filter-recovery error (dB) of a full blind run on :func:`make_case` ``seed``."""
    from .sampler import GuidanceConfig, InnerLoopConfig, build_schedule, restore_segment

    case = make_case(seed, clip_fraction=clip_fraction)
    schedule = build_schedule(0.5, 4e-5, 13.0, steps, s_churn)
    g_cfg = GuidanceConfig(1.0, noise_reg_gamma, weighting=weighting)
    _, est = restore_segment(case.observed, case.prior, schedule, g_cfg, InnerLoopConfig(iterations),
                             rng=np.random.default_rng(1000 + seed), order=order)
    return filter_recovery_error(est, case.truth)
