"""Blind posterior sampling with joint filter estimation.

One restoration runs the reverse diffusion from a noisy warm start. At every
noise level the denoised estimate is matched to the observations twice: the
filter parameters are refit on STFT magnitudes (Adam + projection), then the
audio is pushed towards the observations by a normalized likelihood gradient
computed through the denoiser's VJP.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field

import numpy as np

from .denoiser import DenoiserPrior, vjp_method
from .dsp import Signal, analysis_config, full_grid, stft_magnitude, zero_phase_filter
from .errors import ConfigError, GeneqError, NumericError, ShapeError
from .filters import (
    BcrConfig,
    FilterParams,
    bcr_cost,
    eval_gain,
    eval_response_db,
    init_default,
    project,
    response_on_grid,
    response_param_gradients,
)
from .ltas import EqResponse, LtasProfile, apply_inverse_eq, compute_ltas, ltas_eq_filter, smooth_spectrum
from .optim import AdamState, adam_step

log = logging.getLogger(__name__)

MODES = ("plain", "ltas_init", "ltas_objective")
WEIGHT_FLOOR_FRACTION = 0.1
DIVERGENCE_FACTOR = 1e6
_DB_PER_NEPER = np.log(10.0) / 20.0


@dataclass(frozen=True)
class NoiseSchedule:
    sigmas: np.ndarray
    sigma_start: float
    sigma_min: float
    rho: float
    steps: int
    s_churn: float = 0.0

    @property
    def churn_gamma(self) -> float:
        if self.s_churn <= 0:
            return 0.0
        return min(self.s_churn / self.steps, np.sqrt(2.0) - 1.0)


def build_schedule(sigma_start: float, sigma_min: float, rho: float, steps: int, s_churn: float = 0.0) -> NoiseSchedule:
    """Exponentially warped noise levels from ``sigma_start`` down to ``sigma_min``."""
    problems = []
    if not sigma_start > sigma_min > 0:
        problems.append(f"need sigma_start > sigma_min > 0, got {sigma_start}, {sigma_min}")
    if int(steps) != steps or steps < 2:
        problems.append(f"need an integer T >= 2, got {steps}")
    if not rho >= 1:
        problems.append(f"need rho >= 1, got {rho}")
    if s_churn < 0:
        problems.append(f"need s_churn >= 0, got {s_churn}")
    if problems:
        raise ConfigError("; ".join(problems))
    steps = int(steps)
    a, b = sigma_start ** (1.0 / rho), sigma_min ** (1.0 / rho)
    sigmas = (a + np.arange(steps) / (steps - 1) * (b - a)) ** rho
    sigmas[0], sigmas[-1] = sigma_start, sigma_min
    if np.any(np.diff(sigmas) >= 0):
        raise ConfigError("schedule is not strictly decreasing; increase the sigma range or reduce T")
    sigmas.setflags(write=False)
    return NoiseSchedule(sigmas, float(sigma_start), float(sigma_min), float(rho), steps, float(s_churn))


@dataclass(frozen=True)
class GuidanceConfig:
    xi_prime: float = 1.0
    noise_reg_gamma: float = 0.25
    mode: str = "plain"
    # "inverse", "flat", or per-bin weights on the analysis grid
    weighting: object = "inverse"
    # also fit the filter against the noise-regularized observations
    regularize_filter_fit: bool = False

    def __post_init__(self):
        if not self.xi_prime >= 0:
            raise ConfigError(f"xi_prime must be >= 0, got {self.xi_prime}")
        if not self.noise_reg_gamma >= 0:
            raise ConfigError(f"noise_reg_gamma must be >= 0, got {self.noise_reg_gamma}")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if isinstance(self.weighting, str) and self.weighting not in ("inverse", "flat"):
            raise ConfigError(f"weighting must be 'inverse', 'flat' or an array, got {self.weighting!r}")


@dataclass(frozen=True)
class InnerLoopConfig:
    iterations: int = 100
    adam: AdamState = field(default_factory=lambda: AdamState.zeros(0, learning_rate=10.0))
    bcr: BcrConfig = field(default_factory=BcrConfig)
    # slopes (dB/oct) step at this fraction of the breakpoint learning rate (Hz)
    slope_lr_scale: float = 0.1

    def __post_init__(self):
        if int(self.iterations) != self.iterations or self.iterations < 0:
            raise ConfigError(f"iterations must be a non-negative integer, got {self.iterations}")
        if not self.slope_lr_scale > 0:
            raise ConfigError(f"slope_lr_scale must be > 0, got {self.slope_lr_scale}")

    def lr_scale(self, params: FilterParams) -> np.ndarray | None:
        if self.slope_lr_scale == 1.0:
            return None
        nb = params.n_breakpoints
        return np.concatenate([np.ones(nb), np.full(params.n_params - nb, self.slope_lr_scale)])


@dataclass
class SamplerTrace:
    """Per-step diagnostics filled in by :func:`restore_segment`."""

    steps: list = field(default_factory=list)
    inner_costs: list = field(default_factory=list)
    h_ltas: EqResponse | None = None
    vjp_method: str | None = None

    FIELDS = ("step", "sigma", "sigma_hat", "filter_cost", "audio_cost", "xi", "zero_grad")

    def write_csv(self, path, block: int | None = None) -> None:
        with open(path, "w", newline="") as fh:
            self.write_rows(csv.writer(fh, lineterminator="\n"), header=True, block=block)

    def write_rows(self, writer, header: bool = True, block: int | None = None) -> None:
        cols = (("block",) if block is not None else ()) + self.FIELDS
        if header:
            writer.writerow(cols)
        for row in self.steps:
            vals = [row[k] for k in self.FIELDS]
            writer.writerow(([block] if block is not None else []) + [_fmt(v) for v in vals])


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return int(v)
    if isinstance(v, float):
        return repr(v)
    return v


def guidance_scale(xi_prime: float, sigma: float, grad, n: int) -> float:
    """Step-size normalization xi' sqrt(N) / (sigma ||grad||); 0 for a zero gradient."""
    grad = np.asarray(grad, dtype=float)
    peak = float(np.max(np.abs(grad))) if grad.size else 0.0
    # rescale first: squaring tiny gradients underflows to a zero norm
    norm = peak * float(np.linalg.norm(grad / peak)) if peak > 0.0 else 0.0
    if norm == 0.0:
        log.debug("zero likelihood gradient at sigma=%g; guidance disabled for this step", sigma)
        return 0.0
    return xi_prime * np.sqrt(n) / (sigma * norm)


class AudioCost:
    """Squared error between observations and the filtered estimate.

    With ``prev_tail`` set, the first ``len(prev_tail)`` samples are matched to
    the previous block's output instead of the observations (block
    continuation).
    """

    def __init__(self, target: np.ndarray, gain: np.ndarray, prev_tail: np.ndarray | None = None):
        self.target = np.asarray(target, dtype=float)
        self.gain = gain
        self.prev_tail = None if prev_tail is None else np.asarray(prev_tail, dtype=float)
        n = self.target.size
        self.n_overlap = 0 if self.prev_tail is None else self.prev_tail.size
        if self.n_overlap >= n:
            raise ConfigError(f"overlap of {self.n_overlap} samples leaves nothing of a {n}-sample block")
        self.obs_mask = np.ones(n)
        self.obs_mask[: self.n_overlap] = 0.0

    def residual(self, x_hat0: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        r_obs = self.obs_mask * (zero_phase_filter(x_hat0, self.gain) - self.target)
        r_prev = np.zeros_like(r_obs)
        if self.n_overlap:
            r_prev[: self.n_overlap] = x_hat0[: self.n_overlap] - self.prev_tail
        return r_obs, r_prev

    def value(self, x_hat0) -> float:
        r_obs, r_prev = self.residual(np.asarray(x_hat0, dtype=float))
        return float(np.sum((r_obs + r_prev) ** 2))

    def value_and_grad(self, x_hat0) -> tuple[float, np.ndarray]:
        """Cost and its gradient w.r.t. the denoised estimate."""
        r_obs, r_prev = self.residual(np.asarray(x_hat0, dtype=float))
        grad = 2.0 * (zero_phase_filter(r_obs, self.gain) + r_prev)
        return float(np.sum((r_obs + r_prev) ** 2)), grad


def _full_gain(params: FilterParams, n: int, sample_rate: float, extra: np.ndarray | None = None) -> np.ndarray:
    _, freqs = full_grid(n, sample_rate)
    gain = np.power(10.0, response_on_grid(params, freqs) / 20.0)
    return gain if extra is None else gain * extra


def _as_array(x):
    return x.samples if isinstance(x, Signal) else np.asarray(x, dtype=float)


def likelihood_gradient(
    y_obs,
    x,
    sigma: float,
    filt: FilterParams,
    prior: DenoiserPrior,
    cfg: GuidanceConfig,
    rng: np.random.Generator | None = None,
    *,
    noise=None,
    sample_rate: float | None = None,
):
    """Gradient w.r.t. ``x`` of ||y + gamma*eps - H(D(x, sigma))||^2.

    ``noise`` freezes eps; otherwise it is drawn from ``rng``.
    """
    y = _as_array(y_obs)
    xs = _as_array(x)
    if y.shape != xs.shape:
        raise ShapeError(f"observation {y.shape} and state {xs.shape} differ")
    if not sigma > 0:
        raise ConfigError(f"sigma must be > 0, got {sigma}")
    sr = sample_rate or (x.sample_rate if isinstance(x, Signal) else getattr(y_obs, "sample_rate", None))
    if sr is None:
        raise ConfigError("sample_rate is required for raw arrays")
    if cfg.noise_reg_gamma > 0:
        eps = rng.standard_normal(y.size) if noise is None else np.asarray(noise, dtype=float)
        y = y + cfg.noise_reg_gamma * eps
    x_hat0 = prior.denoise(xs, sigma)
    _, g_hat = AudioCost(y, _full_gain(filt, y.size, sr)).value_and_grad(x_hat0)
    grad = prior.vjp(xs, sigma, g_hat)
    if not np.all(np.isfinite(grad)):
        raise NumericError("likelihood gradient: non-finite values after the denoiser VJP")
    return x.with_samples(grad) if isinstance(x, Signal) else grad


class SpectralFit:
    """Weighted STFT-magnitude cost between observations and the filtered estimate.

    Frame averages make the cost cheap to re-evaluate for new filter
    parameters: with A = <|X|^2>, B = <|X||Y|>, C = <|Y|^2> per bin,
    cost = sum_k W_k^2 (C_k - 2 g_k B_k + g_k^2 A_k).
    """

    def __init__(self, y: np.ndarray, sample_rate: float, weights=None):
        self.sample_rate = sample_rate
        self.config = analysis_config(sample_rate)
        self.freqs = self.config.freqs(sample_rate)[1:]
        self.y_mag = stft_magnitude(y, self.config)[:, 1:]
        self.c = np.mean(self.y_mag**2, axis=0)
        if weights is None:
            w = np.ones(self.freqs.size)
        else:
            w = np.asarray(weights, dtype=float)
            if w.size == self.freqs.size + 1:
                w = w[1:]
            if w.size != self.freqs.size:
                raise ShapeError(f"weights need {self.freqs.size + 1} bins, got {w.size}")
        self.w2 = w * w
        self.a = self.b = None

    @staticmethod
    def inverse_weights(y: np.ndarray, sample_rate: float, floor_fraction: float = WEIGHT_FLOOR_FRACTION) -> np.ndarray:
        """1 / (smoothed mean |Y| + floor_fraction * max), on the analysis grid."""
        cfg = analysis_config(sample_rate)
        m = smooth_spectrum(np.mean(stft_magnitude(y, cfg), axis=0), sample_rate, cfg.window_size)
        return 1.0 / (m + floor_fraction * np.max(m) + np.finfo(float).tiny)

    def bind(self, x_hat0: np.ndarray) -> "SpectralFit":
        x_mag = stft_magnitude(x_hat0, self.config)[:, 1:]
        if x_mag.shape != self.y_mag.shape:
            raise ShapeError("estimate and observation lengths differ")
        self.a = np.mean(x_mag**2, axis=0)
        self.b = np.mean(x_mag * self.y_mag, axis=0)
        return self

    def value(self, params: FilterParams, extra_gain=None) -> float:
        g = eval_gain(params, self.freqs)
        return float(np.sum(self.w2 * (self.c - 2.0 * g * self.b + g * g * self.a)))

    def value_and_grad(self, params: FilterParams) -> tuple[float, np.ndarray]:
        g = eval_gain(params, self.freqs)
        cost = float(np.sum(self.w2 * (self.c - 2.0 * g * self.b + g * g * self.a)))
        d_g = self.w2 * 2.0 * (g * self.a - self.b)
        d_r = d_g * g * _DB_PER_NEPER
        jac = response_param_gradients(params, self.freqs).jacobian()
        return cost, d_r @ jac


def _total_cost(fit: SpectralFit, params: FilterParams, bcr: BcrConfig):
    cost, grad = fit.value_and_grad(params)
    if bcr.gamma_bcr > 0:
        c_bcr, g_bcr = bcr_cost(params, bcr)
        cost += bcr.gamma_bcr * c_bcr
        grad = grad.copy()
        grad[: params.n_breakpoints] += bcr.gamma_bcr * g_bcr
    return cost, grad


def _run_inner(fit: SpectralFit, filt: FilterParams, cfg: InnerLoopConfig, costs: list | None):
    if cfg.iterations == 0:
        return filt
    state = cfg.adam.fresh(filt.n_params)
    lr_scale = cfg.lr_scale(filt)
    params = filt
    initial = None
    for j in range(cfg.iterations):
        cost, grad = _total_cost(fit, params, cfg.bcr)
        if initial is None:
            initial = max(cost, np.finfo(float).tiny)
        elif not np.isfinite(cost) or cost > DIVERGENCE_FACTOR * initial:
            raise NumericError(
                f"filter optimization diverged at iteration {j}: cost {cost:.3e} vs initial "
                f"{initial:.3e}; params {params.vector().round(3).tolist()}"
            )
        if costs is not None:
            costs.append(cost)
        state, vec = adam_step(state, params.vector(), grad, lr_scale)
        params = project(params.with_vector(vec))
    if costs is not None:
        costs.append(_total_cost(fit, params, cfg.bcr)[0])
    return params


def filter_inner_loop(
    y_obs,
    x_hat0,
    filt: FilterParams,
    cfg: InnerLoopConfig,
    w=None,
    *,
    sample_rate: float | None = None,
    costs: list | None = None,
) -> FilterParams:
    """``cfg.iterations`` projected Adam steps on the weighted spectral cost plus BCR.

    ``w`` is a per-bin weight on the analysis grid (None for flat). If
    ``costs`` is a list, the total cost before each step and after the last
    one is appended to it.
    """
    y = _as_array(y_obs)
    xh = _as_array(x_hat0)
    if y.shape != xh.shape:
        raise ShapeError(f"observation {y.shape} and estimate {xh.shape} differ")
    sr = sample_rate or getattr(y_obs, "sample_rate", None) or getattr(x_hat0, "sample_rate", None)
    if sr is None:
        raise ConfigError("sample_rate is required for raw arrays")
    fit = SpectralFit(y, sr, w).bind(xh)
    return _run_inner(fit, filt, cfg, costs)


def composite_response_db(params: FilterParams, h_ltas: EqResponse | None, freqs) -> np.ndarray:
    """Response relating the original recording to the estimate (H_phi times H_LTAS)."""
    r = eval_response_db(params, freqs)
    if h_ltas is not None:
        r = r + 20.0 * np.log10(h_ltas.on_grid(freqs))
    return r


def _reraise_with_step(exc: GeneqError, step: int, sigma: float):
    msg = f"sampler step {step} (sigma={sigma:.4g}): {exc.args[0] if exc.args else exc}"
    if isinstance(exc, NumericError):
        raise NumericError(msg) from exc
    exc.args = (msg,) + tuple(exc.args[1:])
    raise exc


def restore_segment(
    y_obs: Signal,
    prior: DenoiserPrior,
    schedule: NoiseSchedule,
    g_cfg: GuidanceConfig,
    i_cfg: InnerLoopConfig,
    ltas_ref: LtasProfile | None = None,
    rng: np.random.Generator | None = None,
    *,
    order: int = 2,
    filter_init: FilterParams | None = None,
    h_ltas: EqResponse | None = None,
    prev_tail=None,
    trace: SamplerTrace | None = None,
) -> tuple[Signal, FilterParams]:
    """Restore one segment and estimate its degradation filter.

    ``order=1`` is the plain Euler sampler, ``order=2`` adds the Heun
    correction. ``h_ltas`` supplies a precomputed LTAS equalizer for the LTAS
    modes; ``prev_tail`` switches the audio cost to block continuation.
    Returns the restored signal and the final filter, which in
    ``ltas_objective`` mode relates the equalized observations to the result.
    """
    if order not in (1, 2):
        raise ConfigError(f"order must be 1 or 2, got {order}")
    if rng is None:
        rng = np.random.default_rng()
    sr = y_obs.sample_rate
    y = y_obs.samples
    n = y.size

    warm = y
    y_cost = y
    if g_cfg.mode != "plain":
        if h_ltas is None:
            if ltas_ref is None:
                raise ConfigError(f"mode {g_cfg.mode!r} needs a reference LTAS")
            h_ltas = ltas_eq_filter(compute_ltas(y_obs, ltas_ref.config), ltas_ref)
        warm = apply_inverse_eq(y_obs, h_ltas).samples
        if g_cfg.mode == "ltas_objective":
            y_cost = warm
    else:
        h_ltas = None
    if trace is not None:
        trace.h_ltas = h_ltas
        trace.vjp_method = vjp_method(prior)

    if isinstance(g_cfg.weighting, str):
        weights = SpectralFit.inverse_weights(y_cost, sr) if g_cfg.weighting == "inverse" else None
    else:
        weights = g_cfg.weighting
    fit = SpectralFit(y_cost, sr, weights)

    if prev_tail is not None:
        prev_tail = np.asarray(prev_tail, dtype=float)
        warm = warm.copy()
        warm[: prev_tail.size] = prev_tail

    params = project(filter_init if filter_init is not None else init_default(sr))
    sigmas = schedule.sigmas
    gamma_churn = schedule.churn_gamma
    x = warm + schedule.sigma_start * rng.standard_normal(n)

    def posterior_direction(x_in, sig, cost: AudioCost):
        """Returns (x_hat0, d) with d = dx/dsigma under the guided score."""
        x_hat0 = prior.denoise(x_in, sig)
        a_cost, g_hat = cost.value_and_grad(x_hat0)
        grad = prior.vjp(x_in, sig, g_hat)
        xi = guidance_scale(g_cfg.xi_prime, sig, grad, n) if g_cfg.xi_prime > 0 else 0.0
        score = (x_hat0 - x_in) / sig**2 - xi * grad
        return x_hat0, -sig * score, a_cost, xi

    for k, sigma in enumerate(sigmas):
        sigma = float(sigma)
        sigma_next = float(sigmas[k + 1]) if k + 1 < sigmas.size else 0.0
        try:
            sigma_hat = sigma * (1.0 + gamma_churn)
            if gamma_churn > 0:
                x = x + np.sqrt(sigma_hat**2 - sigma**2) * rng.standard_normal(n)
            x_hat0 = prior.denoise(x, sigma_hat)

            inner_costs = [] if trace is not None else None
            y_reg = y_cost
            if g_cfg.noise_reg_gamma > 0:
                y_reg = y_cost + g_cfg.noise_reg_gamma * rng.standard_normal(n)
            step_fit = SpectralFit(y_reg, sr, weights) if g_cfg.regularize_filter_fit and y_reg is not y_cost else fit
            params = _run_inner(step_fit.bind(x_hat0), params, i_cfg, inner_costs)
            cost = AudioCost(y_reg, _full_gain(params, n, sr), prev_tail)

            _, d, a_cost, xi = posterior_direction(x, sigma_hat, cost)
            x_next = x + (sigma_next - sigma_hat) * d
            if order == 2 and sigma_next > 0:
                _, d2, _, _ = posterior_direction(x_next, sigma_next, cost)
                x_next = x + (sigma_next - sigma_hat) * 0.5 * (d + d2)
            if not np.all(np.isfinite(x_next)):
                raise NumericError("non-finite audio state after update")
            x = x_next
        except GeneqError as exc:
            _reraise_with_step(exc, k, sigma)

        if trace is not None:
            trace.inner_costs.append(np.asarray(inner_costs))
            trace.steps.append(
                dict(
                    step=k,
                    sigma=sigma,
                    sigma_hat=sigma_hat,
                    filter_cost=float(inner_costs[-1]) if inner_costs else float(fit.value(params)),
                    audio_cost=a_cost,
                    xi=float(xi),
                    zero_grad=bool(xi == 0.0 and g_cfg.xi_prime > 0),
                )
            )
    return Signal(x, sr), params
