"""Denoiser priors D(x, sigma) and their vector-Jacobian products.

``sigma`` is the standard deviation of white time-domain noise. With the
unnormalized forward FFT used here, that noise has power ``sigma**2 * n_fft``
in every bin of the full-signal grid.
"""

from __future__ import annotations

import abc
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .dsp import Signal, full_grid, next_pow2, zero_phase_filter
from .errors import DomainError, NumericError, ShapeError

__all__ = [
    "DenoiserPrior",
    "GaussianPsdPrior",
    "IdentityPrior",
    "PointMassPrior",
    "Preconditioning",
    "PreconditionedDenoiser",
    "wrap_preconditioned",
    "denoise",
    "denoiser_vjp",
    "prior_score",
    "vjp_method",
    "finite_difference_vjp",
]


class DenoiserPrior(abc.ABC):
    """MMSE denoiser contract.

    Subclasses implement :meth:`denoise` on 1-D arrays (a leading batch axis is
    allowed where noted). Priors without an analytic :meth:`vjp` inherit the
    finite-difference fallback, which costs two denoiser calls per sample.
    """

    @abc.abstractmethod
    def denoise(self, x: np.ndarray, sigma: float) -> np.ndarray:
        ...

    def vjp(self, x: np.ndarray, sigma: float, cotangent: np.ndarray) -> np.ndarray:
        return finite_difference_vjp(self, x, sigma, cotangent)

    @property
    def has_analytic_vjp(self) -> bool:
        return type(self).vjp is not DenoiserPrior.vjp


def finite_difference_vjp(prior: DenoiserPrior, x, sigma, cotangent) -> np.ndarray:
    """Central differences of <cotangent, D(x, sigma)> along every coordinate."""
    x = np.asarray(x, dtype=float)
    v = np.asarray(cotangent, dtype=float)
    eps = 1e-4 * (1.0 + np.max(np.abs(x)))
    out = np.empty_like(x)
    probe = x.copy()
    for i in range(x.size):
        probe[i] = x[i] + eps
        plus = np.dot(v, prior.denoise(probe, sigma))
        probe[i] = x[i] - eps
        minus = np.dot(v, prior.denoise(probe, sigma))
        probe[i] = x[i]
        out[i] = (plus - minus) / (2.0 * eps)
    return out


def vjp_method(prior: DenoiserPrior) -> str:
    return "analytic" if prior.has_analytic_vjp else "finite-difference"


def _unwrap(x):
    if isinstance(x, Signal):
        return x.samples, x
    return np.asarray(x, dtype=float), None


def _rewrap(arr, template):
    return template.with_samples(arr) if template is not None else arr


def _checked(prior, out, x, what):
    out = np.asarray(out, dtype=float)
    if out.shape != x.shape:
        raise ShapeError(f"{type(prior).__name__}.{what} returned shape {out.shape}, expected {x.shape}")
    if not np.all(np.isfinite(out)):
        raise NumericError(f"{type(prior).__name__}.{what} produced non-finite values")
    return out


def denoise(prior: DenoiserPrior, x, sigma: float):
    """MMSE estimate of the clean signal; ``sigma == 0`` returns ``x`` unchanged."""
    if sigma < 0:
        raise DomainError(f"noise level must be >= 0, got {sigma}")
    arr, tmpl = _unwrap(x)
    if sigma == 0:
        return _rewrap(arr.copy(), tmpl)
    return _rewrap(_checked(prior, prior.denoise(arr, float(sigma)), arr, "denoise"), tmpl)


def denoiser_vjp(prior: DenoiserPrior, x, sigma: float, cotangent):
    """``cotangent^T . dD/dx`` evaluated at ``(x, sigma)``."""
    if sigma < 0:
        raise DomainError(f"noise level must be >= 0, got {sigma}")
    arr, tmpl = _unwrap(x)
    v, _ = _unwrap(cotangent)
    if v.shape != arr.shape:
        raise ShapeError(f"cotangent shape {v.shape} does not match input {arr.shape}")
    if sigma == 0:
        return _rewrap(v.copy(), tmpl)
    return _rewrap(_checked(prior, prior.vjp(arr, float(sigma), v), arr, "vjp"), tmpl)


def prior_score(prior: DenoiserPrior, x, sigma: float):
    """Score of the noisy marginal, (D(x, sigma) - x) / sigma**2."""
    if not sigma > 0:
        raise DomainError(f"score needs sigma > 0, got {sigma}")
    arr, tmpl = _unwrap(x)
    d = _checked(prior, prior.denoise(arr, float(sigma)), arr, "denoise")
    return _rewrap((d - arr) / sigma**2, tmpl)


class IdentityPrior(DenoiserPrior):
    def denoise(self, x, sigma):
        return np.array(x, dtype=float, copy=True)

    def vjp(self, x, sigma, cotangent):
        return np.array(cotangent, dtype=float, copy=True)


class PointMassPrior(DenoiserPrior):
    """All mass on one signal; the MMSE estimate is that signal at every sigma."""

    def __init__(self, center):
        self.center = np.array(center, dtype=float)

    def denoise(self, x, sigma):
        return np.broadcast_to(self.center, np.shape(x)).copy()

    def vjp(self, x, sigma, cotangent):
        return np.zeros_like(np.asarray(cotangent, dtype=float))


class GaussianPsdPrior(DenoiserPrior):
    """Stationary Gaussian prior, diagonal on the full-signal FFT grid.

    ``psd`` is the expected power ``E|X_k|**2`` per one-sided bin for signals
    zero-padded to ``n_fft``. The denoiser is the per-bin Wiener gain
    ``P / (P + sigma**2 * n_fft)``; it is linear and symmetric, so the VJP is
    the same map applied to the cotangent. Accepts a leading batch axis.
    """

    def __init__(self, psd):
        psd = np.array(psd, dtype=float)
        if psd.ndim != 1 or psd.size < 2:
            raise ShapeError("psd must be a 1-D array with at least 2 bins")
        if np.any(psd < 0) or not np.all(np.isfinite(psd)):
            raise NumericError("psd must be finite and non-negative")
        psd.setflags(write=False)
        self.psd = psd

    @property
    def n_fft(self) -> int:
        return 2 * (self.psd.size - 1)

    def _check_len(self, n):
        if next_pow2(n) != self.n_fft:
            raise ShapeError(f"prior is defined for {self.n_fft}-point grids, got a {n}-sample signal")

    def wiener_gain(self, sigma: float) -> np.ndarray:
        noise = sigma * sigma * self.n_fft
        den = self.psd + noise
        return np.divide(self.psd, den, out=np.ones_like(den), where=den > 0)

    def denoise(self, x, sigma):
        self._check_len(np.shape(x)[-1])
        return zero_phase_filter(x, self.wiener_gain(sigma))

    def vjp(self, x, sigma, cotangent):
        return self.denoise(cotangent, sigma)

    def sample(self, n_samples: int, rng: np.random.Generator, size=None) -> np.ndarray:
        """Draw signals of ``n_samples`` from the prior (truncated from ``n_fft``)."""
        self._check_len(n_samples)
        shape = (() if size is None else tuple(np.atleast_1d(size))) + (self.psd.size,)
        spec = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) * np.sqrt(self.psd / 2.0)
        # DC and Nyquist are real with the full bin power
        spec[..., 0] = rng.standard_normal(shape[:-1]) * np.sqrt(self.psd[0])
        spec[..., -1] = rng.standard_normal(shape[:-1]) * np.sqrt(self.psd[-1])
        return np.fft.irfft(spec, n=self.n_fft, axis=-1)[..., :n_samples]

    @classmethod
    def white(cls, variance: float, n_samples: int) -> "GaussianPsdPrior":
        n_fft = next_pow2(n_samples)
        return cls(np.full(n_fft // 2 + 1, variance * n_fft))

    @classmethod
    def from_density(cls, density: Callable, n_samples: int, sample_rate: float) -> "GaussianPsdPrior":
        """Prior whose per-sample variance density (variance per bin, white = const)
        is ``density(freqs)``; bin power is ``density * n_fft``."""
        n_fft, freqs = full_grid(n_samples, sample_rate)
        return cls(np.asarray(density(freqs), dtype=float) * n_fft)

    @classmethod
    def from_ltas(cls, profile, n_samples: int) -> "GaussianPsdPrior":
        """Scale an LTAS (windowed-frame power) to full-grid bin power.

        A white signal of variance s**2 has LTAS power ``s**2 * sum(w**2)`` and
        full-grid power ``s**2 * n_fft``; the spectrum is interpolated linearly
        in log-frequency.
        """
        w = profile.config.window_array()
        n_fft, freqs = full_grid(n_samples, profile.sample_rate)
        src_f = profile.freqs[1:]
        src_p = np.maximum(profile.power[1:], 0.0)
        f = np.maximum(freqs, src_f[0])
        p = np.interp(np.log2(f), np.log2(src_f), src_p)
        return cls(p * n_fft / np.sum(w * w))


def _check_raw_output(out, x):
    out = np.asarray(out, dtype=float)
    if out.shape != np.shape(x):
        raise ShapeError(f"raw network returned shape {out.shape} for input shape {np.shape(x)}")
    return out


@dataclass(frozen=True)
class Preconditioning:
    """Input/output scalings for a network trained on data of scale ``sigma_data``."""

    sigma_data: float

    def c_skip(self, sigma):
        return self.sigma_data**2 / (sigma**2 + self.sigma_data**2)

    def c_out(self, sigma):
        return sigma * self.sigma_data / np.sqrt(sigma**2 + self.sigma_data**2)

    def c_in(self, sigma):
        return 1.0 / np.sqrt(sigma**2 + self.sigma_data**2)

    def c_noise(self, sigma):
        return np.log(sigma) / 4.0


class PreconditionedDenoiser(DenoiserPrior):
    """D(x, s) = c_skip(s) x + c_out(s) F(c_in(s) x, ln(s)/4) for a raw network F.

    ``raw_vjp(u, c_noise, v)``, when given, must return ``v^T dF/du``; without
    it the finite-difference fallback is used.
    """

    def __init__(self, raw_network: Callable, pre: Preconditioning, raw_vjp: Callable | None = None):
        self.raw_network = raw_network
        self.pre = pre
        self.raw_vjp = raw_vjp

    def denoise(self, x, sigma):
        p = self.pre
        u = p.c_in(sigma) * np.asarray(x, dtype=float)
        f = _check_raw_output(self.raw_network(u, p.c_noise(sigma)), x)
        return p.c_skip(sigma) * x + p.c_out(sigma) * f

    def vjp(self, x, sigma, cotangent):
        if self.raw_vjp is None:
            return finite_difference_vjp(self, x, sigma, cotangent)
        p = self.pre
        u = p.c_in(sigma) * np.asarray(x, dtype=float)
        back = _check_raw_output(self.raw_vjp(u, p.c_noise(sigma), cotangent), x)
        return p.c_skip(sigma) * cotangent + p.c_out(sigma) * p.c_in(sigma) * back

    @property
    def has_analytic_vjp(self) -> bool:
        return self.raw_vjp is not None


def wrap_preconditioned(raw_network: Callable, pre: Preconditioning, raw_vjp: Callable | None = None):
    return PreconditionedDenoiser(raw_network, pre, raw_vjp)
