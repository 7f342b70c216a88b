"""Time/frequency transforms and zero-phase frequency-domain filtering.

Conventions used throughout the package:

* FFTs are unnormalized in the forward direction (``numpy.fft.rfft``), so a
  white signal with per-sample variance ``s**2`` has expected power
  ``n_fft * s**2`` in every bin.
* Full-signal filtering zero-pads to the next power of two, multiplies by a
  real (zero-phase) gain on the one-sided grid and truncates back.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.signal import get_window

from .errors import DomainError, InputSizeError, NumericError, ShapeError

__all__ = [
    "Signal",
    "StftConfig",
    "Spectrogram",
    "analysis_config",
    "next_pow2",
    "full_grid",
    "stft",
    "istft",
    "apply_zero_phase_filter",
    "zero_phase_filter",
    "db_to_gain",
    "gain_to_db",
]


def _frozen(a, dtype=float):
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Signal:
    """Mono sample buffer with its sample rate."""

    samples: np.ndarray
    sample_rate: float

    def __post_init__(self):
        x = _frozen(self.samples)
        if x.ndim != 1:
            raise ShapeError(f"Signal must be 1-D, got shape {x.shape}")
        if not np.all(np.isfinite(x)):
            raise NumericError("Signal contains NaN or Inf samples")
        if not self.sample_rate > 0:
            raise DomainError(f"sample_rate must be positive, got {self.sample_rate}")
        object.__setattr__(self, "samples", x)

    def __len__(self):
        return self.samples.shape[0]

    @property
    def duration(self) -> float:
        return len(self) / self.sample_rate

    def with_samples(self, samples) -> "Signal":
        return Signal(samples, self.sample_rate)


@dataclass(frozen=True)
class StftConfig:
    window_size: int = 4096
    hop_fraction: float = 0.25
    window: str = "hann"

    def __post_init__(self):
        if int(self.window_size) != self.window_size or self.window_size < 2:
            raise DomainError(f"window_size must be an integer >= 2, got {self.window_size}")
        if not 0 < self.hop_fraction <= 1:
            raise DomainError(f"hop_fraction must lie in (0, 1], got {self.hop_fraction}")
        object.__setattr__(self, "window_size", int(self.window_size))

    @property
    def hop(self) -> int:
        return max(1, int(round(self.window_size * self.hop_fraction)))

    @property
    def n_bins(self) -> int:
        return self.window_size // 2 + 1

    def window_array(self) -> np.ndarray:
        return _window(self.window, self.window_size)

    def freqs(self, sample_rate: float) -> np.ndarray:
        return np.fft.rfftfreq(self.window_size, d=1.0 / sample_rate)


@lru_cache(maxsize=32)
def _window(name: str, size: int) -> np.ndarray:
    w = get_window(name, size, fftbins=True)
    w.setflags(write=False)
    return w


def analysis_config(sample_rate: float) -> StftConfig:
    """Analysis grid used for LTAS and the spectral filter cost.

    4096-sample windows at 44.1 kHz and 2048 at 22.05 kHz; other rates get the
    power of two closest to the same duration.
    """
    size = 2 ** int(round(np.log2(4096 * sample_rate / 44100.0)))
    return StftConfig(window_size=max(size, 2), hop_fraction=0.25)


@dataclass(frozen=True)
class Spectrogram:
    frames: np.ndarray  # (n_frames, n_bins), complex
    config: StftConfig
    sample_rate: float
    length: int | None = field(default=None)

    def __post_init__(self):
        frames = np.asarray(self.frames)
        if frames.ndim != 2 or frames.shape[1] != self.config.n_bins:
            raise ShapeError(
                f"frames must have shape (n_frames, {self.config.n_bins}), got {frames.shape}"
            )
        object.__setattr__(self, "frames", _frozen(frames, dtype=complex))

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]

    def freqs(self) -> np.ndarray:
        return self.config.freqs(self.sample_rate)


def next_pow2(n: int) -> int:
    return 1 if n <= 1 else 1 << (int(n) - 1).bit_length()


def full_grid(n_samples: int, sample_rate: float) -> tuple[int, np.ndarray]:
    """FFT length and one-sided frequency grid used for full-signal filtering."""
    n_fft = next_pow2(n_samples)
    return n_fft, np.fft.rfftfreq(n_fft, d=1.0 / sample_rate)


def _frame_view(x: np.ndarray, config: StftConfig) -> np.ndarray:
    n = x.shape[-1]
    if n < config.window_size:
        raise InputSizeError(
            f"signal of {n} samples is shorter than one window ({config.window_size})"
        )
    view = np.lib.stride_tricks.sliding_window_view(x, config.window_size, axis=-1)
    return view[..., :: config.hop, :]


def stft(signal: Signal, config: StftConfig) -> Spectrogram:
    """One-sided STFT without centering; frames start at multiples of the hop."""
    frames = _frame_view(signal.samples, config) * config.window_array()
    return Spectrogram(np.fft.rfft(frames, axis=-1), config, signal.sample_rate, len(signal))


def stft_magnitude(x: np.ndarray, config: StftConfig) -> np.ndarray:
    """|STFT| of a raw array, shape (n_frames, n_bins)."""
    return np.abs(np.fft.rfft(_frame_view(np.asarray(x, float), config) * config.window_array(), axis=-1))


def istft(spec: Spectrogram) -> Signal:
    """Least-squares overlap-add inverse of :func:`stft`.

    Samples not covered by any window (or covered only where the window is
    zero) come back as zero.
    """
    cfg = spec.config
    n_frames = spec.n_frames
    hop, size = cfg.hop, cfg.window_size
    out_len = (n_frames - 1) * hop + size if n_frames else 0
    if spec.length is not None:
        if spec.length < out_len:
            raise ShapeError(f"{n_frames} frames need at least {out_len} samples, length is {spec.length}")
        out_len = spec.length
    w = cfg.window_array()
    grains = np.fft.irfft(spec.frames, n=size, axis=-1) * w
    num = np.zeros(out_len)
    den = np.zeros(out_len)
    for t in range(n_frames):
        sl = slice(t * hop, t * hop + size)
        num[sl] += grains[t]
        den[sl] += w * w
    tiny = 1e-10 * (den.max() if out_len else 0.0)
    out = np.divide(num, den, out=np.zeros_like(num), where=den > tiny)
    return Signal(out, spec.sample_rate)


def db_to_gain(db):
    return np.power(10.0, np.asarray(db, dtype=float) / 20.0)


def gain_to_db(gain, floor: float = 1e-300):
    return 20.0 * np.log10(np.maximum(np.asarray(gain, dtype=float), floor))


def zero_phase_filter(x: np.ndarray, gain: np.ndarray) -> np.ndarray:
    """Multiply the padded spectrum of ``x`` by a real ``gain`` and truncate.

    ``gain`` lives on the one-sided grid of ``next_pow2(len(x))``. The operator
    is linear and self-adjoint, so it doubles as its own transpose.
    """
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    n_fft = next_pow2(n)
    if gain.shape[-1] != n_fft // 2 + 1:
        raise ShapeError(
            f"response has {gain.shape[-1]} bins, expected {n_fft // 2 + 1} for {n} samples"
        )
    spec = np.fft.rfft(x, n=n_fft, axis=-1)
    return np.fft.irfft(spec * gain, n=n_fft, axis=-1)[..., :n]


def apply_zero_phase_filter(signal: Signal, response_db) -> Signal:
    """Filter ``signal`` by a magnitude response in dB on its full FFT grid."""
    response_db = np.asarray(response_db, dtype=float)
    if not np.all(np.isfinite(response_db)):
        raise NumericError("response contains non-finite dB values")
    return signal.with_samples(zero_phase_filter(signal.samples, db_to_gain(response_db)))
