"""Long-term average spectra, LTAS-based equalization and the LTAS distance."""

from __future__ import annotations

import csv
import hashlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy import sparse

from .dsp import Signal, StftConfig, full_grid, gain_to_db, stft_magnitude, zero_phase_filter
from .errors import InputSizeError, NumericError, ShapeError, ValidationError

EQ_FLOOR_DB = -20.0
POWER_FLOOR = 1e-12
DISTANCE_FLOOR_DB = -60.0
SMOOTHING_FWHM_OCT = 1.0 / 3.0
MIN_FRAMES = 2


@dataclass(frozen=True)
class LtasProfile:
    freqs: np.ndarray
    power: np.ndarray
    config: StftConfig
    n_frames: int
    sample_rate: float

    def __post_init__(self):
        f = np.array(self.freqs, dtype=float)
        p = np.array(self.power, dtype=float)
        if f.shape != p.shape or f.ndim != 1:
            raise ShapeError(f"freqs {f.shape} and power {p.shape} must be equal-length 1-D arrays")
        if np.any(np.diff(f) <= 0):
            raise ShapeError("LTAS frequencies must be strictly increasing")
        if np.any(p < 0) or not np.all(np.isfinite(p)):
            raise NumericError("LTAS power must be finite and non-negative")
        f.setflags(write=False)
        p.setflags(write=False)
        object.__setattr__(self, "freqs", f)
        object.__setattr__(self, "power", p)

    def db(self) -> np.ndarray:
        return 10.0 * np.log10(_floored(self.power))

    def scaled(self, factor: float) -> "LtasProfile":
        return LtasProfile(self.freqs, self.power * factor, self.config, self.n_frames, self.sample_rate)


@dataclass(frozen=True)
class EqResponse:
    """Linear magnitude response sampled on an LTAS grid."""

    freqs: np.ndarray
    gain: np.ndarray

    @property
    def db(self) -> np.ndarray:
        return gain_to_db(self.gain)

    def on_grid(self, freqs) -> np.ndarray:
        """Linear gain transferred to ``freqs`` by interpolation in (log2 f, dB)."""
        return transfer_gain(self.freqs, self.gain, freqs)


def _floored(power: np.ndarray) -> np.ndarray:
    return np.maximum(power, POWER_FLOOR * max(float(np.max(power)), np.finfo(float).tiny))


def transfer_gain(src_freqs, src_gain, dst_freqs) -> np.ndarray:
    src_f = np.asarray(src_freqs, float)[1:]
    src_db = gain_to_db(np.asarray(src_gain, float)[1:])
    dst = np.maximum(np.asarray(dst_freqs, float), src_f[0])
    return np.power(10.0, np.interp(np.log2(dst), np.log2(src_f), src_db) / 20.0)


@lru_cache(maxsize=16)
def _smoothing_matrix(n_bins: int, df: float, fwhm_oct: float) -> sparse.csr_matrix:
    """Row-normalized Gaussian kernel in log2 frequency; DC passes through."""
    sd = fwhm_oct / (2.0 * np.sqrt(2.0 * np.log(2.0)))
    lf = np.log2(np.arange(1, n_bins) * df)
    rows, cols, vals = [0], [0], [1.0]
    reach = 5.0 * sd
    lo = np.searchsorted(lf, lf - reach, side="left")
    hi = np.searchsorted(lf, lf + reach, side="right")
    for i in range(lf.size):
        w = np.exp(-0.5 * ((lf[lo[i]:hi[i]] - lf[i]) / sd) ** 2)
        rows.extend([i + 1] * w.size)
        cols.extend(range(lo[i] + 1, hi[i] + 1))
        vals.extend(w / w.sum())
    return sparse.csr_matrix((vals, (rows, cols)), shape=(n_bins, n_bins))


def smooth_spectrum(values, sample_rate: float, window_size: int, fwhm_oct: float = SMOOTHING_FWHM_OCT):
    values = np.asarray(values, dtype=float)
    m = _smoothing_matrix(values.shape[-1], sample_rate / window_size, fwhm_oct)
    return m @ values


def frame_power_sum(signal: Signal, config: StftConfig) -> tuple[np.ndarray, int]:
    """Sum over frames of |STFT|**2 and the frame count (mergeable partials)."""
    mag = stft_magnitude(signal.samples, config)
    return np.sum(mag * mag, axis=0), mag.shape[0]


def ltas_from_sums(power_sum, n_frames: int, config: StftConfig, sample_rate: float) -> LtasProfile:
    if n_frames < MIN_FRAMES:
        raise InputSizeError(f"LTAS needs at least {MIN_FRAMES} frames, got {n_frames}")
    mean = np.asarray(power_sum, dtype=float) / n_frames
    smoothed = smooth_spectrum(mean, sample_rate, config.window_size)
    return LtasProfile(config.freqs(sample_rate), smoothed, config, n_frames, sample_rate)


def compute_ltas(signal: Signal, config: StftConfig) -> LtasProfile:
    """Frame-averaged power spectrum, Gaussian-smoothed over 1/3 octave."""
    if len(signal) < config.window_size + (MIN_FRAMES - 1) * config.hop:
        raise InputSizeError(
            f"LTAS of a {len(signal)}-sample signal: need >= {MIN_FRAMES} windows of {config.window_size}"
        )
    total, n = frame_power_sum(signal, config)
    return ltas_from_sums(total, n, config, signal.sample_rate)


def corpus_ltas(signals, config: StftConfig, jobs: int = 1) -> LtasProfile:
    """Frame-weighted LTAS over many signals.

    ``signals`` may hold :class:`Signal` objects or zero-argument loaders.
    Partial sums are merged in input order, so the result does not depend on
    ``jobs``.
    """
    signals = list(signals)
    if not signals:
        raise ValidationError(["corpus is empty"])

    def _partial(item):
        sig = item() if callable(item) else item
        total, n = frame_power_sum(sig, config)
        return total, n, sig.sample_rate

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(_partial, signals))
    else:
        parts = [_partial(s) for s in signals]
    rates = {p[2] for p in parts}
    if len(rates) != 1:
        raise ValidationError([f"corpus mixes sample rates {sorted(rates)}"])
    total = np.zeros(config.n_bins)
    frames = 0
    for psum, n, _ in parts:
        total += psum
        frames += n
    return ltas_from_sums(total, frames, config, rates.pop())


def _check_grids(a: LtasProfile, b: LtasProfile):
    if a.freqs.shape != b.freqs.shape or not np.allclose(a.freqs, b.freqs, rtol=1e-12, atol=0):
        raise ShapeError("LTAS profiles are on different frequency grids")


def ltas_eq_filter(input_ltas: LtasProfile, ref_ltas: LtasProfile) -> EqResponse:
    """Forward degradation estimate sqrt(input / reference), floored at -20 dB."""
    _check_grids(input_ltas, ref_ltas)
    ratio = np.sqrt(_floored(input_ltas.power) / _floored(ref_ltas.power))
    gain = np.maximum(ratio, 10.0 ** (EQ_FLOOR_DB / 20.0))
    gain[0] = gain[1]
    return EqResponse(input_ltas.freqs, gain)


def apply_inverse_eq(y: Signal, h_ltas: EqResponse) -> Signal:
    """Equalize ``y`` with the reciprocal of a forward response."""
    gain = np.asarray(h_ltas.gain, dtype=float)
    if np.any(~(gain > 0)) or not np.all(np.isfinite(gain)):
        raise NumericError("forward response must be finite and strictly positive to invert")
    _, freqs = full_grid(len(y), y.sample_rate)
    inv = 1.0 / transfer_gain(h_ltas.freqs, gain, freqs)
    return y.with_samples(zero_phase_filter(y.samples, inv))


def ltas_distance(restored_ltas: LtasProfile, ref_ltas: LtasProfile) -> float:
    """10 log10 of the mean relative power deviation over non-DC bins, floored at -60 dB."""
    _check_grids(restored_ltas, ref_ltas)
    r = _floored(ref_ltas.power)[1:]
    x = restored_ltas.power[1:]
    mean_dev = float(np.mean(np.abs(x - r) / r))
    if mean_dev <= 10.0 ** (DISTANCE_FLOOR_DB / 10.0):
        return DISTANCE_FLOOR_DB
    return 10.0 * np.log10(mean_dev)


def write_ltas_csv(path, profile: LtasProfile) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["freq_hz", "power"])
        for f, p in zip(profile.freqs, profile.power):
            w.writerow([repr(float(f)), repr(float(p))])


def read_ltas_csv(path, config: StftConfig | None = None, sample_rate: float | None = None) -> LtasProfile:
    """Read a (freq_hz, power) CSV; the analysis config is inferred from the grid."""
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:2]] != ["freq_hz", "power"]:
            raise ValidationError([f"{path}: expected a 'freq_hz,power' header"])
        for row in reader:
            if row:
                rows.append((float(row[0]), float(row[1])))
    data = np.array(rows)
    if data.shape[0] < 3:
        raise ValidationError([f"{path}: LTAS needs at least 3 bins"])
    freqs, power = data[:, 0], data[:, 1]
    n_bins = freqs.size
    if config is None:
        config = StftConfig(window_size=2 * (n_bins - 1))
    if sample_rate is None:
        sample_rate = float(round(2.0 * freqs[-1]))
    return LtasProfile(freqs, power, config, 0, sample_rate)


def corpus_key(paths, config: StftConfig) -> str:
    """Content hash of the corpus files plus the analysis configuration."""
    h = hashlib.sha256()
    h.update(repr((config.window_size, config.hop_fraction, config.window)).encode())
    for p in sorted(str(p) for p in paths):
        h.update(hashlib.sha256(Path(p).read_bytes()).digest())
    return h.hexdigest()


def save_cache(path, profile: LtasProfile) -> None:
    # pass an open handle so numpy does not append ".npz" to the name
    with open(path, "wb") as fh:
        np.savez(
            fh,
            freqs=profile.freqs,
            power=profile.power,
            n_frames=profile.n_frames,
            sample_rate=profile.sample_rate,
            window_size=profile.config.window_size,
            hop_fraction=profile.config.hop_fraction,
            window=np.array(profile.config.window),
        )


def load_cache(path) -> LtasProfile:
    with np.load(path) as z:
        cfg = StftConfig(int(z["window_size"]), float(z["hop_fraction"]), str(z["window"]))
        return LtasProfile(z["freqs"], z["power"], cfg, int(z["n_frames"]), float(z["sample_rate"]))
