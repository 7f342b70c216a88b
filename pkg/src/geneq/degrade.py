"""Synthetic degradations: zero-phase filtering plus white noise at a target SNR."""

from __future__ import annotations

import math

import numpy as np

from .dsp import Signal, apply_zero_phase_filter, full_grid
from .errors import ValidationError
from .filters import F_MIN_HZ, FilterParams, default_f_max, project, response_on_grid


def flat_filter(sample_rate: float) -> FilterParams:
    """0 dB between 21 Hz and just below the upper frequency bound.

    The model's band-limit slopes still act outside that range; degrading
    with the "flat" preset bypasses filtering altogether (see
    :data:`UNITY_PRESETS`).
    """
    f_max = default_f_max(sample_rate)
    bps = (F_MIN_HZ + 1.0, 500.0, 1000.0, 1500.0, f_max - 1.0)
    return FilterParams(bps, (0.0, 0.0, 0.0, 0.0), 2, F_MIN_HZ, f_max)


def gramophone_filter(sample_rate: float) -> FilterParams:
    """Band-limit at 4 kHz, weak bass and a presence bump around 1-2.5 kHz."""
    f_max = default_f_max(sample_rate)
    return FilterParams((150.0, 500.0, 1000.0, 2500.0, 4000.0), (9.0, 2.0, 3.0, -10.0), 2, F_MIN_HZ, f_max)


FILTER_PRESETS = {"flat": flat_filter, "gramophone": gramophone_filter}
# presets that degrade with an exact unity response
UNITY_PRESETS = frozenset({"flat"})


def preset_filter(name: str, sample_rate: float) -> FilterParams:
    if name not in FILTER_PRESETS:
        raise ValidationError([f"filter preset must be one of {', '.join(FILTER_PRESETS)}, got {name!r}"])
    return project(FILTER_PRESETS[name](sample_rate))


def check_snr(snr_db) -> float:
    """+inf means noiseless; NaN and -inf are rejected."""
    try:
        snr = float(snr_db)
    except (TypeError, ValueError):
        raise ValidationError([f"snr must be a number, got {snr_db!r}"]) from None
    if math.isnan(snr) or snr == -math.inf:
        raise ValidationError([f"snr must be a finite number of dB or +inf, got {snr_db!r}"])
    return snr


def filter_signal(x: Signal, params: FilterParams | None) -> Signal:
    """Zero-phase filtering; ``params=None`` is the unity response."""
    if params is None:
        return x.with_samples(x.samples.copy())
    _, freqs = full_grid(len(x), x.sample_rate)
    return apply_zero_phase_filter(x, response_on_grid(params, freqs))


def degrade_signal(x: Signal, params: FilterParams | None, snr_db, rng: np.random.Generator) -> tuple[Signal, Signal]:
    """Return (degraded, clean filtered); the noise power is set against the filtered signal."""
    snr = check_snr(snr_db)
    filtered = filter_signal(x, params)
    if snr == math.inf:
        return filtered, filtered
    power = float(np.mean(filtered.samples**2))
    noise = rng.standard_normal(len(x)) * math.sqrt(power / 10.0 ** (snr / 10.0))
    return filtered.with_samples(filtered.samples + noise), filtered


def measured_snr_db(noisy: Signal, clean: Signal) -> float:
    err = noisy.samples - clean.samples
    return 10.0 * math.log10(np.sum(clean.samples**2) / np.sum(err**2))


def sidecar_dict(params: FilterParams, snr_db: float, seed: int, source: str, unity: bool = False) -> dict:
    return {
        "filter": params.to_dict(),
        "unity": bool(unity),
        "snr_db": "inf" if snr_db == math.inf else float(snr_db),
        "seed": int(seed),
        "source": source,
    }
