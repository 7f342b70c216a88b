"""Parametric piecewise-linear (dB vs. log2 f) degradation filter.

The response is pinned to 0 dB at the anchor breakpoint and integrates the
segment slopes outward from it::

    R(f) = sum_j s_j * (log2(clip(f, b_j, b_j+1)) - log2(ref_j))
           + a_lim_plus  * max(0, log2(f / b_last))
           + a_lim_minus * min(0, log2(f / b_first))

where ``ref_j`` is the segment edge nearer to the anchor. This form is
continuous at every breakpoint and linear in the slopes.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from .dsp import analysis_config
from .errors import ConfigError, DomainError, ShapeError

A_LIM_PLUS = -80.0
A_LIM_MINUS = 80.0
SLOPE_LIMIT = 40.0
MIN_GAP_HZ = 1.0
F_MIN_HZ = 20.0
DEFAULT_BREAKPOINTS = (50.0, 500.0, 1000.0, 1500.0, 2000.0)
SUPPORTED_RATES = (22050, 44100)

_LN2 = np.log(2.0)


def default_f_max(sample_rate: float) -> float:
    """Nyquist minus one bin of the analysis grid."""
    return sample_rate / 2.0 - sample_rate / analysis_config(sample_rate).window_size


@dataclass(frozen=True)
class FilterParams:
    breakpoints_hz: np.ndarray
    slopes_db_per_oct: np.ndarray
    anchor_index: int
    f_min: float
    f_max: float
    a_lim_plus: float = A_LIM_PLUS
    a_lim_minus: float = A_LIM_MINUS

    def __post_init__(self):
        b = np.array(self.breakpoints_hz, dtype=float).reshape(-1)
        s = np.array(self.slopes_db_per_oct, dtype=float).reshape(-1)
        if b.size < 1 or s.size != b.size - 1:
            raise ShapeError(f"{b.size} breakpoints need {max(b.size - 1, 0)} slopes, got {s.size}")
        if not 0 <= self.anchor_index < b.size:
            raise ShapeError(f"anchor_index {self.anchor_index} out of range for {b.size} breakpoints")
        b.setflags(write=False)
        s.setflags(write=False)
        object.__setattr__(self, "breakpoints_hz", b)
        object.__setattr__(self, "slopes_db_per_oct", s)
        object.__setattr__(self, "anchor_index", int(self.anchor_index))

    def __eq__(self, other) -> bool:
        if not isinstance(other, FilterParams):
            return NotImplemented
        return (
            np.array_equal(self.breakpoints_hz, other.breakpoints_hz)
            and np.array_equal(self.slopes_db_per_oct, other.slopes_db_per_oct)
            and (self.anchor_index, self.f_min, self.f_max, self.a_lim_plus, self.a_lim_minus)
            == (other.anchor_index, other.f_min, other.f_max, other.a_lim_plus, other.a_lim_minus)
        )

    __hash__ = None

    @property
    def n_breakpoints(self) -> int:
        return self.breakpoints_hz.size

    @property
    def n_params(self) -> int:
        return 2 * self.n_breakpoints - 1

    @property
    def anchor_hz(self) -> float:
        return float(self.breakpoints_hz[self.anchor_index])

    def vector(self) -> np.ndarray:
        """Optimizable parameters: breakpoints followed by slopes."""
        return np.concatenate([self.breakpoints_hz, self.slopes_db_per_oct])

    def with_vector(self, v) -> "FilterParams":
        v = np.asarray(v, dtype=float)
        k = self.n_breakpoints
        if v.shape != (self.n_params,):
            raise ShapeError(f"expected {self.n_params} parameters, got shape {v.shape}")
        return self.replace(breakpoints_hz=v[:k], slopes_db_per_oct=v[k:])

    def replace(self, **changes) -> "FilterParams":
        fields = dict(
            breakpoints_hz=self.breakpoints_hz,
            slopes_db_per_oct=self.slopes_db_per_oct,
            anchor_index=self.anchor_index,
            f_min=self.f_min,
            f_max=self.f_max,
            a_lim_plus=self.a_lim_plus,
            a_lim_minus=self.a_lim_minus,
        )
        fields.update(changes)
        return FilterParams(**fields)

    def breakpoint_labels(self) -> list[str]:
        return [f"f_{i - self.anchor_index}" for i in range(self.n_breakpoints)]

    def slope_labels(self) -> list[str]:
        # segment j below the anchor is A_{j-a}, above it A_{j-a+1}
        a = self.anchor_index
        return [f"A_{j - a}" if j < a else f"A_{j - a + 1}" for j in range(self.n_breakpoints - 1)]

    def violations(self) -> list[str]:
        out = []
        b, s = self.breakpoints_hz, self.slopes_db_per_oct
        if np.any(np.diff(b) <= 0):
            out.append("breakpoints are not strictly increasing")
        if np.any(b <= self.f_min) or np.any(b >= self.f_max):
            out.append(f"breakpoints outside ({self.f_min}, {self.f_max}) Hz")
        if np.any(np.abs(s) > SLOPE_LIMIT):
            out.append(f"slopes outside [-{SLOPE_LIMIT}, {SLOPE_LIMIT}] dB/oct")
        return out

    def is_feasible(self) -> bool:
        return not self.violations()

    def to_dict(self) -> dict:
        return {
            "breakpoints_hz": [float(v) for v in self.breakpoints_hz],
            "slopes_db_per_oct": [float(v) for v in self.slopes_db_per_oct],
            "anchor_index": self.anchor_index,
            "f_min": float(self.f_min),
            "f_max": float(self.f_max),
            "a_lim_plus": float(self.a_lim_plus),
            "a_lim_minus": float(self.a_lim_minus),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FilterParams":
        try:
            return cls(
                breakpoints_hz=d["breakpoints_hz"],
                slopes_db_per_oct=d["slopes_db_per_oct"],
                anchor_index=d["anchor_index"],
                f_min=float(d["f_min"]),
                f_max=float(d["f_max"]),
                a_lim_plus=float(d.get("a_lim_plus", A_LIM_PLUS)),
                a_lim_minus=float(d.get("a_lim_minus", A_LIM_MINUS)),
            )
        except KeyError as exc:
            raise ConfigError(f"filter description is missing {exc.args[0]!r}") from None


@dataclass(frozen=True)
class BcrConfig:
    beta: float = 0.1
    gamma_bcr: float = 10.0

    def __post_init__(self):
        if not self.beta > 0:
            raise ConfigError(f"BCR beta must be positive, got {self.beta}")
        if not self.gamma_bcr >= 0:
            raise ConfigError(f"BCR weight must be non-negative, got {self.gamma_bcr}")


@dataclass(frozen=True)
class ResponseGradients:
    d_breakpoints: np.ndarray  # (n_freqs, n_breakpoints)
    d_slopes: np.ndarray  # (n_freqs, n_breakpoints - 1)

    def jacobian(self) -> np.ndarray:
        """Columns ordered like :meth:`FilterParams.vector`."""
        return np.concatenate([self.d_breakpoints, self.d_slopes], axis=1)


def _log2_freqs(freqs) -> np.ndarray:
    f = np.asarray(freqs, dtype=float)
    if np.any(~(f > 0)):
        raise DomainError("response is only defined for frequencies > 0 Hz")
    return np.log2(f)


def _segment_terms(params: FilterParams, lf: np.ndarray):
    lb = np.log2(params.breakpoints_hz)
    lo, hi = lb[:-1], lb[1:]
    above = np.arange(params.n_breakpoints - 1) >= params.anchor_index
    ref = np.where(above, lo, hi)
    seg = np.clip(lf[:, None], lo, hi) - ref
    return lb, seg


def eval_response_db(params: FilterParams, freqs) -> np.ndarray:
    """Magnitude response in dB at ``freqs`` (Hz, all > 0)."""
    lf_in = _log2_freqs(freqs)
    lf = lf_in.reshape(-1)
    lb, seg = _segment_terms(params, lf)
    r = seg @ params.slopes_db_per_oct
    r += params.a_lim_plus * np.maximum(0.0, lf - lb[-1])
    r += params.a_lim_minus * np.minimum(0.0, lf - lb[0])
    return r.reshape(lf_in.shape)


def eval_gain(params: FilterParams, freqs) -> np.ndarray:
    return np.power(10.0, eval_response_db(params, freqs) / 20.0)


def response_on_grid(params: FilterParams, freqs) -> np.ndarray:
    """Response in dB on an FFT grid whose first bin may be 0 Hz.

    The DC bin is evaluated half a bin above 0 Hz.
    """
    f = np.array(freqs, dtype=float)
    if f.size > 1 and f[0] <= 0:
        f[0] = 0.5 * f[1]
    return eval_response_db(params, f)


def response_param_gradients(params: FilterParams, freqs) -> ResponseGradients:
    """Analytic partial derivatives of the dB response.

    A frequency that coincides with a breakpoint belongs to the segment to its
    right.
    """
    lf = _log2_freqs(freqs).reshape(-1)
    f = np.exp2(lf)
    b = params.breakpoints_hz
    s = params.slopes_db_per_oct
    k = params.n_breakpoints
    lb, seg = _segment_terms(params, lf)
    inv = 1.0 / (b * _LN2)

    d_b = np.zeros((lf.size, k))
    above = np.arange(k - 1) >= params.anchor_index
    # lower edge of segment j: clip term when f < b_j, ref term when above anchor
    lower_active = f[:, None] < b[None, :-1]
    d_b[:, :-1] += s * inv[:-1] * (lower_active.astype(float) - above)
    # upper edge of segment j: clip term when f >= b_{j+1}, ref term below anchor
    upper_active = f[:, None] >= b[None, 1:]
    d_b[:, 1:] += s * inv[1:] * (upper_active.astype(float) - ~above)
    d_b[:, -1] -= params.a_lim_plus * inv[-1] * (f >= b[-1])
    d_b[:, 0] -= params.a_lim_minus * inv[0] * (f < b[0])
    return ResponseGradients(d_breakpoints=d_b, d_slopes=seg)


def _separate(b: np.ndarray, lo: float, hi: float, gap: float) -> np.ndarray:
    b = np.sort(np.clip(b, lo, hi))
    for i in range(1, b.size):
        if b[i] < b[i - 1] + gap:
            b[i] = b[i - 1] + gap
    if b.size and b[-1] > hi:
        b[-1] = hi
        for i in range(b.size - 2, -1, -1):
            if b[i] > b[i + 1] - gap:
                b[i] = b[i + 1] - gap
    return b


def project(params: FilterParams, min_gap: float = MIN_GAP_HZ) -> FilterParams:
    """Project onto the feasible set: clipped slopes, ordered and separated breakpoints."""
    s = np.clip(params.slopes_db_per_oct, -SLOPE_LIMIT, SLOPE_LIMIT)
    lo, hi = params.f_min + min_gap, params.f_max - min_gap
    b = _separate(params.breakpoints_hz.copy(), lo, hi, min_gap)
    # float rounding in the two passes can leave an ulp-level violation
    for _ in range(8):
        nb = _separate(b.copy(), lo, hi, min_gap)
        if np.array_equal(nb, b):
            break
        b = nb
    return params.replace(breakpoints_hz=b, slopes_db_per_oct=s)


def bcr_cost(params: FilterParams, cfg: BcrConfig) -> tuple[float, np.ndarray]:
    """Breakpoint-collapse penalty and its gradient w.r.t. the breakpoints.

    Every term is ``exp(-beta * gap)``: the gaps between f_min, each breakpoint
    and f_max.
    """
    b = params.breakpoints_hz
    edges = np.concatenate([[params.f_min], b, [params.f_max]])
    terms = np.exp(-cfg.beta * np.diff(edges))
    # term i depends on edges i (+beta) and i+1 (-beta)
    d_edges = np.zeros(edges.size)
    d_edges[:-1] += cfg.beta * terms
    d_edges[1:] -= cfg.beta * terms
    return float(terms.sum()), d_edges[1:-1]


def init_default(sample_rate: float) -> FilterParams:
    """Flat response with a steep band-limit at 2 kHz."""
    if int(sample_rate) not in SUPPORTED_RATES or sample_rate != int(sample_rate):
        raise ConfigError(f"unsupported sample rate {sample_rate}; expected one of {SUPPORTED_RATES}")
    return FilterParams(
        breakpoints_hz=DEFAULT_BREAKPOINTS,
        slopes_db_per_oct=np.zeros(len(DEFAULT_BREAKPOINTS) - 1),
        anchor_index=2,
        f_min=F_MIN_HZ,
        f_max=default_f_max(sample_rate),
    )


def save_filter(path, params: FilterParams) -> None:
    Path(path).write_text(yaml.safe_dump(params.to_dict(), sort_keys=False))


def load_filter(path) -> FilterParams:
    data = yaml.safe_load(Path(path).read_text())
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a mapping of filter fields")
    return FilterParams.from_dict(data)


def write_response_csv(path_or_file, freqs, response_db) -> None:
    def _write(fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["frequency_hz", "gain_db"])
        for f, g in zip(freqs, response_db):
            w.writerow([f"{f:.6f}", f"{g:.6f}"])

    if hasattr(path_or_file, "write"):
        _write(path_or_file)
    else:
        with open(path_or_file, "w", newline="") as fh:
            _write(fh)
