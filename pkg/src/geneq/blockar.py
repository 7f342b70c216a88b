"""Block-autoregressive restoration of recordings longer than one segment."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .denoiser import DenoiserPrior
from .dsp import Signal
from .errors import ConfigError
from .filters import FilterParams, init_default
from .ltas import LtasProfile, compute_ltas, ltas_eq_filter
from .sampler import (
    AudioCost,
    GuidanceConfig,
    InnerLoopConfig,
    NoiseSchedule,
    SamplerTrace,
    _full_gain,
    restore_segment,
)


@dataclass(frozen=True)
class BlockArConfig:
    segment_length: float
    overlap_fraction: float = 0.10
    reestimate_filter_per_block: bool = True
    # start each block from the previous block's filter instead of the initial one
    carry_filter: bool = True

    def __post_init__(self):
        if not 0.0 < self.overlap_fraction < 0.5:
            raise ConfigError(f"overlap_fraction must lie in (0, 0.5), got {self.overlap_fraction}")
        if not self.segment_length > 0:
            raise ConfigError(f"segment_length must be > 0 seconds, got {self.segment_length}")

    def segment_samples(self, sample_rate: float) -> int:
        return int(round(self.segment_length * sample_rate))

    def overlap_samples(self, sample_rate: float) -> int:
        return int(round(self.overlap_fraction * self.segment_samples(sample_rate)))


def block_layout(n: int, segment: int, overlap: int) -> list[tuple[int, int]]:
    """(start, stop) of each block; the last block is shifted back to end at ``n``."""
    if overlap < 1 or overlap >= segment:
        raise ConfigError(f"overlap of {overlap} samples does not fit a {segment}-sample segment")
    if n <= segment:
        return [(0, n)]
    hop = segment - overlap
    starts = list(range(0, n - segment, hop))
    if starts[-1] + segment < n:
        starts.append(n - segment)
    return [(s, s + segment) for s in starts]


def block_ar_cost(y, x_prev, x_hat0, filt: FilterParams, sample_rate: float) -> float:
    """Overlap region matched to ``x_prev``, the rest to ``y`` through the filter."""
    y = np.asarray(y, dtype=float)
    cost = AudioCost(y, _full_gain(filt, y.size, sample_rate), np.asarray(x_prev, dtype=float))
    return cost.value(x_hat0)


def crossfade(prev_tail: np.ndarray, head: np.ndarray) -> np.ndarray:
    """Linear ramp from ``prev_tail`` to ``head``; both end points are excluded from the ramp."""
    r = np.arange(1, head.size + 1) / (head.size + 1)
    return (1.0 - r) * prev_tail + r * head


def restore_recording(
    y_full: Signal,
    prior: DenoiserPrior,
    schedule: NoiseSchedule,
    g_cfg: GuidanceConfig,
    i_cfg: InnerLoopConfig,
    b_cfg: BlockArConfig,
    ltas_ref: LtasProfile | None = None,
    rng: np.random.Generator | None = None,
    *,
    order: int = 2,
    filter_init: FilterParams | None = None,
    traces: list | None = None,
) -> tuple[Signal, list[FilterParams]]:
    """Restore ``y_full`` block by block.

    Every block has the segment length (so one prior serves all of them). The
    LTAS equalizer, when a mode needs it, is estimated once on the whole
    recording. ``traces``, if a list, receives one :class:`SamplerTrace` per
    block.
    """
    if rng is None:
        rng = np.random.default_rng()
    sr = y_full.sample_rate
    seg = b_cfg.segment_samples(sr)
    ov = b_cfg.overlap_samples(sr)
    n = len(y_full)
    layout = block_layout(n, seg, ov)
    y = y_full.samples

    h_ltas = None
    if g_cfg.mode != "plain":
        if ltas_ref is None:
            raise ConfigError(f"mode {g_cfg.mode!r} needs a reference LTAS")
        h_ltas = ltas_eq_filter(compute_ltas(y_full, ltas_ref.config), ltas_ref)

    init = filter_init if filter_init is not None else init_default(sr)
    frozen_cfg = InnerLoopConfig(0, i_cfg.adam, i_cfg.bcr)
    out = np.zeros(n)
    filters: list[FilterParams] = []
    prev_block = None
    prev_stop = 0
    for k, (start, stop) in enumerate(layout):
        block = y_full.with_samples(y[start:stop])
        if k == 0:
            inner, start_filter, tail = i_cfg, init, None
        else:
            inner = i_cfg if b_cfg.reestimate_filter_per_block else frozen_cfg
            if not b_cfg.reestimate_filter_per_block:
                start_filter = filters[0]
            else:
                start_filter = filters[-1] if b_cfg.carry_filter else init
            tail = prev_block[start - (prev_stop - prev_block.size) :]
        trace = SamplerTrace() if traces is not None else None
        x_blk, filt = restore_segment(
            block, prior, schedule, g_cfg, inner, ltas_ref, rng,
            order=order, filter_init=start_filter, h_ltas=h_ltas, prev_tail=tail, trace=trace,
        )
        xb = x_blk.samples
        if tail is None:
            out[start:stop] = xb
        else:
            n_ov = tail.size
            out[start : start + n_ov] = crossfade(tail, xb[:n_ov])
            out[start + n_ov : stop] = xb[n_ov:]
        if traces is not None:
            traces.append(trace)
        filters.append(filt)
        prev_block, prev_stop = xb, stop
    return Signal(out, sr), filters
