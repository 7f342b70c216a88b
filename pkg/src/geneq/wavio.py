"""Mono WAV reading and writing (PCM 16/24-bit, 32-bit float)."""

from __future__ import annotations

import warnings
import wave
from pathlib import Path

import numpy as np
from scipy.io import wavfile

from .dsp import Signal
from .errors import AudioIOError

SUBTYPES = ("pcm16", "pcm24", "float32")


def read_wav(path) -> Signal:
    """Read a WAV file as float samples in [-1, 1); multi-channel is averaged."""
    try:
        rate, data = wavfile.read(str(path))
    except (ValueError, EOFError) as exc:
        raise AudioIOError(f"{path}: not a readable WAV file ({exc})") from exc
    if data.dtype == np.uint8:
        x = (data.astype(float) - 128.0) / 128.0
    elif data.dtype == np.int16:
        x = data.astype(float) / 32768.0
    elif data.dtype == np.int32:
        # 24-bit PCM arrives left-justified in int32
        x = data.astype(float) / 2147483648.0
    else:
        x = data.astype(float)
    if x.ndim == 2:
        if x.shape[1] > 1:
            warnings.warn(f"{path}: mixing {x.shape[1]} channels down to mono", stacklevel=2)
        x = x.mean(axis=1)
    return Signal(x, float(rate))


def write_wav(path, signal: Signal, subtype: str = "float32") -> None:
    path = Path(path)
    rate = int(round(signal.sample_rate))
    x = signal.samples
    if subtype == "float32":
        wavfile.write(str(path), rate, x.astype(np.float32))
    elif subtype == "pcm16":
        q = np.clip(np.round(x * 32768.0), -32768, 32767).astype("<i2")
        wavfile.write(str(path), rate, q)
    elif subtype == "pcm24":
        q = np.clip(np.round(x * 8388608.0), -8388608, 8388607).astype("<i4")
        raw = q.view(np.uint8).reshape(-1, 4)[:, :3].tobytes()
        with wave.open(str(path), "wb") as fh:
            fh.setnchannels(1)
            fh.setsampwidth(3)
            fh.setframerate(rate)
            fh.writeframes(raw)
    else:
        raise ValueError(f"unknown WAV subtype {subtype!r}; expected one of {SUBTYPES}")
