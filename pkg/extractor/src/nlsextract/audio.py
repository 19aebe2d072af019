"""WAV loading: decode, mono downmix, resample to 16 kHz."""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np
from scipy.io import wavfile
from scipy.signal import resample_poly

from .encoders import SAMPLE_RATE


class AudioError(Exception):
    """Raised when an audio file cannot be decoded."""


_PEAKS = {
    np.dtype("int16"): 32768.0,
    np.dtype("int32"): 2147483648.0,
    np.dtype("uint8"): 128.0,
}


def load_wav_16k(path: str | Path) -> np.ndarray:
    """Return the file as mono float32 at 16 kHz."""
    try:
        rate, data = wavfile.read(path)
    except Exception as exc:
        raise AudioError(f"cannot decode {path}: {exc}") from exc
    if data.size == 0:
        raise AudioError(f"cannot decode {path}: empty audio stream")
    if data.dtype in _PEAKS:
        offset = 128.0 if data.dtype == np.uint8 else 0.0
        data = (data.astype(np.float64) - offset) / _PEAKS[data.dtype]
    else:
        data = data.astype(np.float64)
    if data.ndim == 2:
        data = data.mean(axis=1)
    if rate != SAMPLE_RATE:
        g = math.gcd(rate, SAMPLE_RATE)
        data = resample_poly(data, SAMPLE_RATE // g, rate // g)
    return data.astype(np.float32)


def crop(waveform: np.ndarray, start_s: float, end_s: float) -> np.ndarray:
    """Slice [start_s, end_s) out of a 16 kHz waveform."""
    a = int(round(start_s * SAMPLE_RATE))
    b = int(round(end_s * SAMPLE_RATE))
    return waveform[max(a, 0):max(b, 0)]
