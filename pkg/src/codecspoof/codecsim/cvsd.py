"""Continuously-variable-slope delta modulation.

The modulator always emits one bit per modulator clock; bit-rates above the
audio rate run the modulator on an upsampled copy (2x or 4x) and decimate the
decoded signal back.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

from .resample import resample_ratio
from .waveform import Waveform, WaveformError

RUN_LENGTH = 3  # identical bits that signal slope overload
SYLLABIC_MS = 5.0
LEAK_MS = 20.0
# step limits per 16 kHz modulator sample; scaled down for faster clocks
STEP_MIN_16K = 1.0 / 512
STEP_MAX_16K = 0.3


@njit(cache=True, nogil=True)
def _run(x, bits, encode, step_min, step_max, beta, leak, run):
    n = bits.shape[0]
    out = np.empty(n)
    est = 0.0
    step = step_min
    hist = 0
    seen = 0
    mask = (1 << run) - 1
    for k in range(n):
        if encode:
            bit = 1 if x[k] >= est else 0
            bits[k] = bit
        else:
            bit = bits[k]
        hist = ((hist << 1) | bit) & mask
        if seen < run:
            seen += 1
        if seen >= run and (hist == 0 or hist == mask):
            step = beta * step + (1.0 - beta) * step_max
        else:
            step = beta * step
        if step < step_min:
            step = step_min
        if bit:
            est = leak * est + step
        else:
            est = leak * est - step
        out[k] = est
    return out


def _params(clock_rate: int):
    scale = 16000.0 / clock_rate
    beta = math.exp(-1000.0 / (SYLLABIC_MS * clock_rate))
    leak = math.exp(-1000.0 / (LEAK_MS * clock_rate))
    return STEP_MIN_16K * scale, STEP_MAX_16K * scale, beta, leak


def bits_per_sample(rate: int, bitrate_bps: int) -> int:
    k, rem = divmod(int(bitrate_bps), int(rate))
    if rem or k not in (1, 2, 4):
        raise ValueError(f"cvsd at {bitrate_bps} bps on {rate} Hz audio is not 1, 2 or 4 bits per sample")
    return k


def modulate(x: np.ndarray, clock_rate: int) -> tuple[np.ndarray, np.ndarray]:
    """One bit per input sample; returns (bits, decoded)."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    bits = np.zeros(x.shape[0], dtype=np.uint8)
    y = _run(x, bits, True, *_params(clock_rate), RUN_LENGTH)
    return bits, y


def demodulate(bits: np.ndarray, clock_rate: int) -> np.ndarray:
    bits = np.ascontiguousarray(bits, dtype=np.uint8)
    return _run(np.zeros(0), bits, False, *_params(clock_rate), RUN_LENGTH)


def cvsd(w: Waveform, bitrate_bps: int) -> Waveform:
    if w.rate not in (8000, 16000):
        raise WaveformError(f"unsupported rate {w.rate}")
    k = bits_per_sample(w.rate, bitrate_bps)
    clock = w.rate * k
    x = resample_ratio(w.samples, k, 1) if k > 1 else w.samples
    bits, _ = modulate(x, clock)
    y = demodulate(bits, clock)
    if k > 1:
        y = resample_ratio(y, 1, k)
    y = np.clip(y[: len(w)], -1.0, 1.0)
    return w.with_samples(y)
