"""G.711-style companding: continuous mu/A-law curves with 8-bit codes."""

from __future__ import annotations

import numpy as np

from .waveform import Waveform, WaveformError

MU = 255.0
A = 87.6
_LEVELS = 127  # codes 1..255, 128 is zero


def mu_compress(x):
    x = np.asarray(x, dtype=np.float64)
    return np.sign(x) * np.log1p(MU * np.abs(x)) / np.log1p(MU)


def mu_expand(y):
    y = np.asarray(y, dtype=np.float64)
    return np.sign(y) * np.expm1(np.abs(y) * np.log1p(MU)) / MU


def a_compress(x):
    x = np.asarray(x, dtype=np.float64)
    ax = np.abs(x)
    denom = 1.0 + np.log(A)
    small = A * ax / denom
    with np.errstate(divide="ignore"):
        large = (1.0 + np.log(np.maximum(A * ax, 1e-300))) / denom
    return np.sign(x) * np.where(ax < 1.0 / A, small, large)


def a_expand(y):
    y = np.asarray(y, dtype=np.float64)
    ay = np.abs(y)
    denom = 1.0 + np.log(A)
    small = ay * denom / A
    large = np.exp(ay * denom - 1.0) / A
    return np.sign(y) * np.where(ay < 1.0 / denom, small, large)


_CURVES = {"mu": (mu_compress, mu_expand), "a": (a_compress, a_expand)}


def encode(x, law: str = "mu") -> np.ndarray:
    """Samples in [-1, 1] to uint8 codes."""
    compress, _ = _CURVES[law]
    y = compress(np.clip(x, -1.0, 1.0))
    return (np.round(y * _LEVELS) + 128).astype(np.uint8)


def decode(codes, law: str = "mu") -> np.ndarray:
    _, expand = _CURVES[law]
    y = (np.asarray(codes, dtype=np.float64) - 128.0) / _LEVELS
    return expand(y)


def g711(w: Waveform, law: str = "mu") -> Waveform:
    if w.rate != 8000:
        raise WaveformError(f"g711 needs 8 kHz input, got {w.rate}")
    if law not in _CURVES:
        raise ValueError(f"unknown law {law!r}")
    return w.with_samples(decode(encode(w.samples, law), law))
