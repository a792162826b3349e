from __future__ import annotations

import numpy as np
from scipy.signal import resample_poly

from .waveform import RATES, Waveform, WaveformError

# steeper than scipy's default Kaiser beta of 5 so that the polyphase branches
# agree on DC gain (ripple under 1e-6 when upsampling a constant)
WINDOW = ("kaiser", 10.0)


def resample(w: Waveform, target_rate: int) -> Waveform:
    """Polyphase rate conversion between 8 and 16 kHz.

    Edges are extended linearly before filtering so that DC and slow trends
    survive without droop at the ends.
    """
    if target_rate not in RATES:
        raise WaveformError(f"unsupported rate pair {w.rate} -> {target_rate}")
    if target_rate == w.rate:
        return w
    y = np.clip(resample_ratio(w.samples, target_rate, w.rate), -1.0, 1.0)
    return Waveform(y, target_rate)


def resample_ratio(x: np.ndarray, up: int, down: int) -> np.ndarray:
    g = np.gcd(up, down)
    up, down = up // g, down // g
    if up == down:
        return np.asarray(x, dtype=np.float64)
    return resample_poly(np.asarray(x, dtype=np.float64), up, down, padtype="line", window=WINDOW)
