"""Simplified G.726-style ADPCM.

Adaptive mid-tread quantizer (2 to 5 bits, sign + magnitude) with Jayant
step multipliers, and the G.726 pole/zero predictor: 2 poles on the
reconstructed signal, 6 zeros on the quantized difference, both adapted with
sign-sign LMS and the usual leakage/stability limits. Not bit-exact.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from .waveform import Waveform, WaveformError

BITS_PER_RATE = {16000: 2, 24000: 3, 32000: 4, 40000: 5}

# step multipliers indexed by quantized magnitude (fitted for SNR on voiced test signals)
MULTIPLIERS = {
    2: np.array([0.8, 1.5]),
    3: np.array([0.93, 0.93, 1.09, 1.5]),
    4: np.array([0.96, 0.96, 0.96, 0.96, 1.023, 1.162, 1.32, 1.5]),
    5: np.array([0.96, 0.96, 0.96, 0.96, 0.96, 0.981, 1.023, 1.068,
                 1.114, 1.162, 1.213, 1.265, 1.32, 1.378, 1.438, 1.5]),
}
STEP_MIN = 2.0**-15
STEP_MAX = 0.5


@njit(cache=True, nogil=True)
def _sgn(v):
    if v > 0.0:
        return 1.0
    if v < 0.0:
        return -1.0
    return 0.0


@njit(cache=True, nogil=True)
def _run(x, codes, bits, mult, encode):
    """Shared encoder/decoder loop; the encoder fills ``codes``, the decoder reads them."""
    n = codes.shape[0]
    out = np.empty(n)
    a = np.zeros(2)
    b = np.zeros(6)
    sr1 = 0.0
    sr2 = 0.0
    p1 = 0.0
    p2 = 0.0
    dq_hist = np.zeros(6)
    step = STEP_MIN
    qmax = 2 ** (bits - 1) - 1
    for k in range(n):
        sez = 0.0
        for i in range(6):
            sez += b[i] * dq_hist[i]
        se = sez + a[0] * sr1 + a[1] * sr2
        if encode:
            d = x[k] - se
            q = int(abs(d) / step + 0.5)
            if q > qmax:
                q = qmax
            code = q if d >= 0.0 else -q
            codes[k] = code
        else:
            code = codes[k]
            q = abs(code)
        dq = code * step
        sr = se + dq
        if sr > 1.0:
            sr = 1.0
        elif sr < -1.0:
            sr = -1.0
        out[k] = sr

        step *= mult[q]
        if step < STEP_MIN:
            step = STEP_MIN
        elif step > STEP_MAX:
            step = STEP_MAX

        p = dq + sez
        sdq = _sgn(dq)
        for i in range(6):
            b[i] = (1.0 - 2.0**-8) * b[i] + 2.0**-7 * sdq * _sgn(dq_hist[i])
        sp = _sgn(p)
        a1 = a[0]
        if abs(a1) <= 0.5:
            f = 4.0 * a1
        else:
            f = 2.0 * _sgn(a1)
        a2 = (1.0 - 2.0**-7) * a[1] + 2.0**-7 * (sp * _sgn(p2) - f * sp * _sgn(p1))
        if a2 > 0.75:
            a2 = 0.75
        elif a2 < -0.75:
            a2 = -0.75
        a1 = (1.0 - 2.0**-8) * a1 + 3.0 * 2.0**-8 * sp * _sgn(p1)
        lim = 1.0 - 2.0**-4 - a2
        if a1 > lim:
            a1 = lim
        elif a1 < -lim:
            a1 = -lim
        a[0] = a1
        a[1] = a2

        for i in range(5, 0, -1):
            dq_hist[i] = dq_hist[i - 1]
        dq_hist[0] = dq
        sr2 = sr1
        sr1 = sr
        p2 = p1
        p1 = p
    return out


def _bits(bitrate_bps: int) -> int:
    try:
        return BITS_PER_RATE[int(bitrate_bps)]
    except KeyError:
        raise ValueError(f"unsupported G.726 bitrate {bitrate_bps}; use one of {sorted(BITS_PER_RATE)}") from None


def encode(x: np.ndarray, bitrate_bps: int) -> np.ndarray:
    """Signed quantizer codes, one per sample."""
    bits = _bits(bitrate_bps)
    x = np.ascontiguousarray(x, dtype=np.float64)
    codes = np.zeros(x.shape[0], dtype=np.int64)
    _run(x, codes, bits, MULTIPLIERS[bits], True)
    return codes.astype(np.int8)


def decode(codes: np.ndarray, bitrate_bps: int) -> np.ndarray:
    bits = _bits(bitrate_bps)
    codes = np.ascontiguousarray(codes, dtype=np.int64)
    return _run(np.zeros(0), codes, bits, MULTIPLIERS[bits], False)


def g726(w: Waveform, bitrate_bps: int) -> Waveform:
    if w.rate != 8000:
        raise WaveformError(f"g726 needs 8 kHz input, got {w.rate}")
    return w.with_samples(decode(encode(w.samples, bitrate_bps), bitrate_bps))
